#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "harvestkit/expected.hpp"
#include "harvestkit/oai/model.hpp"
#include "harvestkit/xml.hpp"

namespace harvestkit::oai {

/// Why a response body could not be turned into protocol data.
struct ResponseError {
    enum class Kind {
        WellFormedness,  // broken XML or ill-formed UTF-8; `offset` locates the defect
        Schema,          // well-formed but violates the response or payload schema
        ProtocolMisuse,  // well-formed but breaks protocol rules (missing required elements, unknown codes)
        ServerError,     // the server answered with <error> elements
    };
    Kind kind;
    std::string message;
    std::optional<std::size_t> offset;
    bool encoding = false;  // WellFormedness caused by ill-formed UTF-8
    std::vector<ProtocolError> protocol_errors;
    std::optional<Instant> response_date;  // set for ServerError

    bool has_code(ProtocolErrorCode c) const;
};

std::string_view to_string(ResponseError::Kind k);

struct ListRecordsPage {
    Instant response_date{};
    std::vector<MetadataRecord> records;
    std::optional<ResumptionToken> token;
};

struct ListIdentifiersPage {
    Instant response_date{};
    std::vector<RecordHeader> headers;
    std::optional<ResumptionToken> token;
};

struct IdentifyInfo {
    Instant response_date{};
    std::string repository_name;
    std::string base_url;
    std::string protocol_version;
    std::string earliest_datestamp_text;
    Instant earliest_datestamp{};
    DeletedPolicy deleted_policy = DeletedPolicy::No;
    Granularity granularity = Granularity::Second;
    std::vector<std::string> admin_emails;
    std::size_t description_count = 0;
};

struct MetadataFormat {
    std::string prefix;
    std::string schema;
    std::string ns;
};

struct SetInfo {
    std::string spec;
    std::string name;
};

struct ListSetsPage {
    Instant response_date{};
    std::vector<SetInfo> sets;
    std::optional<ResumptionToken> token;
};

/// `format_hint` labels records when the response's <request> echo carries no
/// metadataPrefix (resumed lists); with neither, the payload namespace decides.
Expected<ListRecordsPage, ResponseError> parse_list_response(std::string_view body, std::string_view format_hint = {},
                                                             const DcProfile& profile = DcProfile::standard());
Expected<ListIdentifiersPage, ResponseError> parse_list_identifiers(std::string_view body);
Expected<IdentifyInfo, ResponseError> parse_identify(std::string_view body);
Expected<MetadataRecord, ResponseError> parse_get_record(std::string_view body, std::string_view format_hint = {},
                                                         const DcProfile& profile = DcProfile::standard());
Expected<std::vector<MetadataFormat>, ResponseError> parse_list_metadata_formats(std::string_view body);
Expected<ListSetsPage, ResponseError> parse_list_sets(std::string_view body);

/// Parses a standalone <record> element as produced by serialize_record.
Expected<MetadataRecord, ResponseError> parse_record(std::string_view bytes,
                                                     const DcProfile& profile = DcProfile::standard());

/// Parses the header/metadata of a <record> element cut from `source`.
/// `format_prefix` tells how to read the payload.
Expected<MetadataRecord, ResponseError> read_record(const xml::XmlElement& record, std::string_view source,
                                                    std::string_view format_prefix, const DcProfile& profile);

Expected<std::vector<DcElement>, ResponseError> read_dc_payload(const xml::XmlElement& payload,
                                                                std::string_view format_prefix,
                                                                const DcProfile& profile);

bool is_dc_format(std::string_view format_prefix);

/// Writes a DC payload element (oai_dc:dc or nsdl_dc:nsdl_dc) with its own
/// namespace declarations.
std::string serialize_dc_payload(std::string_view format_prefix, const std::vector<DcElement>& elements);

void write_header(xml::XmlWriter& w, const RecordHeader& header);

/// `payload` is inserted verbatim inside <metadata>; ignored for deleted records.
void write_record(xml::XmlWriter& w, const RecordHeader& header, std::string_view payload);

void write_token(xml::XmlWriter& w, const ResumptionToken& token);

/// A record as a standalone <record> element in the protocol namespace.
std::string serialize_record(const MetadataRecord& record);

using RequestArgs = std::vector<std::pair<std::string, std::string>>;

/// Wraps a verb body into a complete OAI-PMH response document.
std::string make_response(Instant response_date, std::string_view base_url, const RequestArgs& request,
                          std::string_view verb, std::string_view body);

std::string make_error_response(Instant response_date, std::string_view base_url, const RequestArgs& request,
                                const std::vector<ProtocolError>& errors);

}  // namespace harvestkit::oai
