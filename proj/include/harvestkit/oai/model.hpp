#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "harvestkit/expected.hpp"
#include "harvestkit/time.hpp"

namespace harvestkit::oai {

inline constexpr std::string_view kOaiNs = "http://www.openarchives.org/OAI/2.0/";
inline constexpr std::string_view kOaiSchema = "http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd";
inline constexpr std::string_view kOaiDcNs = "http://www.openarchives.org/OAI/2.0/oai_dc/";
inline constexpr std::string_view kOaiDcSchema = "http://www.openarchives.org/OAI/2.0/oai_dc.xsd";
inline constexpr std::string_view kDcNs = "http://purl.org/dc/elements/1.1/";
inline constexpr std::string_view kDctermsNs = "http://purl.org/dc/terms/";
inline constexpr std::string_view kNsdlDcNs = "http://ns.nsdl.org/nsdl_dc_v1.02/";
inline constexpr std::string_view kNsdlDcSchema = "http://ns.nsdl.org/schemas/nsdl_dc/nsdl_dc_v1.02.xsd";
inline constexpr std::string_view kXsiNs = "http://www.w3.org/2001/XMLSchema-instance";

inline constexpr std::string_view kOaiDc = "oai_dc";
inline constexpr std::string_view kNsdlDc = "nsdl_dc";

inline constexpr std::array<std::string_view, 15> kDcElementNames{
    "title",  "creator", "subject", "description", "publisher", "contributor", "date",     "type",
    "format", "identifier", "source", "language", "relation",    "coverage",    "rights"};

bool is_dc_element_name(std::string_view name) noexcept;

/// One Dublin Core statement. Empty qualifier/scheme/language mean absent.
struct DcElement {
    std::string name;
    std::string qualifier;
    std::string scheme;
    std::string value;
    std::string language;

    bool operator==(const DcElement&) const = default;
};

struct RecordHeader {
    std::string identifier;
    Instant datestamp{};
    std::vector<std::string> set_specs;
    bool deleted = false;

    bool operator==(const RecordHeader&) const = default;
};

struct MetadataRecord {
    RecordHeader header;
    std::string format_prefix;
    std::vector<DcElement> elements;
    /// Payload bytes exactly as received (the element inside <metadata>).
    std::string raw_xml;
};

/// Element-wise equality, ignoring raw_xml.
bool same_content(const MetadataRecord& a, const MetadataRecord& b);

struct ResumptionToken {
    std::string token;
    std::optional<std::size_t> complete_list_size;
    std::optional<std::size_t> cursor;
    std::optional<Instant> expiration;

    bool completes_list() const noexcept { return token.empty(); }
};

enum class ProtocolErrorCode {
    BadArgument,
    BadResumptionToken,
    BadVerb,
    CannotDisseminateFormat,
    IdDoesNotExist,
    NoRecordsMatch,
    NoMetadataFormats,
    NoSetHierarchy,
};

std::string_view to_string(ProtocolErrorCode code);
std::optional<ProtocolErrorCode> parse_error_code(std::string_view text);

struct ProtocolError {
    ProtocolErrorCode code;
    std::string message;
};

enum class DeletedPolicy { No, Transient, Persistent };
std::string_view to_string(DeletedPolicy p);
std::optional<DeletedPolicy> parse_deleted_policy(std::string_view text);

enum class Granularity { Day, Second };

struct DatestampError {
    enum class Kind { Malformed, NonUtc, ExcessPrecision };
    Kind kind;
    std::size_t position;
};

std::string_view to_string(DatestampError::Kind k);

/// Strict record-level datestamp: `YYYY-MM-DDThh:mm:ssZ` only.
Expected<Instant, DatestampError> parse_datestamp(std::string_view text);

struct RequestDate {
    Instant instant;
    Granularity granularity;
};

/// from/until request arguments, where the protocol also allows `YYYY-MM-DD`.
Expected<RequestDate, DatestampError> parse_request_date(std::string_view text);

/// The qualified-DC application profile: which refinements exist (and their
/// parent element), which encoding schemes each element accepts, and any
/// extra element names admitted beyond the fifteen.
struct DcProfile {
    std::map<std::string, std::string, std::less<>> refinements;
    std::map<std::string, std::set<std::string, std::less<>>, std::less<>> schemes;
    std::set<std::string, std::less<>> extra_elements;

    bool allows_element(std::string_view name) const;
    bool allows_qualifier(std::string_view element, std::string_view qualifier) const;
    bool allows_scheme(std::string_view element, std::string_view scheme) const;

    static const DcProfile& standard();
    /// JSON document: {"refinements": {"abstract": "description", ...},
    /// "schemes": {"identifier": ["URI"], ...}, "extra_elements": [...]}.
    static DcProfile from_json(std::string_view json_text);
};

}  // namespace harvestkit::oai
