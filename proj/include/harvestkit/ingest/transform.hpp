#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "harvestkit/oai/model.hpp"

namespace harvestkit::ingest {

// transform_log tags, one per rule that changed something.
inline constexpr std::string_view kRuleStopPhrase = "stop-phrase";
inline constexpr std::string_view kRuleWhitespace = "whitespace";
inline constexpr std::string_view kRuleDedup = "dedup";
inline constexpr std::string_view kRuleQualifyUri = "qualify-uri";
inline constexpr std::string_view kRuleQualifyType = "qualify-dcmitype";
inline constexpr std::string_view kRuleLanguage = "normalize-language";
inline constexpr std::string_view kRuleScrubUri = "scrub-uri";
inline constexpr std::string_view kRuleDowngradeUri = "downgrade-uri";

struct TransformConfig {
    /// Whole-value, case-insensitive matches (after whitespace collapse) that
    /// carry no information.
    std::vector<std::string> stop_phrases{"no abstract submitted", "n/a", "none", "unknown"};

    /// Adds phrases from a file: one per line, '#' comments.
    void load_stop_phrases(const std::string& path);
};

struct NormalizedRecord {
    std::string source_identifier;
    std::vector<oai::DcElement> elements;
    std::vector<std::string> transform_log;

    bool operator==(const NormalizedRecord&) const = default;
};

/// The fixed global rule set: stop phrases, whitespace, duplicates, scheme
/// qualification, URI scrubbing with downgrade.
NormalizedRecord safe_transform(const oai::MetadataRecord& record, const TransformConfig& config = {});
/// Same rules applied to an element list (used to re-run on normalized output).
NormalizedRecord safe_transform(std::string source_identifier, const std::vector<oai::DcElement>& elements,
                                const TransformConfig& config = {});

/// Repairs an http:// or ftp:// value into a syntactically valid URL:
/// trims, lowercases the scheme, drops embedded line breaks and tabs and
/// percent-encodes what must be encoded. Anything else is not fetchable.
std::optional<std::string> scrub_uri(std::string_view value);
bool is_fetchable_url(std::string_view value);

/// Identifier/URI elements whose value is not fetchable lose the URI scheme;
/// fetchable ones get the scrubbed value.
oai::DcElement downgrade_invalid_uri(oai::DcElement element);

/// ISO 639 code or English language name to its two-letter code.
std::optional<std::string> normalize_language(std::string_view value);
/// DCMI Type Vocabulary spelling to its canonical term.
std::optional<std::string> canonical_dcmi_type(std::string_view value);

std::string collapse_whitespace(std::string_view s);

struct Violation {
    std::optional<std::size_t> element_index;  // unset for record-level rules
    std::string rule;
    std::string message;

    bool operator==(const Violation&) const = default;
};

inline constexpr std::string_view kViolationUnknownElement = "unknown-element";
inline constexpr std::string_view kViolationUnknownQualifier = "unknown-qualifier";
inline constexpr std::string_view kViolationUnknownScheme = "unknown-scheme";
inline constexpr std::string_view kViolationUriInvalid = "uri-invalid";
inline constexpr std::string_view kViolationEmptyValue = "empty-value";
inline constexpr std::string_view kViolationMinContent = "min-content";

std::vector<Violation> validate_normalized(const NormalizedRecord& record,
                                           const oai::DcProfile& profile = oai::DcProfile::standard());

/// True when the record keeps at least one title or identifier.
bool has_min_content(const NormalizedRecord& record);

}  // namespace harvestkit::ingest
