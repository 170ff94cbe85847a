#include "harvestkit/oai/model.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace harvestkit::oai {

bool is_dc_element_name(std::string_view name) noexcept {
    return std::find(kDcElementNames.begin(), kDcElementNames.end(), name) != kDcElementNames.end();
}

bool same_content(const MetadataRecord& a, const MetadataRecord& b) {
    return a.header == b.header && a.format_prefix == b.format_prefix && a.elements == b.elements;
}

namespace {

constexpr std::array<std::pair<ProtocolErrorCode, std::string_view>, 8> kCodes{{
    {ProtocolErrorCode::BadArgument, "badArgument"},
    {ProtocolErrorCode::BadResumptionToken, "badResumptionToken"},
    {ProtocolErrorCode::BadVerb, "badVerb"},
    {ProtocolErrorCode::CannotDisseminateFormat, "cannotDisseminateFormat"},
    {ProtocolErrorCode::IdDoesNotExist, "idDoesNotExist"},
    {ProtocolErrorCode::NoRecordsMatch, "noRecordsMatch"},
    {ProtocolErrorCode::NoMetadataFormats, "noMetadataFormats"},
    {ProtocolErrorCode::NoSetHierarchy, "noSetHierarchy"},
}};

}  // namespace

std::string_view to_string(ProtocolErrorCode code) {
    for (const auto& [c, s] : kCodes)
        if (c == code) return s;
    return "badArgument";
}

std::optional<ProtocolErrorCode> parse_error_code(std::string_view text) {
    for (const auto& [c, s] : kCodes)
        if (s == text) return c;
    return std::nullopt;
}

std::string_view to_string(DeletedPolicy p) {
    switch (p) {
        case DeletedPolicy::No: return "no";
        case DeletedPolicy::Transient: return "transient";
        case DeletedPolicy::Persistent: return "persistent";
    }
    return "no";
}

std::optional<DeletedPolicy> parse_deleted_policy(std::string_view text) {
    if (text == "no") return DeletedPolicy::No;
    if (text == "transient") return DeletedPolicy::Transient;
    if (text == "persistent") return DeletedPolicy::Persistent;
    return std::nullopt;
}

std::string_view to_string(DatestampError::Kind k) {
    switch (k) {
        case DatestampError::Kind::Malformed: return "MalformedDatestamp";
        case DatestampError::Kind::NonUtc: return "NonUtc";
        case DatestampError::Kind::ExcessPrecision: return "ExcessPrecision";
    }
    return "MalformedDatestamp";
}

namespace {

using Kind = DatestampError::Kind;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

int digits(std::string_view s, std::size_t at, std::size_t n) {
    int v = 0;
    for (std::size_t i = 0; i < n; ++i) v = v * 10 + (s[at + i] - '0');
    return v;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

// Shape template: 'D' digit, anything else literal.
std::optional<std::size_t> mismatch(std::string_view text, std::string_view shape) {
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i >= text.size()) return i;
        if (shape[i] == 'D' ? !is_digit(text[i]) : text[i] != shape[i]) return i;
    }
    return std::nullopt;
}

Expected<Instant, DatestampError> parse_day_part(std::string_view text) {
    if (auto at = mismatch(text, "DDDD-DD-DD")) return unexpected(DatestampError{Kind::Malformed, *at});
    const int y = digits(text, 0, 4), m = digits(text, 5, 2), d = digits(text, 8, 2);
    if (m < 1 || m > 12) return unexpected(DatestampError{Kind::Malformed, 5});
    if (d < 1 || d > days_in_month(y, m)) return unexpected(DatestampError{Kind::Malformed, 8});
    return make_instant(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

}  // namespace

Expected<Instant, DatestampError> parse_datestamp(std::string_view text) {
    auto day = parse_day_part(text);
    if (!day) return day;
    if (auto at = mismatch(text, "DDDD-DD-DDTDD:DD:DD")) return unexpected(DatestampError{Kind::Malformed, *at});
    const int hh = digits(text, 11, 2), mm = digits(text, 14, 2), ss = digits(text, 17, 2);
    if (hh > 23) return unexpected(DatestampError{Kind::Malformed, 11});
    if (mm > 59) return unexpected(DatestampError{Kind::Malformed, 14});
    if (ss > 59) return unexpected(DatestampError{Kind::Malformed, 17});
    if (text.size() == 19) return unexpected(DatestampError{Kind::NonUtc, 19});
    if (text[19] == '.') return unexpected(DatestampError{Kind::ExcessPrecision, 19});
    if (text[19] != 'Z') {
        if (text[19] == '+' || text[19] == '-') return unexpected(DatestampError{Kind::NonUtc, 19});
        return unexpected(DatestampError{Kind::Malformed, 19});
    }
    if (text.size() != 20) return unexpected(DatestampError{Kind::Malformed, 20});
    return *day + Seconds{hh * 3600 + mm * 60 + ss};
}

Expected<RequestDate, DatestampError> parse_request_date(std::string_view text) {
    if (text.size() == 10) {
        auto day = parse_day_part(text);
        if (!day) return unexpected(day.error());
        return RequestDate{*day, Granularity::Day};
    }
    auto t = parse_datestamp(text);
    if (!t) return unexpected(t.error());
    return RequestDate{*t, Granularity::Second};
}

bool DcProfile::allows_element(std::string_view name) const {
    return is_dc_element_name(name) || extra_elements.contains(name);
}

bool DcProfile::allows_qualifier(std::string_view element, std::string_view qualifier) const {
    if (qualifier.empty()) return true;
    auto it = refinements.find(qualifier);
    return it != refinements.end() && it->second == element;
}

bool DcProfile::allows_scheme(std::string_view element, std::string_view scheme) const {
    if (scheme.empty()) return true;
    auto it = schemes.find(element);
    return it != schemes.end() && it->second.contains(scheme);
}

const DcProfile& DcProfile::standard() {
    static const DcProfile profile = [] {
        DcProfile p;
        p.refinements = {
            {"alternative", "title"},        {"tableOfContents", "description"}, {"abstract", "description"},
            {"created", "date"},             {"valid", "date"},                  {"available", "date"},
            {"issued", "date"},              {"modified", "date"},               {"dateAccepted", "date"},
            {"dateCopyrighted", "date"},     {"dateSubmitted", "date"},          {"extent", "format"},
            {"medium", "format"},            {"bibliographicCitation", "identifier"},
            {"isVersionOf", "relation"},     {"hasVersion", "relation"},         {"isReplacedBy", "relation"},
            {"replaces", "relation"},        {"isRequiredBy", "relation"},       {"requires", "relation"},
            {"isPartOf", "relation"},        {"hasPart", "relation"},            {"isReferencedBy", "relation"},
            {"references", "relation"},      {"isFormatOf", "relation"},         {"hasFormat", "relation"},
            {"conformsTo", "relation"},      {"spatial", "coverage"},            {"temporal", "coverage"},
            {"accessRights", "rights"},      {"license", "rights"},
        };
        p.schemes = {
            {"identifier", {"URI"}},
            {"relation", {"URI"}},
            {"source", {"URI"}},
            {"type", {"DCMIType"}},
            {"language", {"RFC3066", "ISO639-2"}},
            {"format", {"IMT"}},
            {"date", {"W3CDTF"}},
            {"subject", {"LCSH", "DDC", "LCC", "MESH", "UDC"}},
            {"coverage", {"Point", "Box", "TGN", "ISO3166", "Period"}},
        };
        return p;
    }();
    return profile;
}

DcProfile DcProfile::from_json(std::string_view json_text) {
    const auto j = nlohmann::json::parse(json_text);
    DcProfile p;
    if (j.contains("refinements"))
        for (const auto& [k, v] : j.at("refinements").items()) p.refinements.emplace(k, v.get<std::string>());
    if (j.contains("schemes"))
        for (const auto& [k, v] : j.at("schemes").items())
            for (const auto& s : v) p.schemes[k].insert(s.get<std::string>());
    if (j.contains("extra_elements"))
        for (const auto& e : j.at("extra_elements")) p.extra_elements.insert(e.get<std::string>());
    return p;
}

}  // namespace harvestkit::oai
