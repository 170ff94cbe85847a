#include "harvestkit/ingest/transform.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

#include "harvestkit/ingest/tables.hpp"

namespace harvestkit::ingest {

using oai::DcElement;

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::vector<std::string>> read_tsv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        for (;;) {
            const auto tab = line.find('\t', start);
            cols.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        rows.push_back(std::move(cols));
    }
    return rows;
}

const std::map<std::string, std::string>& dcmi_table() {
    static const auto table = [] {
        std::map<std::string, std::string> m;
        for (const auto& row : read_tsv(tables::kDcmiTypesTsv))
            if (row.size() >= 2) {
                m[lower(row[0])] = row[1];
                m[lower(row[1])] = row[1];
            }
        return m;
    }();
    return table;
}

const std::map<std::string, std::string>& language_table() {
    static const auto table = [] {
        std::map<std::string, std::string> m;
        for (const auto& row : read_tsv(tables::kIso639Tsv)) {
            if (row.size() < 4) continue;
            const std::string& code = row[0];
            m[lower(code)] = code;
            m[lower(row[1])] = code;
            if (row[2] != "-") m[lower(row[2])] = code;
            m[lower(row[3])] = code;
        }
        return m;
    }();
    return table;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
    return true;
}

bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

bool url_allowed(unsigned char c) {
    static constexpr std::string_view kAllowed = "-._~:/?#[]@!$&'()*+,;=";
    return (c < 0x80 && std::isalnum(c)) || kAllowed.find(static_cast<char>(c)) != std::string_view::npos;
}

bool valid_host(std::string_view host) {
    if (host.empty()) return false;
    if (host.front() == '[') {
        if (host.back() != ']' || host.size() < 3) return false;
        return std::all_of(host.begin() + 1, host.end() - 1,
                           [](char c) { return is_hex(c) || c == ':' || c == '.'; });
    }
    if (host.front() == '.' || host.front() == '-') return false;
    return std::all_of(host.begin(), host.end(), [](char c) {
        return (static_cast<unsigned char>(c) < 0x80 && std::isalnum(static_cast<unsigned char>(c))) || c == '-' ||
               c == '.';
    });
}

bool valid_authority(std::string_view authority) {
    const auto at = authority.rfind('@');
    if (at != std::string_view::npos) authority.remove_prefix(at + 1);
    std::string_view host = authority;
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos && authority.find(']', colon) == std::string_view::npos) {
        const std::string_view port = authority.substr(colon + 1);
        host = authority.substr(0, colon);
        if (!port.empty()) {
            if (port.size() > 5 || !std::all_of(port.begin(), port.end(), [](char c) { return c >= '0' && c <= '9'; }))
                return false;
            if (std::stoi(std::string(port)) > 65535) return false;
        }
    }
    return valid_host(host);
}

void log_rule(std::vector<std::string>& log, std::string_view rule) {
    if (std::find(log.begin(), log.end(), rule) == log.end()) log.emplace_back(rule);
}

bool dedup(std::vector<DcElement>& elements) {
    std::vector<DcElement> kept;
    kept.reserve(elements.size());
    for (auto& e : elements)
        if (std::find(kept.begin(), kept.end(), e) == kept.end()) kept.push_back(std::move(e));
    const bool changed = kept.size() != elements.size();
    elements = std::move(kept);
    return changed;
}

bool uri_scheme_element(const DcElement& e) { return e.scheme == "URI"; }

}  // namespace

void TransformConfig::load_stop_phrases(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read stop-phrase file " + path);
    std::string line;
    while (std::getline(in, line)) {
        const std::string phrase = collapse_whitespace(line);
        if (phrase.empty() || phrase.front() == '#') continue;
        stop_phrases.push_back(phrase);
    }
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char c : s) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out += ' ';
        pending = false;
        out += c;
    }
    return out;
}

std::optional<std::string> scrub_uri(std::string_view value) {
    while (!value.empty() && is_space(value.front())) value.remove_prefix(1);
    while (!value.empty() && is_space(value.back())) value.remove_suffix(1);
    std::string scheme;
    if (starts_with_ci(value, "http://")) scheme = "http://";
    else if (starts_with_ci(value, "ftp://")) scheme = "ftp://";
    else return std::nullopt;
    value.remove_prefix(scheme.size());

    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string rest;
    rest.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        const auto c = static_cast<unsigned char>(value[i]);
        if (c == '\t' || c == '\r' || c == '\n') continue;
        if (c == '%') {
            if (i + 2 >= value.size() || !is_hex(value[i + 1]) || !is_hex(value[i + 2])) return std::nullopt;
            rest.append(value.substr(i, 3));
            i += 2;
            continue;
        }
        if (url_allowed(c)) {
            rest += static_cast<char>(c);
        } else {
            rest += '%';
            rest += kHex[c >> 4];
            rest += kHex[c & 0xF];
        }
    }
    const auto end = rest.find_first_of("/?#");
    if (!valid_authority(std::string_view(rest).substr(0, end))) return std::nullopt;
    return scheme + rest;
}

bool is_fetchable_url(std::string_view value) {
    auto s = scrub_uri(value);
    return s && *s == value;
}

DcElement downgrade_invalid_uri(DcElement element) {
    if (!uri_scheme_element(element)) return element;
    if (auto s = scrub_uri(element.value)) element.value = std::move(*s);
    else element.scheme.clear();
    return element;
}

std::optional<std::string> normalize_language(std::string_view value) {
    const std::string key = lower(collapse_whitespace(value));
    const auto& table = language_table();
    if (auto it = table.find(key); it != table.end()) return it->second;
    // Tags with subtags: keep the subtags, normalize the primary one.
    const auto dash = key.find('-');
    if (dash == std::string::npos || dash == 0) return std::nullopt;
    auto it = table.find(key.substr(0, dash));
    if (it == table.end()) return std::nullopt;
    std::string tag = it->second;
    std::string_view rest = std::string_view(key).substr(dash);
    while (!rest.empty()) {
        rest.remove_prefix(1);
        const auto next = rest.find('-');
        std::string sub(rest.substr(0, next));
        if (sub.empty() || sub.size() > 8 ||
            !std::all_of(sub.begin(), sub.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); }))
            return std::nullopt;
        if (sub.size() == 2)
            for (auto& c : sub) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        tag += "-" + sub;
        rest = next == std::string_view::npos ? std::string_view{} : rest.substr(next);
    }
    return tag;
}

std::optional<std::string> canonical_dcmi_type(std::string_view value) {
    const auto& table = dcmi_table();
    auto it = table.find(lower(collapse_whitespace(value)));
    if (it == table.end()) return std::nullopt;
    return it->second;
}

NormalizedRecord safe_transform(const oai::MetadataRecord& record, const TransformConfig& config) {
    return safe_transform(record.header.identifier, record.elements, config);
}

NormalizedRecord safe_transform(std::string source_identifier, const std::vector<DcElement>& input,
                                const TransformConfig& config) {
    NormalizedRecord out;
    out.source_identifier = std::move(source_identifier);
    auto& log = out.transform_log;

    std::vector<std::string> stops;
    for (const auto& p : config.stop_phrases) stops.push_back(lower(collapse_whitespace(p)));

    // (1) values with no information.
    std::vector<DcElement> elements;
    for (const auto& e : input) {
        const std::string key = lower(collapse_whitespace(e.value));
        if (key.empty() || std::find(stops.begin(), stops.end(), key) != stops.end()) {
            log_rule(log, kRuleStopPhrase);
            continue;
        }
        elements.push_back(e);
    }
    // (2) whitespace.
    for (auto& e : elements) {
        std::string collapsed = collapse_whitespace(e.value);
        if (collapsed != e.value) {
            e.value = std::move(collapsed);
            log_rule(log, kRuleWhitespace);
        }
    }
    // (3) exact duplicates, first kept.
    if (dedup(elements)) log_rule(log, kRuleDedup);
    // (4) recognizable schemes.
    auto qualify = [&](DcElement& e) {
        if (e.name == "identifier" && e.scheme.empty() && e.qualifier.empty() && scrub_uri(e.value)) {
            e.scheme = "URI";
            log_rule(log, kRuleQualifyUri);
        } else if (e.name == "type" && (e.scheme.empty() || e.scheme == "DCMIType")) {
            if (auto t = canonical_dcmi_type(e.value); t && (*t != e.value || e.scheme != "DCMIType")) {
                e.value = *t;
                e.scheme = "DCMIType";
                log_rule(log, kRuleQualifyType);
            }
        } else if (e.name == "language" && (e.scheme.empty() || e.scheme == "RFC3066" || e.scheme == "ISO639-2")) {
            if (auto l = normalize_language(e.value); l && (*l != e.value || e.scheme != "RFC3066")) {
                e.value = *l;
                e.scheme = "RFC3066";
                log_rule(log, kRuleLanguage);
            }
        }
    };
    for (auto& e : elements) qualify(e);
    // (5) URI scrubbing; claims that cannot be made good are dropped.
    for (auto& e : elements) {
        if (!uri_scheme_element(e)) continue;
        DcElement fixed = downgrade_invalid_uri(e);
        if (fixed.scheme.empty()) log_rule(log, kRuleDowngradeUri);
        else if (fixed.value != e.value) log_rule(log, kRuleScrubUri);
        e = std::move(fixed);
        // A misplaced URI claim may hide a recognizable language or type.
        if (e.scheme.empty()) qualify(e);
    }
    // Normalization can make distinct inputs equal; a second pass keeps the
    // output a fixed point.
    if (dedup(elements)) log_rule(log, kRuleDedup);
    out.elements = std::move(elements);
    return out;
}

bool has_min_content(const NormalizedRecord& record) {
    return std::any_of(record.elements.begin(), record.elements.end(),
                       [](const DcElement& e) { return e.name == "title" || e.name == "identifier"; });
}

std::vector<Violation> validate_normalized(const NormalizedRecord& record, const oai::DcProfile& profile) {
    std::vector<Violation> out;
    for (std::size_t i = 0; i < record.elements.size(); ++i) {
        const DcElement& e = record.elements[i];
        if (!profile.allows_element(e.name)) {
            out.push_back({i, std::string(kViolationUnknownElement), "element '" + e.name + "' is not in the profile"});
            continue;
        }
        if (!profile.allows_qualifier(e.name, e.qualifier))
            out.push_back({i, std::string(kViolationUnknownQualifier),
                           "refinement '" + e.qualifier + "' does not refine '" + e.name + "'"});
        if (!profile.allows_scheme(e.name, e.scheme))
            out.push_back({i, std::string(kViolationUnknownScheme),
                           "scheme '" + e.scheme + "' is not allowed on '" + e.name + "'"});
        if (e.scheme == "URI" && !is_fetchable_url(e.value))
            out.push_back({i, std::string(kViolationUriInvalid), "'" + e.value + "' is not a fetchable URL"});
        if (e.value.empty()) out.push_back({i, std::string(kViolationEmptyValue), "element '" + e.name + "' is empty"});
    }
    if (!has_min_content(record))
        out.push_back({std::nullopt, std::string(kViolationMinContent), "record keeps neither a title nor an identifier"});
    return out;
}

}  // namespace harvestkit::ingest
