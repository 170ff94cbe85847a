#include "harvestkit/validator/validator.hpp"

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>

#include "harvestkit/oai/protocol.hpp"
#include "harvestkit/utf8.hpp"
#include "harvestkit/xml.hpp"

namespace harvestkit::validator {

using client::FailureCategory;
using oai::ProtocolErrorCode;

std::string_view to_string(Severity s) { return s == Severity::Error ? "Error" : "Warning"; }
std::string_view to_string(Verdict v) { return v == Verdict::Pass ? "Pass" : "Fail"; }

std::size_t ValidationReport::error_count() const { return failures().size(); }

const CheckResult* ValidationReport::find(std::string_view check_id) const {
    for (const auto& c : checks)
        if (c.check_id == check_id) return &c;
    return nullptr;
}

std::vector<const CheckResult*> ValidationReport::failures() const {
    std::vector<const CheckResult*> out;
    for (const auto& c : checks)
        if (c.severity == Severity::Error && !c.passed) out.push_back(&c);
    return out;
}

namespace {

constexpr std::array<std::pair<std::string_view, FailureCategory>, 8> kErrorChecks{{
    {kCheckIdentify, FailureCategory::ProtocolViolation},
    {kCheckUtf8, FailureCategory::DataFormat},
    {kCheckSchema, FailureCategory::DataFormat},
    {kCheckDatestamp, FailureCategory::DataFormat},
    {kCheckResumptionToken, FailureCategory::ProtocolViolation},
    {kCheckIdempotency, FailureCategory::ProtocolViolation},
    {kCheckEncoding, FailureCategory::DataFormat},
    {kCheckDeletedPolicy, FailureCategory::ProtocolViolation},
}};

constexpr std::array<std::string_view, 3> kWarningChecks{kCheckIdentifyOptional, kCheckGranularity, kCheckAbout};

FailureCategory default_category(std::string_view check_id) {
    for (const auto& [id, cat] : kErrorChecks)
        if (id == check_id) return cat;
    return FailureCategory::DataFormat;
}

// First failure per check wins; later ones only bump the count.
struct Findings {
    struct Entry {
        FailureCategory category;
        std::string evidence;
        std::size_t count = 0;
    };
    std::map<std::string, Entry, std::less<>> failed;

    void fail(std::string_view check_id, std::string evidence) {
        fail(check_id, default_category(check_id), std::move(evidence));
    }
    void fail(std::string_view check_id, FailureCategory category, std::string evidence) {
        auto it = failed.find(check_id);
        if (it == failed.end()) it = failed.emplace(std::string(check_id), Entry{category, std::move(evidence), 0}).first;
        ++it->second.count;
    }
    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& [id, e] : failed) n += e.count;
        return n;
    }
};

std::string hex_bytes(std::string_view s, std::size_t at, std::size_t n) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (std::size_t i = at; i < std::min(s.size(), at + n); ++i) {
        if (!out.empty()) out += ' ';
        const auto c = static_cast<unsigned char>(s[i]);
        out += "0x";
        out += kHex[c >> 4];
        out += kHex[c & 0xF];
    }
    return out;
}

bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }

// Characters a URL may carry unescaped (RFC 3986 unreserved + reserved) plus
// well-formed percent escapes.
std::optional<std::size_t> bad_url_char(std::string_view v) {
    static constexpr std::string_view kAllowed = "-._~:/?#[]@!$&'()*+,;=";
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto c = static_cast<unsigned char>(v[i]);
        if (c == '%') {
            if (i + 2 >= v.size()) return i;
            if (!is_hex(v[i + 1]) || !is_hex(v[i + 2])) return i;
            i += 2;
            continue;
        }
        if (std::isalnum(c) && c < 0x80) continue;
        if (kAllowed.find(static_cast<char>(c)) != std::string_view::npos) continue;
        return i;
    }
    return std::nullopt;
}

bool url_like(std::string_view v) {
    auto lower_prefix = [&](std::string_view p) {
        if (v.size() < p.size()) return false;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (std::tolower(static_cast<unsigned char>(v[i])) != p[i]) return false;
        return true;
    };
    return lower_prefix("http://") || lower_prefix("https://") || lower_prefix("ftp://");
}

std::string trimmed(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1));
}

void check_identifier_encoding(std::string_view where, std::string_view value, Findings& f) {
    if (!url_like(value)) return;
    if (auto at = bad_url_char(value))
        f.fail(kCheckEncoding, std::string(where) + ": identifier '" + std::string(value) +
                                   "' has an unencoded character at position " + std::to_string(*at));
}

// Record-level checks on one <record> (or <header>, for ListIdentifiers) element.
void analyze_record(const xml::XmlElement& rec, std::string_view source, std::string_view prefix,
                    const oai::DcProfile& profile, Findings& f) {
    const xml::XmlElement* header = rec.local == "header" ? &rec : rec.child("header");
    std::string id = "(no identifier)";
    if (header) {
        if (const auto* ide = header->child("identifier")) {
            id = trimmed(ide->text);
            if (id.find_first_of(" \t\r\n<>\"") != std::string::npos)
                f.fail(kCheckEncoding, "record identifier '" + id + "' contains characters illegal in a URI");
        }
        if (const auto* ds = header->child("datestamp")) {
            const std::string text = trimmed(ds->text);
            auto parsed = oai::parse_datestamp(text);
            if (!parsed) {
                f.fail(kCheckDatestamp, "record " + id + ": datestamp '" + text + "' is " +
                                            std::string(oai::to_string(parsed.error().kind)) + " at position " +
                                            std::to_string(parsed.error().position) + " (byte offset " +
                                            std::to_string(ds->begin) + ")");
                return;
            }
        }
    }
    if (rec.local == "header") return;
    if (rec.child("about")) f.fail(kCheckAbout, FailureCategory::DataFormat, "record " + id + " carries an <about> container");
    auto parsed = oai::read_record(rec, source, prefix, profile);
    if (!parsed) {
        const auto& e = parsed.error();
        f.fail(kCheckSchema, client::classify_failure(e),
               "record " + id + ": " + e.message + (e.offset ? " (byte offset " + std::to_string(*e.offset) + ")" : ""));
        return;
    }
    for (const auto& el : parsed->elements)
        if (el.name == "identifier") check_identifier_encoding("record " + id, el.value, f);
}

void xml_failure(const xml::XmlError& e, std::string_view where, Findings& f) {
    const std::string evidence =
        std::string(where) + ": " + e.message + " at byte offset " + std::to_string(e.offset);
    if (e.kind == xml::XmlError::Kind::Reference) f.fail(kCheckEncoding, evidence);
    else if (e.kind == xml::XmlError::Kind::Encoding) f.fail(kCheckUtf8, evidence);
    else f.fail(kCheckSchema, evidence);
}

// Bytes-level gate shared by pages and single records: true when the body is
// UTF-8 and well-formed enough to look inside.
std::optional<xml::XmlElement> open_body(std::string_view body, std::string_view where, bool lenient, Findings& f) {
    if (auto bad = utf8::find_invalid(body)) {
        f.fail(kCheckUtf8, std::string(where) + ": ill-formed UTF-8 at byte offset " + std::to_string(*bad) + " (" +
                               hex_bytes(body, *bad, 4) + ")");
        return std::nullopt;
    }
    auto tree = xml::parse(body, {.strict_namespaces = !lenient});
    if (!tree) {
        xml_failure(tree.error(), where, f);
        return std::nullopt;
    }
    return std::move(tree.value());
}

const xml::XmlElement* verb_element(const xml::XmlElement& root, std::string_view verb) {
    return root.child(verb);
}

CheckResult result_for(std::string_view id, Severity severity, const Findings& f) {
    CheckResult r;
    r.check_id = std::string(id);
    r.severity = severity;
    r.category = default_category(id);
    auto it = f.failed.find(id);
    if (it != f.failed.end()) {
        r.passed = false;
        r.category = it->second.category;
        r.evidence = it->second.evidence;
        if (it->second.count > 1) r.evidence += " (+" + std::to_string(it->second.count - 1) + " more)";
    }
    return r;
}

using HeaderKey = std::pair<std::string, std::string>;

std::vector<HeaderKey> header_keys(const std::vector<oai::RecordHeader>& headers) {
    std::vector<HeaderKey> out;
    for (const auto& h : headers) out.emplace_back(h.identifier, format_datestamp(h.datestamp));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<CheckResult> check_record(std::string_view record_xml, std::string_view format_prefix,
                                      const oai::DcProfile& profile) {
    Findings f;
    if (auto tree = open_body(record_xml, "record", true, f)) {
        if (tree->local != "record") f.fail(kCheckSchema, "expected a <record> element, found <" + tree->qname + ">");
        else analyze_record(*tree, record_xml, format_prefix, profile, f);
    }
    std::vector<CheckResult> out;
    for (const auto& [id, cat] : kErrorChecks) {
        (void)cat;
        auto r = result_for(id, Severity::Error, f);
        if (!r.passed) out.push_back(std::move(r));
    }
    for (auto id : kWarningChecks) {
        auto r = result_for(id, Severity::Warning, f);
        if (!r.passed) out.push_back(std::move(r));
    }
    return out;
}

ValidationReport validate_provider(client::OaiClient& client, const std::string& base_url, const Clock& clock,
                                   const ValidatorOptions& options) {
    ValidationReport report;
    report.provider = base_url;
    Findings f;
    const std::string& prefix = options.format_prefix;
    const auto& profile = client.options().profile;

    // (1) Identify.
    const net::QueryArgs identify_args{{"verb", "Identify"}};
    auto identify_body = client.fetch(base_url, identify_args);
    if (!identify_body && identify_body.error().category == FailureCategory::Transient) {
        report.checks.push_back(CheckResult{std::string(kCheckIdentify), Severity::Error, false,
                                            FailureCategory::Transient,
                                            "provider unreachable: " + identify_body.error().detail});
        report.verdict = Verdict::Fail;
        report.generated_at = clock.now();
        return report;
    }
    client::HarvestTarget target{base_url, prefix, "", oai::Granularity::Second};
    oai::DeletedPolicy policy = oai::DeletedPolicy::No;
    if (!identify_body) {
        f.fail(kCheckIdentify, identify_body.error().category, "Identify: " + identify_body.error().detail);
    } else if (open_body(*identify_body, "Identify response", false, f)) {
        auto info = oai::parse_identify(*identify_body);
        if (!info) {
            f.fail(kCheckIdentify, client::classify_failure(info.error()), "Identify: " + info.error().message);
        } else {
            target.granularity = info->granularity;
            policy = info->deleted_policy;
            if (info->granularity == oai::Granularity::Day)
                f.fail(kCheckGranularity, FailureCategory::DataFormat,
                       "Identify declares day granularity; incremental windows are coarse");
            if (info->description_count == 0)
                f.fail(kCheckIdentifyOptional, FailureCategory::ProtocolViolation, "Identify has no <description>");
        }
    }

    // (2)(3)(4)(7) Sample harvest: pages 1 and 2 plus one seeded random page;
    // pages walked on the way there are checked as well.
    std::vector<Instant> sample_datestamps;
    {
        net::QueryArgs args{{"verb", "ListRecords"}, {"metadataPrefix", prefix}};
        std::optional<std::size_t> random_page;
        std::size_t last_page = 1;
        for (std::size_t page = 0; page <= last_page; ++page) {
            const std::string where = "ListRecords page " + std::to_string(page + 1);
            auto body = client.fetch(base_url, args);
            if (!body) {
                f.fail(page == 0 ? kCheckSchema : kCheckResumptionToken, body.error().category,
                       where + ": " + body.error().detail);
                break;
            }
            auto tree = open_body(*body, where, false, f);
            if (!tree) break;
            const std::size_t before = f.total();
            if (const auto* list = verb_element(*tree, "ListRecords"))
                for (const auto& c : list->children)
                    if (c.local == "record") analyze_record(c, *body, prefix, profile, f);
            auto parsed = oai::parse_list_response(*body, prefix, profile);
            if (!parsed) {
                const auto& e = parsed.error();
                if (page == 0 && e.kind == oai::ResponseError::Kind::ServerError && e.has_code(ProtocolErrorCode::NoRecordsMatch))
                    break;  // empty provider: nothing to sample
                if (page > 0 && e.kind == oai::ResponseError::Kind::ServerError) {
                    f.fail(kCheckResumptionToken, where + ": resumption token rejected: " + e.message);
                } else if (f.total() == before) {
                    f.fail(kCheckSchema, client::classify_failure(e),
                           where + ": " + e.message +
                               (e.offset ? " (byte offset " + std::to_string(*e.offset) + ")" : ""));
                }
                break;
            }
            if (page == 0) {
                for (const auto& r : parsed->records) sample_datestamps.push_back(r.header.datestamp);
                if (parsed->token && parsed->token->complete_list_size && !parsed->records.empty()) {
                    const std::size_t per_page = parsed->records.size();
                    const std::size_t total_pages = (*parsed->token->complete_list_size + per_page - 1) / per_page;
                    if (total_pages > 2) {
                        std::mt19937_64 rng(options.seed);
                        random_page = 2 + rng() % (total_pages - 2);
                        last_page = *random_page;
                    }
                }
            }
            if (!parsed->token || parsed->token->token.empty()) break;
            args = {{"verb", "ListRecords"}, {"resumptionToken", parsed->token->token}};
        }
    }

    // (5) A garbage token must be answered with badResumptionToken.
    {
        const net::QueryArgs args{{"verb", "ListRecords"}, {"resumptionToken", "hk-invalid-token-0000"}};
        auto body = client.fetch(base_url, args);
        if (!body) {
            f.fail(kCheckResumptionToken, body.error().category, "garbage token: " + body.error().detail);
        } else {
            auto parsed = oai::parse_list_response(*body, prefix, profile);
            if (parsed) {
                f.fail(kCheckResumptionToken, "garbage token was accepted and answered with a list");
            } else if (!parsed.error().has_code(ProtocolErrorCode::BadResumptionToken)) {
                std::string got;
                for (const auto& pe : parsed.error().protocol_errors) got += std::string(oai::to_string(pe.code)) + " ";
                f.fail(kCheckResumptionToken,
                       "garbage token answered with " + (got.empty() ? parsed.error().message : got) +
                           "instead of badResumptionToken");
            }
        }
    }

    // (6) Idempotency: one bounded past window, listed twice.
    if (!sample_datestamps.empty()) {
        std::sort(sample_datestamps.begin(), sample_datestamps.end());
        const Instant from = sample_datestamps.front();
        const Instant until = sample_datestamps[sample_datestamps.size() / 2];
        auto first = client.list_identifiers(target, from, until);
        auto second = client.list_identifiers(target, from, until);
        const std::string window = "[" + format_datestamp(from) + ", " + format_datestamp(until) + "]";
        if (first.failure || second.failure) {
            const auto& fl = first.failure ? *first.failure : *second.failure;
            f.fail(kCheckIdempotency, fl.category, "window " + window + " could not be listed: " + fl.detail);
        } else {
            auto a = header_keys(first.headers);
            auto b = header_keys(second.headers);
            if (a != b) {
                std::vector<HeaderKey> diff;
                std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
                f.fail(kCheckIdempotency, "window " + window + " returned " + std::to_string(a.size()) + " then " +
                                              std::to_string(b.size()) + " records; first difference: " +
                                              (diff.empty() ? std::string("ordering") : diff.front().first));
            }
        }
    }

    // (8) A persistent provider must keep deleted records retrievable.
    if (policy == oai::DeletedPolicy::Persistent) {
        auto all = client.list_identifiers(target, std::nullopt, std::nullopt);
        if (all.failure) {
            f.fail(kCheckDeletedPolicy, all.failure->category, "full identifier list failed: " + all.failure->detail);
        } else {
            std::size_t probed = 0;
            for (const auto& h : all.headers) {
                if (!h.deleted) continue;
                if (probed++ == options.deleted_probe_limit) break;
                auto rec = client.get_record(base_url, h.identifier, prefix);
                if (!rec) {
                    f.fail(kCheckDeletedPolicy, "deleted record " + h.identifier + " not retrievable: " + rec.error().detail);
                    continue;
                }
                if (!rec->header.deleted) {
                    f.fail(kCheckDeletedPolicy, "record " + h.identifier + " listed as deleted but GetRecord shows it live");
                    continue;
                }
                auto window = client.list_identifiers(target, h.datestamp, h.datestamp);
                const bool present = !window.failure && std::any_of(window.headers.begin(), window.headers.end(),
                                                                    [&](const auto& x) { return x.identifier == h.identifier && x.deleted; });
                if (!present)
                    f.fail(kCheckDeletedPolicy, "deleted record " + h.identifier + " missing from window starting at " +
                                                    format_datestamp(h.datestamp));
            }
        }
    }

    for (const auto& [id, cat] : kErrorChecks) {
        (void)cat;
        report.checks.push_back(result_for(id, Severity::Error, f));
    }
    for (auto id : kWarningChecks) report.checks.push_back(result_for(id, Severity::Warning, f));
    report.verdict = report.error_count() == 0 ? Verdict::Pass : Verdict::Fail;
    report.generated_at = clock.now();
    return report;
}

std::string report_to_json(const ValidationReport& report, int indent) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : report.checks)
        checks.push_back({{"check_id", c.check_id},
                          {"severity", std::string(to_string(c.severity))},
                          {"passed", c.passed},
                          {"category", std::string(client::to_string(c.category))},
                          {"evidence", c.evidence}});
    nlohmann::json j{{"schema_version", kReportSchemaVersion},
                     {"provider", report.provider},
                     {"verdict", std::string(to_string(report.verdict))},
                     {"generated_at", format_datestamp(report.generated_at)},
                     {"checks", std::move(checks)}};
    return j.dump(indent);
}

ValidationReport report_from_json(std::string_view json_text) {
    const auto j = nlohmann::json::parse(json_text);
    if (j.at("schema_version").get<int>() != kReportSchemaVersion)
        throw std::invalid_argument("unsupported validation report schema_version");
    ValidationReport r;
    r.provider = j.at("provider").get<std::string>();
    r.verdict = j.at("verdict").get<std::string>() == "Pass" ? Verdict::Pass : Verdict::Fail;
    auto at = oai::parse_datestamp(j.at("generated_at").get<std::string>());
    if (!at) throw std::invalid_argument("bad generated_at in validation report");
    r.generated_at = *at;
    for (const auto& c : j.at("checks")) {
        CheckResult cr;
        cr.check_id = c.at("check_id").get<std::string>();
        cr.severity = c.at("severity").get<std::string>() == "Error" ? Severity::Error : Severity::Warning;
        cr.passed = c.at("passed").get<bool>();
        auto cat = client::parse_failure_category(c.at("category").get<std::string>());
        if (!cat) throw std::invalid_argument("bad category in validation report");
        cr.category = *cat;
        cr.evidence = c.at("evidence").get<std::string>();
        r.checks.push_back(std::move(cr));
    }
    return r;
}

}  // namespace harvestkit::validator
