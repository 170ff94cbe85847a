#include "harvestkit/client/client.hpp"

#include <algorithm>
#include <thread>
#include <unordered_map>

namespace harvestkit::client {

using oai::ProtocolErrorCode;

std::string_view to_string(FailureCategory c) {
    switch (c) {
        case FailureCategory::Transient: return "Transient";
        case FailureCategory::ProtocolViolation: return "ProtocolViolation";
        case FailureCategory::DataFormat: return "DataFormat";
    }
    return "Transient";
}

std::optional<FailureCategory> parse_failure_category(std::string_view s) {
    for (auto c : {FailureCategory::Transient, FailureCategory::ProtocolViolation, FailureCategory::DataFormat})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

FailureCategory classify_failure(const net::TransportError&) { return FailureCategory::Transient; }

FailureCategory classify_failure(int http_status) {
    if (http_status >= 500 || http_status == 408 || http_status == 429) return FailureCategory::Transient;
    return FailureCategory::ProtocolViolation;
}

FailureCategory classify_failure(const oai::ResponseError& e) {
    switch (e.kind) {
        case oai::ResponseError::Kind::WellFormedness:
        case oai::ResponseError::Kind::Schema: return FailureCategory::DataFormat;
        case oai::ResponseError::Kind::ProtocolMisuse:
        case oai::ResponseError::Kind::ServerError: return FailureCategory::ProtocolViolation;
    }
    return FailureCategory::ProtocolViolation;
}

Failure response_failure(const oai::ResponseError& e, const std::string& url) {
    Failure f{classify_failure(e), e.message, url, e.offset, 200, e.protocol_errors};
    if (e.kind == oai::ResponseError::Kind::ServerError) {
        f.detail = "server error:";
        for (const auto& pe : e.protocol_errors) f.detail += " " + std::string(oai::to_string(pe.code));
        if (!e.message.empty()) f.detail += " (" + e.message + ")";
    }
    return f;
}

void ThreadSleeper::sleep(Seconds d) { std::this_thread::sleep_for(d); }

std::string format_request_date(Instant t, oai::Granularity g) {
    return g == oai::Granularity::Day ? format_day(t) : format_datestamp(t);
}

OaiClient::OaiClient(net::Transport& transport, ClientOptions options)
    : transport_(transport), options_(std::move(options)) {}

Expected<std::string, Failure> OaiClient::fetch(const std::string& base_url, const net::QueryArgs& args) {
    const std::string url = net::build_url(base_url, args);
    Sleeper& sleeper = options_.sleeper ? *options_.sleeper : default_sleeper_;
    for (int attempt = 0;; ++attempt) {
        Failure failure;
        try {
            net::HttpResponse r = transport_.get(url);
            if (r.status == 200) return std::move(r.body);
            failure = Failure{classify_failure(r.status), "HTTP status " + std::to_string(r.status), url, {}, r.status, {}};
        } catch (const net::TransportError& e) {
            failure = Failure{classify_failure(e), e.what(), url, {}, 0, {}};
        }
        if (failure.category != FailureCategory::Transient || attempt >= options_.retry.max_retries)
            return unexpected(std::move(failure));
        sleeper.sleep(options_.retry.base * (1LL << attempt));
    }
}

Expected<ProviderInfo, Failure> OaiClient::identify(const std::string& base_url) {
    auto body = fetch(base_url, {{"verb", "Identify"}});
    if (!body) return unexpected(body.error());
    auto info = oai::parse_identify(*body);
    if (!info) return unexpected(response_failure(info.error(), net::build_url(base_url, {{"verb", "Identify"}})));
    ProviderInfo p;
    p.base_url = base_url;
    p.repository_name = info->repository_name;
    p.deleted_policy = info->deleted_policy;
    p.earliest_datestamp = info->earliest_datestamp;
    p.granularity = info->granularity;
    p.response_date = info->response_date;
    return p;
}

net::QueryArgs OaiClient::window_args(const HarvestTarget& target, std::string_view verb, std::optional<Instant> from,
                                      std::optional<Instant> until) const {
    if (from && until && *from > *until) throw std::invalid_argument("harvest window has from after until");
    net::QueryArgs args{{"verb", std::string(verb)}, {"metadataPrefix", target.format_prefix}};
    if (!target.set.empty()) args.emplace_back("set", target.set);
    if (from) args.emplace_back("from", format_request_date(*from, target.granularity));
    if (until) args.emplace_back("until", format_request_date(*until, target.granularity));
    return args;
}

namespace {

bool only_no_records(const oai::ResponseError& e) {
    return e.kind == oai::ResponseError::Kind::ServerError && e.protocol_errors.size() == 1 &&
           e.has_code(ProtocolErrorCode::NoRecordsMatch);
}

// A chain that never ends or hands back the same token is broken, not slow.
std::optional<Failure> check_token_progress(const std::optional<oai::ResumptionToken>& token,
                                            std::vector<std::string>& seen, std::size_t pages, std::size_t max_pages,
                                            const std::string& url) {
    if (!token || token->token.empty()) return std::nullopt;
    if (std::find(seen.begin(), seen.end(), token->token) != seen.end())
        return Failure{FailureCategory::ProtocolViolation, "resumption token repeated: " + token->token, url, {}, 200, {}};
    if (pages >= max_pages)
        return Failure{FailureCategory::ProtocolViolation, "resumption chain exceeds page limit", url, {}, 200, {}};
    seen.push_back(token->token);
    return std::nullopt;
}

}  // namespace

HarvestResult OaiClient::list_records(const HarvestTarget& target, std::optional<Instant> from,
                                      std::optional<Instant> until,
                                      const std::function<void(const oai::ListRecordsPage&)>& on_page) {
    HarvestResult result;
    net::QueryArgs args = window_args(target, "ListRecords", from, until);
    std::vector<std::string> seen_tokens;
    for (;;) {
        const std::string url = net::build_url(target.base_url, args);
        auto body = fetch(target.base_url, args);
        if (!body) {
            result.failure = body.error();
            break;
        }
        auto page = oai::parse_list_response(*body, target.format_prefix, options_.profile);
        ++result.pages_fetched;
        if (!page) {
            if (result.pages_fetched == 1 && only_no_records(page.error())) {
                // An empty window still tells us how far the provider's clock got.
                result.completed_through = page.error().response_date;
                result.log.push_back("noRecordsMatch: empty window");
                break;
            }
            result.failure = response_failure(page.error(), url);
            break;
        }
        if (on_page) on_page(*page);
        for (auto& r : page->records) result.records.push_back(std::move(r));
        if (auto f = check_token_progress(page->token, seen_tokens, result.pages_fetched, options_.max_pages, url)) {
            result.failure = std::move(f);
            break;
        }
        if (!page->token || page->token->token.empty()) {
            result.completed_through = page->response_date;
            break;
        }
        args = {{"verb", "ListRecords"}, {"resumptionToken", page->token->token}};
    }
    if (result.failure) {
        result.completed_through.reset();
        result.log.push_back("failed after " + std::to_string(result.pages_fetched) + " page(s): " +
                             std::string(to_string(result.failure->category)) + ": " + result.failure->detail);
        return result;
    }

    // Repeats across pages: the last occurrence wins.
    std::unordered_map<std::string, std::size_t> last;
    for (std::size_t i = 0; i < result.records.size(); ++i) last[result.records[i].header.identifier] = i;
    if (last.size() != result.records.size()) {
        std::vector<oai::MetadataRecord> kept;
        kept.reserve(last.size());
        for (std::size_t i = 0; i < result.records.size(); ++i)
            if (last[result.records[i].header.identifier] == i) kept.push_back(std::move(result.records[i]));
        result.duplicates_dropped = result.records.size() - kept.size();
        result.log.push_back("dropped " + std::to_string(result.duplicates_dropped) +
                             " repeated record(s); last occurrence kept");
        result.records = std::move(kept);
    }
    return result;
}

IdentifiersResult OaiClient::list_identifiers(const HarvestTarget& target, std::optional<Instant> from,
                                              std::optional<Instant> until) {
    IdentifiersResult result;
    net::QueryArgs args = window_args(target, "ListIdentifiers", from, until);
    std::vector<std::string> seen_tokens;
    for (;;) {
        const std::string url = net::build_url(target.base_url, args);
        auto body = fetch(target.base_url, args);
        if (!body) {
            result.failure = body.error();
            return result;
        }
        auto page = oai::parse_list_identifiers(*body);
        ++result.pages_fetched;
        if (!page) {
            if (result.pages_fetched == 1 && only_no_records(page.error())) {
                result.completed_through = page.error().response_date;
                return result;
            }
            result.failure = response_failure(page.error(), url);
            return result;
        }
        for (auto& h : page->headers) result.headers.push_back(std::move(h));
        if (auto f = check_token_progress(page->token, seen_tokens, result.pages_fetched, options_.max_pages, url)) {
            result.failure = std::move(f);
            return result;
        }
        if (!page->token || page->token->token.empty()) {
            result.completed_through = page->response_date;
            return result;
        }
        args = {{"verb", "ListIdentifiers"}, {"resumptionToken", page->token->token}};
    }
}

Expected<oai::MetadataRecord, Failure> OaiClient::get_record(const std::string& base_url, const std::string& identifier,
                                                             const std::string& format_prefix) {
    const net::QueryArgs args{{"verb", "GetRecord"}, {"identifier", identifier}, {"metadataPrefix", format_prefix}};
    auto body = fetch(base_url, args);
    if (!body) return unexpected(body.error());
    auto record = oai::parse_get_record(*body, format_prefix, options_.profile);
    if (!record) return unexpected(response_failure(record.error(), net::build_url(base_url, args)));
    return std::move(*record);
}

HarvestResult OaiClient::harvest(const HarvestTarget& target, const HarvestMode& mode) {
    if (mode.kind == HarvestMode::Kind::Incremental && !mode.since)
        throw std::invalid_argument("incremental harvest needs a since instant");
    std::optional<Instant> from;
    if (mode.kind == HarvestMode::Kind::Incremental) from = mode.since;
    HarvestResult result = list_records(target, from, std::nullopt);
    return result;
}

}  // namespace harvestkit::client
