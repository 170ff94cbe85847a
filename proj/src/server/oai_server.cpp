#include "harvestkit/server/oai_server.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "harvestkit/digest.hpp"
#include "harvestkit/oai/request.hpp"
#include "harvestkit/xml.hpp"

namespace harvestkit::server {

using oai::ProtocolErrorCode;
using repository::ServedEntry;
using repository::ServingSnapshot;

namespace {

struct FormatInfo {
    std::string_view prefix;
    std::string_view schema;
    std::string_view ns;
};

// nsdl_links and the bundles use schemas local to this repository.
constexpr std::array<FormatInfo, 5> kFormats{{
    {"nsdl_dc", oai::kNsdlDcSchema, oai::kNsdlDcNs},
    {"oai_dc", oai::kOaiDcSchema, oai::kOaiDcNs},
    {"nsdl_links", "http://harvestkit.example.org/schemas/nsdl_links.xsd", repository::kLinksNs},
    {"nsdl_search", "http://harvestkit.example.org/schemas/bundle.xsd", repository::kBundleNs},
    {"nsdl_all", "http://harvestkit.example.org/schemas/bundle.xsd", repository::kBundleNs},
}};

bool known_format(std::string_view prefix) {
    return std::any_of(kFormats.begin(), kFormats.end(), [&](const auto& f) { return f.prefix == prefix; });
}

long long secs(Instant t) { return t.time_since_epoch().count(); }

}  // namespace

std::string mint_token(const TokenState& s, std::string_view key) {
    nlohmann::json j{{"s", s.snapshot_id}, {"v", s.verb}, {"p", s.metadata_prefix}, {"set", s.set},
                     {"f", s.from},        {"u", s.until}, {"o", s.position},       {"cap", secs(s.visible_until)},
                     {"exp", secs(s.expires)}};
    const std::string body = base64url_encode(j.dump());
    return body + "." + hmac_sha256_hex(key, body).substr(0, 32);
}

std::optional<TokenState> decode_token(std::string_view token, std::string_view key) {
    const auto dot = token.rfind('.');
    if (dot == std::string_view::npos) return std::nullopt;
    const std::string_view body = token.substr(0, dot);
    if (token.substr(dot + 1) != hmac_sha256_hex(key, body).substr(0, 32)) return std::nullopt;
    auto raw = base64url_decode(body);
    if (!raw) return std::nullopt;
    auto j = nlohmann::json::parse(*raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    try {
        TokenState s;
        s.snapshot_id = j.at("s");
        s.verb = j.at("v");
        s.metadata_prefix = j.at("p");
        s.set = j.at("set");
        s.from = j.at("f");
        s.until = j.at("u");
        s.position = j.at("o");
        s.visible_until = Instant{Seconds{j.at("cap").get<long long>()}};
        s.expires = Instant{Seconds{j.at("exp").get<long long>()}};
        return s;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

OaiServer::OaiServer(ServerConfig config, SnapshotSource snapshots, const Clock& clock)
    : config_(std::move(config)), snapshots_(std::move(snapshots)), clock_(clock) {
    if (config_.page_size == 0) throw std::invalid_argument("page_size must be at least 1");
}

net::Handler OaiServer::handler() const {
    return [this](const net::QueryArgs& args) { return handle(args); };
}

net::HttpResponse OaiServer::handle(const net::QueryArgs& args) const { return handle_at(args, clock_.now()); }

std::optional<TokenState> OaiServer::resolve_token(std::string_view token, Instant now) const {
    auto s = decode_token(token, config_.token_key);
    if (!s || s->expires < now) return std::nullopt;
    auto snap = snapshots_();
    if (!snap || snap->id() != s->snapshot_id) return std::nullopt;
    return s;
}

net::HttpResponse OaiServer::handle_at(const net::QueryArgs& args, Instant now) const {
    const auto snap = snapshots_();
    static const ServingSnapshot kEmpty({}, Instant{});
    const ServingSnapshot& snapshot = snap ? *snap : kEmpty;
    const oai::RequestArgs echo(args.begin(), args.end());

    auto error = [&](ProtocolErrorCode code, std::string message, const oai::RequestArgs& e) {
        net::HttpResponse r;
        r.body = oai::make_error_response(now, config_.base_url, e, {oai::ProtocolError{code, std::move(message)}});
        return r;
    };
    auto respond = [&](std::string_view verb, std::string_view body) {
        net::HttpResponse r;
        r.body = oai::make_response(now, config_.base_url, echo, verb, body);
        return r;
    };
    auto visible = [&](const ServedEntry& e, Instant cap) { return e.served_datestamp <= cap; };

    auto parsed = oai::parse_request(args, oai::Granularity::Second);
    if (!parsed) {
        net::HttpResponse r;
        r.body = oai::make_error_response(now, config_.base_url, {}, parsed.error());
        return r;
    }
    const oai::ParsedRequest& req = *parsed;

    if (req.verb == "Identify") {
        xml::XmlWriter w;
        w.element("repositoryName", config_.repository_name);
        w.element("baseURL", config_.base_url);
        w.element("protocolVersion", "2.0");
        w.element("adminEmail", config_.admin_email);
        Instant earliest = now;
        for (const auto& e : snapshot.entries())
            if (visible(e, now)) {
                earliest = e.served_datestamp;
                break;
            }
        w.element("earliestDatestamp", format_datestamp(earliest));
        w.element("deletedRecord", "persistent");
        w.element("granularity", "YYYY-MM-DDThh:mm:ssZ");
        w.open("description");
        w.open("oai-identifier", {{"xmlns", "http://www.openarchives.org/OAI/2.0/oai-identifier"}});
        w.element("scheme", "oai").element("repositoryIdentifier", config_.repository_identifier);
        w.element("delimiter", ":").element("sampleIdentifier", "oai:" + config_.repository_identifier + ":c0001/0");
        w.close().close();
        return respond(req.verb, w.str());
    }

    if (req.verb == "ListMetadataFormats") {
        if (!req.identifier.empty()) {
            const ServedEntry* e = snapshot.find(req.identifier);
            if (!e || !visible(*e, now)) return error(ProtocolErrorCode::IdDoesNotExist, "unknown identifier", echo);
        }
        xml::XmlWriter w;
        for (const auto& f : kFormats)
            w.open("metadataFormat")
                .element("metadataPrefix", f.prefix)
                .element("schema", f.schema)
                .element("metadataNamespace", f.ns)
                .close();
        return respond(req.verb, w.str());
    }

    if (req.verb == "ListSets") {
        if (!req.resumption_token.empty())
            return error(ProtocolErrorCode::BadResumptionToken, "set lists are never paged", echo);
        std::vector<std::string> sets;
        for (const auto& e : snapshot.entries())
            if (visible(e, now)) sets.push_back(e.set_spec);
        std::sort(sets.begin(), sets.end());
        sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
        // Sets always exist; only a repository with nothing visible has none to list.
        if (sets.empty()) return error(ProtocolErrorCode::NoSetHierarchy, "no collections are visible yet", echo);
        xml::XmlWriter w;
        for (const auto& s : sets) w.open("set").element("setSpec", s).element("setName", "Collection " + s).close();
        return respond(req.verb, w.str());
    }

    if (req.verb == "GetRecord") {
        if (!known_format(req.metadata_prefix))
            return error(ProtocolErrorCode::CannotDisseminateFormat, "unsupported metadataPrefix", echo);
        const ServedEntry* e = snapshot.find(req.identifier);
        if (!e || !visible(*e, now)) return error(ProtocolErrorCode::IdDoesNotExist, "unknown identifier", echo);
        xml::XmlWriter w;
        std::string payload;
        if (!e->deleted) {
            auto it = e->payloads.find(req.metadata_prefix);
            if (it == e->payloads.end())
                return error(ProtocolErrorCode::CannotDisseminateFormat, "format not available for this record", echo);
            payload = it->second;
        }
        oai::write_record(w, {e->repo_identifier, e->served_datestamp, {e->set_spec}, e->deleted}, payload);
        return respond(req.verb, w.str());
    }

    // ListRecords / ListIdentifiers
    TokenState state;
    if (!req.resumption_token.empty()) {
        auto resolved = resolve_token(req.resumption_token, now);
        if (!resolved || resolved->verb != req.verb)
            return error(ProtocolErrorCode::BadResumptionToken, "expired, stale or unknown resumption token", echo);
        state = *resolved;
    } else {
        if (!known_format(req.metadata_prefix))
            return error(ProtocolErrorCode::CannotDisseminateFormat, "unsupported metadataPrefix", echo);
        state.snapshot_id = snapshot.id();
        state.verb = req.verb;
        state.metadata_prefix = req.metadata_prefix;
        state.set = req.set;
        for (const auto& [k, v] : args) {
            if (k == "from") state.from = v;
            if (k == "until") state.until = v;
        }
        state.visible_until = now;
    }
    std::optional<Instant> from, until;
    if (!state.from.empty()) from = oai::parse_request_date(state.from)->instant;
    if (!state.until.empty()) {
        const auto u = *oai::parse_request_date(state.until);
        until = u.granularity == oai::Granularity::Day ? u.instant + days(1) - Seconds{1} : u.instant;
    }
    std::vector<const ServedEntry*> selected;
    for (const auto& e : snapshot.entries()) {
        if (!visible(e, state.visible_until)) continue;
        if (from && e.served_datestamp < *from) continue;
        if (until && e.served_datestamp > *until) continue;
        if (!state.set.empty() && e.set_spec != state.set) continue;
        selected.push_back(&e);
    }
    if (selected.empty()) {
        if (!req.resumption_token.empty())
            return error(ProtocolErrorCode::BadResumptionToken, "token beyond the end of the list", echo);
        return error(ProtocolErrorCode::NoRecordsMatch, "no records match", echo);
    }
    if (state.position >= selected.size())
        return error(ProtocolErrorCode::BadResumptionToken, "token beyond the end of the list", echo);

    const std::size_t end = std::min(selected.size(), state.position + config_.page_size);
    xml::XmlWriter w;
    for (std::size_t i = state.position; i < end; ++i) {
        const ServedEntry& e = *selected[i];
        const oai::RecordHeader h{e.repo_identifier, e.served_datestamp, {e.set_spec}, e.deleted};
        if (req.verb == "ListIdentifiers") {
            oai::write_header(w, h);
            continue;
        }
        std::string payload;
        if (!e.deleted) {
            auto it = e.payloads.find(state.metadata_prefix);
            if (it != e.payloads.end()) payload = it->second;
        }
        oai::write_record(w, h, payload);
    }
    if (end < selected.size() || state.position > 0) {
        oai::ResumptionToken token;
        token.complete_list_size = selected.size();
        token.cursor = state.position;
        if (end < selected.size()) {
            TokenState next = state;
            next.position = end;
            next.expires = now + config_.token_ttl;
            token.token = mint_token(next, config_.token_key);
            token.expiration = next.expires;
        }
        oai::write_token(w, token);
    }
    return respond(req.verb, w.str());
}

}  // namespace harvestkit::server
