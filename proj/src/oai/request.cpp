#include "harvestkit/oai/request.hpp"

#include <algorithm>
#include <set>

namespace harvestkit::oai {

std::optional<Instant> ParsedRequest::until_inclusive() const {
    if (!until) return std::nullopt;
    if (until->granularity == Granularity::Day) return until->instant + days(1) - Seconds{1};
    return until->instant;
}

namespace {

std::vector<ProtocolError> fail(ProtocolErrorCode code, std::string message) {
    return {ProtocolError{code, std::move(message)}};
}

}  // namespace

Expected<ParsedRequest, std::vector<ProtocolError>> parse_request(const RequestArgs& args, Granularity supported) {
    std::set<std::string> seen;
    for (const auto& [k, v] : args)
        if (!seen.insert(k).second) {
            if (k == "verb") return unexpected(fail(ProtocolErrorCode::BadVerb, "verb argument repeated"));
            return unexpected(fail(ProtocolErrorCode::BadArgument, "argument '" + k + "' repeated"));
        }
    auto get = [&](std::string_view k) -> const std::string* {
        for (const auto& [key, v] : args)
            if (key == k) return &v;
        return nullptr;
    };
    const std::string* verb = get("verb");
    if (!verb) return unexpected(fail(ProtocolErrorCode::BadVerb, "missing verb argument"));

    static const std::vector<std::pair<std::string, std::set<std::string>>> kAllowed{
        {"Identify", {}},
        {"ListMetadataFormats", {"identifier"}},
        {"ListSets", {"resumptionToken"}},
        {"GetRecord", {"identifier", "metadataPrefix"}},
        {"ListIdentifiers", {"from", "until", "set", "metadataPrefix", "resumptionToken"}},
        {"ListRecords", {"from", "until", "set", "metadataPrefix", "resumptionToken"}},
    };
    auto allowed = std::find_if(kAllowed.begin(), kAllowed.end(), [&](const auto& p) { return p.first == *verb; });
    if (allowed == kAllowed.end()) return unexpected(fail(ProtocolErrorCode::BadVerb, "illegal verb '" + *verb + "'"));
    for (const auto& [k, v] : args)
        if (k != "verb" && !allowed->second.contains(k))
            return unexpected(fail(ProtocolErrorCode::BadArgument, "illegal argument '" + k + "' for " + *verb));

    ParsedRequest r;
    r.verb = *verb;
    auto copy = [&](std::string_view k, std::string& out) {
        if (const std::string* v = get(k)) out = *v;
    };
    copy("identifier", r.identifier);
    copy("metadataPrefix", r.metadata_prefix);
    copy("set", r.set);
    copy("resumptionToken", r.resumption_token);

    if (r.verb == "GetRecord" && (!get("identifier") || !get("metadataPrefix")))
        return unexpected(fail(ProtocolErrorCode::BadArgument, "GetRecord requires identifier and metadataPrefix"));
    if (r.verb == "ListIdentifiers" || r.verb == "ListRecords") {
        if (get("resumptionToken")) {
            if (args.size() != 2)
                return unexpected(fail(ProtocolErrorCode::BadArgument, "resumptionToken is an exclusive argument"));
        } else if (!get("metadataPrefix")) {
            return unexpected(fail(ProtocolErrorCode::BadArgument, "missing metadataPrefix"));
        }
        for (const char* k : {"from", "until"}) {
            const std::string* v = get(k);
            if (!v) continue;
            auto d = parse_request_date(*v);
            if (!d) return unexpected(fail(ProtocolErrorCode::BadArgument, std::string("malformed ") + k + " argument"));
            if (d->granularity == Granularity::Second && supported == Granularity::Day)
                return unexpected(fail(ProtocolErrorCode::BadArgument, std::string(k) + " finer than repository granularity"));
            (std::string_view(k) == "from" ? r.from : r.until) = *d;
        }
        if (r.from && r.until) {
            if (r.from->granularity != r.until->granularity)
                return unexpected(fail(ProtocolErrorCode::BadArgument, "from and until differ in granularity"));
            if (r.from->instant > r.until->instant)
                return unexpected(fail(ProtocolErrorCode::BadArgument, "from is later than until"));
        }
    }
    return r;
}

}  // namespace harvestkit::oai
