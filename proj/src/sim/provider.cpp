#include "harvestkit/sim/provider.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <random>
#include <set>

#include "harvestkit/digest.hpp"
#include "harvestkit/oai/request.hpp"
#include "harvestkit/xml.hpp"

namespace harvestkit::sim {

using oai::ProtocolErrorCode;

namespace {

constexpr std::array<std::pair<FaultKind, std::string_view>, 9> kFaultNames{{
    {FaultKind::Disconnect, "Disconnect"},
    {FaultKind::Http5xx, "Http5xx"},
    {FaultKind::InvalidUtf8, "InvalidUtf8"},
    {FaultKind::BrokenToken, "BrokenToken"},
    {FaultKind::WrongDatestamp, "WrongDatestamp"},
    {FaultKind::SchemaInvalidRecord, "SchemaInvalidRecord"},
    {FaultKind::NonIdempotentWindow, "NonIdempotentWindow"},
    {FaultKind::ForgottenDeletes, "ForgottenDeletes"},
    {FaultKind::SplashPageUrls, "SplashPageUrls"},
}};

// Stand-in value replaced after serialization so a fault can emit bytes the
// serializer would never produce.
constexpr std::string_view kInjectMarker = "@@harvestkit-inject@@";

}  // namespace

std::string_view to_string(FaultKind k) {
    for (const auto& [kind, name] : kFaultNames)
        if (kind == k) return name;
    return "Disconnect";
}

std::optional<FaultKind> parse_fault_kind(std::string_view s) {
    for (const auto& [kind, name] : kFaultNames)
        if (name == s) return kind;
    return std::nullopt;
}

void SimScenario::validate() const {
    if (page_size == 0) throw std::invalid_argument("page_size must be at least 1");
    std::map<std::string, Instant> last;
    for (const auto& e : timeline) {
        if (e.identifier.empty()) throw std::invalid_argument("timeline event without identifier");
        auto it = last.find(e.identifier);
        if (it != last.end() && e.at <= it->second)
            throw std::invalid_argument("timeline for " + e.identifier + " is not strictly ordered");
        last[e.identifier] = e.at;
    }
}

ProviderSimulator::ProviderSimulator(SimScenario scenario) : scenario_(std::move(scenario)) {
    scenario_.validate();
    std::stable_sort(scenario_.timeline.begin(), scenario_.timeline.end(),
                     [](const SimEvent& a, const SimEvent& b) { return a.at < b.at; });
    fired_.assign(scenario_.faults.size(), 0);
    now_ = scenario_.start;
    advance(scenario_.start);
}

void ProviderSimulator::advance(Instant to) {
    std::lock_guard lock(mutex_);
    if (to < now_) throw TimeRegression("simulator time cannot move backwards");
    now_ = to;
    while (next_event_ < scenario_.timeline.size() && scenario_.timeline[next_event_].at <= to) {
        const SimEvent& e = scenario_.timeline[next_event_++];
        TruthRecord& r = state_[e.identifier];
        r.identifier = e.identifier;
        r.datestamp = e.at;
        if (e.op == SimEvent::Op::Delete) {
            r.deleted = true;
        } else {
            r.deleted = false;
            r.elements = e.elements;
            r.sets = e.sets;
        }
    }
}

Instant ProviderSimulator::now() const {
    std::lock_guard lock(mutex_);
    return now_;
}

std::map<std::string, TruthRecord> ProviderSimulator::truth() const {
    std::lock_guard lock(mutex_);
    return state_;
}

std::map<std::string, TruthRecord> ProviderSimulator::live() const {
    std::lock_guard lock(mutex_);
    std::map<std::string, TruthRecord> out;
    for (const auto& [id, r] : state_)
        if (!r.deleted) out.emplace(id, r);
    return out;
}

std::vector<TruthRecord> ProviderSimulator::window(std::optional<Instant> from, std::optional<Instant> until) const {
    std::lock_guard lock(mutex_);
    std::vector<TruthRecord> out;
    for (const auto& [id, r] : state_) {
        if (from && r.datestamp < *from) continue;
        if (until && r.datestamp > *until) continue;
        out.push_back(r);
    }
    return out;
}

std::size_t ProviderSimulator::request_count() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::size_t ProviderSimulator::fault_fire_count(std::size_t fault_index) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(fired_.at(fault_index));
}

net::Handler ProviderSimulator::handler() {
    return [this](const net::QueryArgs& args) { return handle(args); };
}

net::HttpResponse ProviderSimulator::handle(const net::QueryArgs& args) {
    std::lock_guard lock(mutex_);
    ++requests_;
    return dispatch(args);
}

bool ProviderSimulator::has_fault(FaultKind k) const {
    return std::any_of(scenario_.faults.begin(), scenario_.faults.end(), [k](const auto& f) { return f.kind == k; });
}

const FaultSpec* ProviderSimulator::fire(const std::string& verb, std::size_t page, bool has_token, FaultKind only) {
    for (std::size_t i = 0; i < scenario_.faults.size(); ++i) {
        const FaultSpec& f = scenario_.faults[i];
        if (f.kind != only) continue;
        if (f.trigger.verb && *f.trigger.verb != verb) continue;
        if (f.trigger.page && *f.trigger.page != page) continue;
        if (f.kind == FaultKind::BrokenToken && !has_token) continue;
        if (f.trigger.times && fired_[i] >= *f.trigger.times) continue;
        ++fired_[i];
        return &f;
    }
    return nullptr;
}

net::HttpResponse ProviderSimulator::respond(const oai::RequestArgs& echo, std::string_view verb,
                                             std::string_view body) const {
    net::HttpResponse r;
    r.body = oai::make_response(now_, scenario_.base_url, echo, verb, body);
    return r;
}

net::HttpResponse ProviderSimulator::respond_error(const oai::RequestArgs& echo, ProtocolErrorCode code,
                                                   std::string message) const {
    net::HttpResponse r;
    r.body = oai::make_error_response(now_, scenario_.base_url, echo, {oai::ProtocolError{code, std::move(message)}});
    return r;
}

std::string ProviderSimulator::payload_for(const TruthRecord& r, std::string_view prefix, const FaultSpec* utf8,
                                           const FaultSpec* schema) const {
    std::vector<oai::DcElement> elements = r.elements;
    if (has_fault(FaultKind::SplashPageUrls)) {
        const auto& splash = std::find_if(scenario_.faults.begin(), scenario_.faults.end(), [](const auto& f) {
                                 return f.kind == FaultKind::SplashPageUrls;
                             })->splash_url;
        for (auto& e : elements)
            if (e.name == "identifier" && (e.value.starts_with("http://") || e.value.starts_with("ftp://")))
                e.value = splash;
    }
    if ((utf8 || schema) && elements.empty()) elements.push_back({"title", "", "", "", ""});
    if (utf8 || schema) elements.front().value = std::string(kInjectMarker);
    std::string payload = oai::serialize_dc_payload(prefix, elements);
    if (utf8 || schema) {
        std::string replacement;
        if (utf8) replacement = "Broken " + utf8->bytes + " title";
        else replacement = "<dc:title>nested</dc:title>";
        payload.replace(payload.find(kInjectMarker), kInjectMarker.size(), replacement);
    }
    return payload;
}

std::vector<const TruthRecord*> ProviderSimulator::select(const std::optional<oai::RequestDate>& from,
                                                          const std::optional<oai::RequestDate>& until,
                                                          const std::string& set) {
    const bool forgetful = has_fault(FaultKind::ForgottenDeletes);
    std::optional<Instant> upper;
    if (until) upper = until->granularity == oai::Granularity::Day ? until->instant + days(1) - Seconds{1} : until->instant;
    std::vector<const TruthRecord*> out;
    for (const auto& [id, r] : state_) {
        if (r.deleted) {
            if (scenario_.deleted_policy == oai::DeletedPolicy::No) continue;
            // Claims persistence but only remembers deletions in full listings.
            if (forgetful && from) continue;
        }
        if (from && r.datestamp < from->instant) continue;
        if (upper && r.datestamp > *upper) continue;
        if (!set.empty()) {
            const bool member = std::any_of(r.sets.begin(), r.sets.end(), [&](const std::string& s) {
                return s == set || (s.size() > set.size() && s.starts_with(set) && s[set.size()] == ':');
            });
            if (!member) continue;
        }
        out.push_back(&r);
    }
    std::sort(out.begin(), out.end(), [](const TruthRecord* a, const TruthRecord* b) {
        return std::tie(a->datestamp, a->identifier) < std::tie(b->datestamp, b->identifier);
    });
    return out;
}

std::string ProviderSimulator::encode_cursor(const ListCursor& c) const {
    nlohmann::json j{{"v", c.verb}, {"p", c.prefix}, {"s", c.set}, {"f", c.from}, {"u", c.until}, {"o", c.offset}};
    return base64url_encode(j.dump());
}

std::optional<ProviderSimulator::ListCursor> ProviderSimulator::decode_cursor(std::string_view token) const {
    auto raw = base64url_decode(token);
    if (!raw) return std::nullopt;
    auto j = nlohmann::json::parse(*raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    try {
        ListCursor c;
        c.verb = j.at("v").get<std::string>();
        c.prefix = j.at("p").get<std::string>();
        c.set = j.at("s").get<std::string>();
        c.from = j.at("f").get<std::string>();
        c.until = j.at("u").get<std::string>();
        c.offset = j.at("o").get<std::size_t>();
        return c;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

net::HttpResponse ProviderSimulator::list(const net::QueryArgs& args, const std::string& verb, ListCursor cursor,
                                          bool resumed) {
    const std::size_t page = cursor.offset / scenario_.page_size;
    if (const FaultSpec* f = fire(verb, page, resumed, FaultKind::Disconnect)) {
        (void)f;
        net::HttpResponse r;
        r.disconnect = true;
        return r;
    }
    if (const FaultSpec* f = fire(verb, page, resumed, FaultKind::Http5xx)) {
        net::HttpResponse r;
        r.status = f->http_status;
        r.content_type = "text/plain";
        r.body = "Service Temporarily Unavailable";
        return r;
    }
    oai::RequestArgs echo(args.begin(), args.end());
    echo.erase(std::remove_if(echo.begin(), echo.end(), [](const auto& kv) { return kv.first == "verb"; }), echo.end());
    echo.insert(echo.begin(), {"verb", verb});
    if (resumed && fire(verb, page, resumed, FaultKind::BrokenToken))
        return respond_error({}, ProtocolErrorCode::BadArgument, "bad argument");

    std::optional<oai::RequestDate> from, until;
    if (!cursor.from.empty()) from = *oai::parse_request_date(cursor.from);
    if (!cursor.until.empty()) until = *oai::parse_request_date(cursor.until);
    auto selected = select(from, until, cursor.set);

    if (!cursor.from.empty() && !cursor.until.empty() && has_fault(FaultKind::NonIdempotentWindow) && !resumed) {
        const std::string key = verb + "|" + cursor.from + "|" + cursor.until + "|" + cursor.set;
        if (window_requests_[key]++ % 2 == 1 && !selected.empty()) selected.erase(selected.begin());
    }
    if (selected.empty()) {
        if (resumed) return respond_error(echo, ProtocolErrorCode::BadResumptionToken, "list changed since token was issued");
        return respond_error(echo, ProtocolErrorCode::NoRecordsMatch, "no records match");
    }
    if (cursor.offset >= selected.size())
        return respond_error(echo, ProtocolErrorCode::BadResumptionToken, "token beyond the end of the list");

    const FaultSpec* utf8 = fire(verb, page, resumed, FaultKind::InvalidUtf8);
    const FaultSpec* schema = fire(verb, page, resumed, FaultKind::SchemaInvalidRecord);
    const FaultSpec* wrong_date = fire(verb, page, resumed, FaultKind::WrongDatestamp);

    const std::size_t end = std::min(selected.size(), cursor.offset + scenario_.page_size);
    xml::XmlWriter w;
    for (std::size_t i = cursor.offset; i < end; ++i) {
        const TruthRecord& r = *selected[i];
        oai::RecordHeader h{r.identifier, r.datestamp, r.sets, r.deleted};
        const std::size_t index_on_page = i - cursor.offset;
        if (wrong_date) {
            // Day-first date instead of the protocol datestamp.
            const std::string day = format_day(r.datestamp);
            xml::XmlWriter hw;
            if (r.deleted) hw.open("header", {{"status", "deleted"}});
            else hw.open("header");
            hw.element("identifier", r.identifier);
            hw.element("datestamp", day.substr(8, 2) + "-" + day.substr(5, 2) + "-" + day.substr(0, 4));
            for (const auto& s : r.sets) hw.element("setSpec", s);
            hw.close();
            if (verb == "ListIdentifiers") {
                w.raw(hw.str());
            } else {
                w.open("record").raw(hw.str());
                if (!r.deleted) w.open("metadata").raw(payload_for(r, cursor.prefix, nullptr, nullptr)).close();
                w.close();
            }
            continue;
        }
        if (verb == "ListIdentifiers") {
            oai::write_header(w, h);
        } else {
            const bool corrupt = index_on_page == (utf8 ? utf8->record_index : schema ? schema->record_index : 0);
            const std::string payload =
                r.deleted ? std::string{}
                          : payload_for(r, cursor.prefix, corrupt ? utf8 : nullptr, corrupt ? schema : nullptr);
            oai::write_record(w, h, payload);
        }
    }
    oai::ResumptionToken token;
    token.complete_list_size = selected.size();
    token.cursor = cursor.offset;
    const bool paged = end < selected.size() || cursor.offset > 0;
    if (end < selected.size()) {
        ListCursor next = cursor;
        next.offset = end;
        token.token = encode_cursor(next);
    }
    if (paged) oai::write_token(w, token);
    return respond(echo, verb, w.str());
}

net::HttpResponse ProviderSimulator::dispatch(const net::QueryArgs& args) {
    auto parsed = oai::parse_request(args, scenario_.granularity);
    if (!parsed) {
        const auto& errors = parsed.error();
        // A provider with BrokenToken also mishandles garbage tokens.
        if (errors.front().code == ProtocolErrorCode::BadResumptionToken) return respond_error({}, errors.front().code, "");
        net::HttpResponse r;
        r.body = oai::make_error_response(now_, scenario_.base_url, {}, errors);
        return r;
    }
    const oai::ParsedRequest& req = *parsed;
    oai::RequestArgs echo(args.begin(), args.end());

    if (req.verb == "Identify") {
        if (const FaultSpec* f = fire(req.verb, 0, false, FaultKind::Http5xx)) {
            net::HttpResponse r;
            r.status = f->http_status;
            r.body = "Service Temporarily Unavailable";
            return r;
        }
        if (fire(req.verb, 0, false, FaultKind::Disconnect)) {
            net::HttpResponse r;
            r.disconnect = true;
            return r;
        }
        xml::XmlWriter w;
        w.element("repositoryName", scenario_.repository_name);
        w.element("baseURL", scenario_.base_url);
        w.element("protocolVersion", "2.0");
        w.element("adminEmail", scenario_.admin_email);
        const bool day = scenario_.granularity == oai::Granularity::Day;
        w.element("earliestDatestamp", day ? format_day(scenario_.start) : format_datestamp(scenario_.start));
        w.element("deletedRecord", std::string(oai::to_string(scenario_.deleted_policy)));
        w.element("granularity", day ? "YYYY-MM-DD" : "YYYY-MM-DDThh:mm:ssZ");
        w.open("description");
        w.open("oai-identifier", {{"xmlns", "http://www.openarchives.org/OAI/2.0/oai-identifier"}});
        w.element("scheme", "oai").element("repositoryIdentifier", "sim.example.org").element("delimiter", ":");
        w.element("sampleIdentifier", "oai:sim.example.org:1");
        w.close().close();
        return respond(echo, req.verb, w.str());
    }
    if (req.verb == "ListMetadataFormats") {
        if (!req.identifier.empty()) {
            auto it = state_.find(req.identifier);
            if (it == state_.end()) return respond_error(echo, ProtocolErrorCode::IdDoesNotExist, "unknown identifier");
        }
        xml::XmlWriter w;
        w.open("metadataFormat")
            .element("metadataPrefix", "oai_dc")
            .element("schema", std::string(oai::kOaiDcSchema))
            .element("metadataNamespace", std::string(oai::kOaiDcNs))
            .close();
        w.open("metadataFormat")
            .element("metadataPrefix", "nsdl_dc")
            .element("schema", std::string(oai::kNsdlDcSchema))
            .element("metadataNamespace", std::string(oai::kNsdlDcNs))
            .close();
        return respond(echo, req.verb, w.str());
    }
    if (req.verb == "ListSets") {
        if (!req.resumption_token.empty())
            return respond_error(echo, ProtocolErrorCode::BadResumptionToken, "sets are never paged");
        std::set<std::string> sets;
        for (const auto& [id, r] : state_) sets.insert(r.sets.begin(), r.sets.end());
        if (sets.empty()) return respond_error(echo, ProtocolErrorCode::NoSetHierarchy, "no sets");
        xml::XmlWriter w;
        for (const auto& s : sets) w.open("set").element("setSpec", s).element("setName", s).close();
        return respond(echo, req.verb, w.str());
    }
    if (req.verb == "GetRecord") {
        if (req.metadata_prefix != "oai_dc" && req.metadata_prefix != "nsdl_dc")
            return respond_error(echo, ProtocolErrorCode::CannotDisseminateFormat, "unsupported format");
        auto it = state_.find(req.identifier);
        const bool forgotten = it != state_.end() && it->second.deleted &&
                               (scenario_.deleted_policy == oai::DeletedPolicy::No || has_fault(FaultKind::ForgottenDeletes));
        if (it == state_.end() || forgotten)
            return respond_error(echo, ProtocolErrorCode::IdDoesNotExist, "unknown identifier");
        const TruthRecord& r = it->second;
        xml::XmlWriter w;
        oai::write_record(w, {r.identifier, r.datestamp, r.sets, r.deleted},
                          r.deleted ? std::string{} : payload_for(r, req.metadata_prefix, nullptr, nullptr));
        return respond(echo, req.verb, w.str());
    }

    // ListRecords / ListIdentifiers
    ListCursor cursor;
    bool resumed = false;
    if (!req.resumption_token.empty()) {
        auto decoded = decode_cursor(req.resumption_token);
        if (!decoded || decoded->verb != req.verb) {
            if (has_fault(FaultKind::BrokenToken))
                return respond_error({}, ProtocolErrorCode::BadArgument, "bad argument");
            return respond_error(echo, ProtocolErrorCode::BadResumptionToken, "unknown resumption token");
        }
        cursor = *decoded;
        resumed = true;
    } else {
        if (req.metadata_prefix != "oai_dc" && req.metadata_prefix != "nsdl_dc")
            return respond_error(echo, ProtocolErrorCode::CannotDisseminateFormat, "unsupported format");
        cursor.verb = req.verb;
        cursor.prefix = req.metadata_prefix;
        cursor.set = req.set;
        for (const auto& [k, v] : args) {
            if (k == "from") cursor.from = v;
            if (k == "until") cursor.until = v;
        }
        if (!req.set.empty()) {
            std::set<std::string> sets;
            for (const auto& [id, r] : state_) sets.insert(r.sets.begin(), r.sets.end());
            if (sets.empty()) return respond_error(echo, ProtocolErrorCode::NoSetHierarchy, "no sets");
        }
    }
    return list(args, req.verb, cursor, resumed);
}

std::vector<SimEvent> synthetic_records(std::size_t count, Instant start, Seconds step, std::string_view id_prefix,
                                        std::uint64_t seed) {
    static constexpr std::array<std::string_view, 12> kTopics{
        "plate tectonics", "photosynthesis", "algebra",      "thermodynamics", "genetics",   "astronomy",
        "oceanography",    "statistics",     "electricity",  "ecology",        "chemistry",  "geometry"};
    static constexpr std::array<std::string_view, 6> kForms{"Introduction to", "Lesson on", "Interactive guide to",
                                                            "Lab activity:", "Visualizing", "Primer on"};
    static constexpr std::array<std::string_view, 4> kTypes{"Text", "interactive resource", "Image", "text"};
    static constexpr std::array<std::string_view, 3> kLangs{"en", "English", "eng"};
    std::mt19937_64 rng(seed);
    std::vector<SimEvent> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto topic = kTopics[rng() % kTopics.size()];
        const auto form = kForms[rng() % kForms.size()];
        SimEvent e;
        e.at = start + step * static_cast<long long>(i);
        e.identifier = std::string(id_prefix) + std::to_string(i + 1);
        const std::string n = std::to_string(i + 1);
        e.elements = {
            {"title", "", "", std::string(form) + " " + std::string(topic) + " " + n, ""},
            {"creator", "", "", "Author " + std::to_string(rng() % 50), ""},
            {"subject", "", "", std::string(topic), ""},
            {"description", "", "", "Educational resource number " + n + " covering " + std::string(topic) + ".", ""},
            {"type", "", "", std::string(kTypes[rng() % kTypes.size()]), ""},
            {"language", "", "", std::string(kLangs[rng() % kLangs.size()]), ""},
            {"identifier", "", "", "http://resources.example.org/item/" + n, ""},
        };
        e.sets = {"science"};
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

using nlohmann::json;

Instant instant_from(const json& j) {
    auto t = oai::parse_datestamp(j.get<std::string>());
    if (!t) throw std::invalid_argument("bad instant in scenario: " + j.get<std::string>());
    return *t;
}

std::vector<oai::DcElement> elements_from(const json& j) {
    std::vector<oai::DcElement> out;
    for (const auto& e : j)
        out.push_back({e.at("name").get<std::string>(), e.value("qualifier", ""), e.value("scheme", ""),
                       e.at("value").get<std::string>(), e.value("language", "")});
    return out;
}

json elements_to(const std::vector<oai::DcElement>& elements) {
    json out = json::array();
    for (const auto& e : elements) {
        json j{{"name", e.name}, {"value", e.value}};
        if (!e.qualifier.empty()) j["qualifier"] = e.qualifier;
        if (!e.scheme.empty()) j["scheme"] = e.scheme;
        if (!e.language.empty()) j["language"] = e.language;
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace

SimScenario load_scenario(std::string_view json_text) {
    const json j = json::parse(json_text);
    if (j.value("schema_version", 0) != 1) throw std::invalid_argument("unsupported scenario schema_version");
    SimScenario s;
    s.repository_name = j.value("repository_name", s.repository_name);
    s.base_url = j.value("base_url", s.base_url);
    s.admin_email = j.value("admin_email", s.admin_email);
    if (j.contains("deleted_policy")) {
        auto p = oai::parse_deleted_policy(j.at("deleted_policy").get<std::string>());
        if (!p) throw std::invalid_argument("bad deleted_policy");
        s.deleted_policy = *p;
    }
    s.granularity = j.value("granularity", std::string("second")) == "day" ? oai::Granularity::Day : oai::Granularity::Second;
    s.page_size = j.value("page_size", s.page_size);
    if (j.contains("start")) s.start = instant_from(j.at("start"));
    if (j.contains("generate")) {
        const auto& g = j.at("generate");
        auto events = synthetic_records(g.at("count").get<std::size_t>(),
                                        g.contains("start") ? instant_from(g.at("start")) : s.start,
                                        Seconds{g.value("step_seconds", 60)},
                                        g.value("id_prefix", std::string("oai:sim.example.org:")),
                                        g.value("seed", std::uint64_t{1}));
        s.timeline.insert(s.timeline.end(), events.begin(), events.end());
    }
    if (j.contains("timeline")) {
        for (const auto& e : j.at("timeline")) {
            SimEvent ev;
            ev.at = instant_from(e.at("at"));
            ev.identifier = e.at("identifier").get<std::string>();
            const std::string op = e.value("op", std::string("upsert"));
            if (op == "delete") {
                ev.op = SimEvent::Op::Delete;
            } else if (op == "upsert") {
                ev.elements = elements_from(e.value("elements", json::array()));
                ev.sets = e.value("sets", std::vector<std::string>{});
            } else {
                throw std::invalid_argument("unknown timeline op '" + op + "'");
            }
            s.timeline.push_back(std::move(ev));
        }
    }
    if (j.contains("faults")) {
        for (const auto& f : j.at("faults")) {
            auto kind = parse_fault_kind(f.at("kind").get<std::string>());
            if (!kind) throw std::invalid_argument("unknown fault kind " + f.at("kind").get<std::string>());
            FaultSpec spec{*kind, {}};
            if (f.contains("verb")) spec.trigger.verb = f.at("verb").get<std::string>();
            if (f.contains("page")) spec.trigger.page = f.at("page").get<std::size_t>();
            if (f.contains("times")) spec.trigger.times = f.at("times").get<int>();
            if (f.contains("bytes_hex")) {
                const std::string hex = f.at("bytes_hex").get<std::string>();
                spec.bytes.clear();
                for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
                    spec.bytes += static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16));
            }
            spec.record_index = f.value("record_index", spec.record_index);
            spec.http_status = f.value("status", spec.http_status);
            spec.splash_url = f.value("splash_url", spec.splash_url);
            s.faults.push_back(std::move(spec));
        }
    }
    s.validate();
    return s;
}

std::string dump_scenario(const SimScenario& s) {
    json j{{"schema_version", 1},
           {"repository_name", s.repository_name},
           {"base_url", s.base_url},
           {"admin_email", s.admin_email},
           {"deleted_policy", std::string(oai::to_string(s.deleted_policy))},
           {"granularity", s.granularity == oai::Granularity::Day ? "day" : "second"},
           {"page_size", s.page_size},
           {"start", format_datestamp(s.start)}};
    json timeline = json::array();
    for (const auto& e : s.timeline) {
        json ev{{"at", format_datestamp(e.at)}, {"identifier", e.identifier}};
        if (e.op == SimEvent::Op::Delete) {
            ev["op"] = "delete";
        } else {
            ev["op"] = "upsert";
            ev["elements"] = elements_to(e.elements);
            ev["sets"] = e.sets;
        }
        timeline.push_back(std::move(ev));
    }
    j["timeline"] = std::move(timeline);
    json faults = json::array();
    for (const auto& f : s.faults) {
        json fj{{"kind", std::string(to_string(f.kind))}};
        if (f.trigger.verb) fj["verb"] = *f.trigger.verb;
        if (f.trigger.page) fj["page"] = *f.trigger.page;
        if (f.trigger.times) fj["times"] = *f.trigger.times;
        static constexpr char kHex[] = "0123456789abcdef";
        std::string hex;
        for (unsigned char c : f.bytes) hex += {kHex[c >> 4], kHex[c & 0xF]};
        fj["bytes_hex"] = hex;
        fj["record_index"] = f.record_index;
        fj["status"] = f.http_status;
        fj["splash_url"] = f.splash_url;
        faults.push_back(std::move(fj));
    }
    j["faults"] = std::move(faults);
    return j.dump(2);
}

}  // namespace harvestkit::sim
