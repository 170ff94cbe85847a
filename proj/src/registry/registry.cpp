#include "harvestkit/registry/registry.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace harvestkit::registry {

using nlohmann::json;

namespace {

json instant_json(std::optional<Instant> t) { return t ? json(format_datestamp(*t)) : json(nullptr); }

std::optional<Instant> instant_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    auto t = oai::parse_datestamp(j.get<std::string>());
    if (!t) throw std::runtime_error("bad datestamp in registry log: " + j.get<std::string>());
    return *t;
}

json mode_json(const HarvestMode& m) {
    if (m.kind == HarvestMode::Kind::Full) return {{"kind", "full"}};
    return {{"kind", "incremental"}, {"since", instant_json(m.since)}};
}

HarvestMode mode_from(const json& j) {
    if (j.at("kind") == "full") return HarvestMode::full();
    return HarvestMode::incremental(*instant_from(j.at("since")));
}

json elements_json(const std::vector<oai::DcElement>& els) {
    json a = json::array();
    for (const auto& e : els)
        a.push_back({{"name", e.name}, {"qualifier", e.qualifier}, {"scheme", e.scheme}, {"value", e.value},
                     {"language", e.language}});
    return a;
}

std::vector<oai::DcElement> elements_from(const json& a) {
    std::vector<oai::DcElement> out;
    for (const auto& e : a) out.push_back({e.at("name"), e.at("qualifier"), e.at("scheme"), e.at("value"), e.at("language")});
    return out;
}

json config_json(const HarvestConfig& c) {
    return {{"collection_id", c.collection_id}, {"base_url", c.base_url},     {"set_spec", c.set_spec},
            {"format_prefix", c.format_prefix}, {"schedule_seconds", c.schedule.count()}, {"enabled", c.enabled},
            {"native_public", c.native_public}};
}

HarvestConfig config_from(const json& j) {
    HarvestConfig c;
    c.collection_id = j.at("collection_id");
    c.base_url = j.at("base_url");
    c.set_spec = j.at("set_spec");
    c.format_prefix = j.at("format_prefix");
    c.schedule = Seconds{j.at("schedule_seconds").get<long long>()};
    c.enabled = j.at("enabled");
    c.native_public = j.at("native_public");
    return c;
}

json attempt_json(const HarvestAttempt& a) {
    return {{"attempt_id", a.attempt_id},
            {"collection_id", a.collection_id},
            {"started_at", format_datestamp(a.started_at)},
            {"finished_at", format_datestamp(a.finished_at)},
            {"mode", mode_json(a.mode)},
            {"outcome", to_string(a.outcome)},
            {"category", a.category ? json(std::string(client::to_string(*a.category))) : json(nullptr)},
            {"records_seen", a.records_seen},
            {"new_watermark", instant_json(a.new_watermark)},
            {"deleted_policy", a.deleted_policy ? json(std::string(oai::to_string(*a.deleted_policy))) : json(nullptr)},
            {"detail", a.detail}};
}

HarvestAttempt attempt_from(const json& j) {
    HarvestAttempt a;
    a.attempt_id = j.at("attempt_id");
    a.collection_id = j.at("collection_id");
    a.started_at = *instant_from(j.at("started_at"));
    a.finished_at = *instant_from(j.at("finished_at"));
    a.mode = mode_from(j.at("mode"));
    a.outcome = j.at("outcome") == "success" ? Outcome::Success : Outcome::Failure;
    if (!j.at("category").is_null()) a.category = client::parse_failure_category(j.at("category").get<std::string>());
    a.records_seen = j.at("records_seen");
    a.new_watermark = instant_from(j.at("new_watermark"));
    if (!j.at("deleted_policy").is_null())
        a.deleted_policy = oai::parse_deleted_policy(j.at("deleted_policy").get<std::string>());
    a.detail = j.value("detail", "");
    return a;
}

std::size_t attempt_number(std::string_view id) {
    if (id.size() < 2 || id[0] != 'a') return 0;
    std::size_t n = 0;
    for (char c : id.substr(1)) {
        if (c < '0' || c > '9') return 0;
        n = n * 10 + static_cast<std::size_t>(c - '0');
    }
    return n;
}

bool has_title(const std::vector<oai::DcElement>& els) {
    return std::any_of(els.begin(), els.end(), [](const auto& e) { return e.name == "title" && !e.value.empty(); });
}

}  // namespace

std::string_view to_string(Outcome o) { return o == Outcome::Success ? "success" : "failure"; }

std::string_view to_string(RegistrationError::Kind k) {
    switch (k) {
        case RegistrationError::Kind::ValidationRequired: return "ValidationRequired";
        case RegistrationError::Kind::DuplicateBaseUrlSet: return "DuplicateBaseUrlSet";
        case RegistrationError::Kind::MissingTitle: return "MissingTitle";
    }
    return "?";
}

std::string attempt_to_json(const HarvestAttempt& a) { return attempt_json(a).dump(); }
HarvestAttempt attempt_from_json(std::string_view text) { return attempt_from(json::parse(text)); }

CollectionState apply_attempt(CollectionState s, const HarvestAttempt& a) {
    if (a.deleted_policy) s.deleted_policy = *a.deleted_policy;
    s.last_finished = a.finished_at;
    if (a.outcome == Outcome::Failure) {
        ++s.consecutive_failures;
        return s;
    }
    ++s.successes;
    s.consecutive_failures = 0;
    if (a.new_watermark) s.watermark = s.watermark ? std::max(*s.watermark, *a.new_watermark) : *a.new_watermark;
    if (a.mode.kind == HarvestMode::Kind::Full) s.last_full_harvest = a.started_at;
    return s;
}

CollectionState fold_attempts(const std::string& collection_id, const std::vector<HarvestAttempt>& attempts) {
    CollectionState s;
    s.collection_id = collection_id;
    for (const auto& a : attempts)
        if (a.collection_id == collection_id) s = apply_attempt(std::move(s), a);
    return s;
}

HarvestMode decide_mode(const CollectionState& s, Seconds schedule, Instant now, const RegistryPolicy& policy) {
    if (!s.watermark) return HarvestMode::full();
    if (s.consecutive_failures >= policy.resync_threshold) return HarvestMode::full();
    if (s.deleted_policy != oai::DeletedPolicy::Persistent) {
        const auto interval = schedule * static_cast<long long>(policy.resync_every);
        if (!s.last_full_harvest || now - *s.last_full_harvest >= interval) return HarvestMode::full();
    }
    return HarvestMode::incremental(*s.watermark);
}

StatsReport compute_stats(const std::vector<HarvestAttempt>& attempts, std::optional<Instant> from,
                          std::optional<Instant> until) {
    StatsReport r;
    r.from = from;
    r.until = until;
    for (auto c : {FailureCategory::Transient, FailureCategory::ProtocolViolation, FailureCategory::DataFormat})
        r.breakdown[c] = 0;
    std::map<std::string, CollectionStats> per;
    for (const auto& a : attempts) {
        if ((from && a.started_at < *from) || (until && a.started_at >= *until)) continue;
        auto& c = per[a.collection_id];
        c.collection_id = a.collection_id;
        ++r.attempts;
        ++c.attempts;
        if (a.outcome == Outcome::Success) {
            ++r.successes;
            ++c.successes;
        } else {
            ++r.failures;
            ++c.failures;
            ++r.breakdown[a.category.value_or(FailureCategory::Transient)];
        }
    }
    if (r.attempts) r.failure_rate = static_cast<double>(r.failures) / static_cast<double>(r.attempts);
    for (auto& [id, c] : per) r.per_collection.push_back(c);
    return r;
}

std::string stats_to_json(const StatsReport& r, int indent) {
    json breakdown = json::object();
    for (const auto& [c, n] : r.breakdown) breakdown[std::string(client::to_string(c))] = n;
    json per = json::array();
    for (const auto& c : r.per_collection)
        per.push_back({{"collection_id", c.collection_id}, {"attempts", c.attempts}, {"successes", c.successes},
                       {"failures", c.failures}});
    json j{{"schema_version", 1},
           {"from", instant_json(r.from)},
           {"until", instant_json(r.until)},
           {"attempts", r.attempts},
           {"successes", r.successes},
           {"failures", r.failures},
           {"failure_rate", r.failure_rate ? json(*r.failure_rate) : json(nullptr)},
           {"breakdown", breakdown},
           {"per_collection", per}};
    return j.dump(indent);
}

StatsReport stats_from_json(std::string_view text) {
    const json j = json::parse(text);
    if (j.at("schema_version") != 1) throw std::runtime_error("unsupported stats schema_version");
    StatsReport r;
    r.from = instant_from(j.at("from"));
    r.until = instant_from(j.at("until"));
    r.attempts = j.at("attempts");
    r.successes = j.at("successes");
    r.failures = j.at("failures");
    if (!j.at("failure_rate").is_null()) r.failure_rate = j.at("failure_rate").get<double>();
    for (const auto& [k, v] : j.at("breakdown").items()) {
        auto c = client::parse_failure_category(k);
        if (!c) throw std::runtime_error("unknown failure category " + k);
        r.breakdown[*c] = v.get<std::size_t>();
    }
    for (const auto& c : j.at("per_collection"))
        r.per_collection.push_back({c.at("collection_id"), c.at("attempts"), c.at("successes"), c.at("failures")});
    return r;
}

std::string stats_to_text(const StatsReport& r) {
    std::ostringstream out;
    out << "attempts " << r.attempts << ", successes " << r.successes << ", failures " << r.failures;
    if (r.failure_rate) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", *r.failure_rate);
        out << ", failure rate " << buf;
    } else {
        out << ", failure rate n/a";
    }
    out << '\n';
    for (const auto& [c, n] : r.breakdown) out << "  " << client::to_string(c) << ": " << n << '\n';
    for (const auto& c : r.per_collection)
        out << c.collection_id << '\t' << c.attempts << '\t' << c.successes << '\t' << c.failures << '\n';
    return out.str();
}

Registry::Registry(RegistryOptions options) : options_(std::move(options)) {
    if (!options_.data_dir) return;
    std::filesystem::create_directories(*options_.data_dir);
    std::size_t skip = 0;
    if (std::ifstream snap(*options_.data_dir / "registry.snapshot.json"); snap) {
        const json j = json::parse(snap);
        for (const auto& e : j.at("collections")) {
            Entry en;
            en.record.collection_id = e.at("collection_id");
            en.record.description = elements_from(e.at("description"));
            en.record.provider_contacts = e.at("contacts").get<std::vector<std::string>>();
            en.record.active = e.at("active");
            en.config = config_from(e.at("config"));
            if (!e.at("running").is_null()) en.running = e.at("running").get<std::string>();
            en.full_requested = e.value("full_requested", false);
            en.state.collection_id = en.record.collection_id;
            entries_.emplace(en.record.collection_id, std::move(en));
        }
        for (const auto& a : j.at("attempts")) attempts_.push_back(attempt_from(a));
        for (auto& [id, en] : entries_) en.state = fold_attempts(id, attempts_);
        next_attempt_ = j.at("next_attempt");
        skip = j.at("log_lines");
    }
    std::ifstream in(*options_.data_dir / "registry.log");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (++n <= skip) continue;
        apply_event(line);
    }
    log_lines_ = n;
}

void Registry::append(const std::string& line) {
    ++log_lines_;
    if (!options_.data_dir) return;
    std::ofstream out(*options_.data_dir / "registry.log", std::ios::app | std::ios::binary);
    out << line << '\n';
    if (!out) throw std::runtime_error("cannot append to registry log");
}

Registry::Entry& Registry::entry(std::string_view id) {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw UnknownCollection("unknown collection " + std::string(id));
    return it->second;
}

void Registry::apply_event(const std::string& line) {
    const json j = json::parse(line);
    const std::string kind = j.at("event");
    if (kind == "register") {
        Entry en;
        en.record.collection_id = j.at("collection_id");
        en.record.description = elements_from(j.at("description"));
        en.record.provider_contacts = j.at("contacts").get<std::vector<std::string>>();
        en.config = config_from(j.at("config"));
        en.state.collection_id = en.record.collection_id;
        entries_.emplace(en.record.collection_id, std::move(en));
    } else if (kind == "start") {
        const std::string id = j.at("attempt_id");
        entry(j.at("collection_id").get<std::string>()).running = id;
        next_attempt_ = std::max(next_attempt_, attempt_number(id) + 1);
    } else if (kind == "attempt") {
        HarvestAttempt a = attempt_from(j.at("attempt"));
        Entry& en = entry(a.collection_id);
        if (en.running == a.attempt_id) en.running.reset();
        next_attempt_ = std::max(next_attempt_, attempt_number(a.attempt_id) + 1);
        en.state = apply_attempt(std::move(en.state), a);
        if (a.outcome == Outcome::Success && a.mode.kind == HarvestMode::Kind::Full) en.full_requested = false;
        attempts_.push_back(std::move(a));
    } else if (kind == "enable") {
        entry(j.at("collection_id").get<std::string>()).config.enabled = j.at("enabled");
    } else if (kind == "resync") {
        entry(j.at("collection_id").get<std::string>()).full_requested = true;
    } else {
        throw std::runtime_error("unknown registry event " + kind);
    }
}

Expected<std::string, RegistrationError> Registry::register_collection(std::vector<oai::DcElement> description,
                                                                       HarvestConfig config,
                                                                       const validator::ValidationReport& report,
                                                                       Instant now, std::vector<std::string> contacts) {
    using Kind = RegistrationError::Kind;
    if (report.verdict != validator::Verdict::Pass)
        return unexpected(RegistrationError{Kind::ValidationRequired,
                                            "provider " + report.provider + " has not passed validation"});
    if (!has_title(description))
        return unexpected(RegistrationError{Kind::MissingTitle, "collection description needs a title"});
    CollectionRecord record;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, en] : entries_)
            if (en.config.base_url == config.base_url && en.config.set_spec == config.set_spec &&
                en.config.format_prefix == config.format_prefix)
                return unexpected(RegistrationError{Kind::DuplicateBaseUrlSet, "already registered as " + id});
        char buf[16];
        std::snprintf(buf, sizeof buf, "c%04zu", entries_.size() + 1);
        config.collection_id = buf;
        json ev{{"event", "register"},          {"at", format_datestamp(now)},
                {"collection_id", config.collection_id}, {"description", elements_json(description)},
                {"contacts", contacts},         {"config", config_json(config)}};
        const std::string line = ev.dump();
        append(line);
        apply_event(line);
        record = entries_.at(config.collection_id).record;
    }
    if (options_.on_register) options_.on_register(record, config, now);
    return config.collection_id;
}

std::string Registry::begin_attempt(const std::string& collection_id, const HarvestMode& mode, Instant now) {
    std::lock_guard lock(mu_);
    Entry& en = entry(collection_id);
    if (en.running) throw std::logic_error("attempt " + *en.running + " is still running for " + collection_id);
    char buf[16];
    std::snprintf(buf, sizeof buf, "a%06zu", next_attempt_);
    json ev{{"event", "start"}, {"collection_id", collection_id}, {"attempt_id", buf},
            {"mode", mode_json(mode)}, {"at", format_datestamp(now)}};
    const std::string line = ev.dump();
    append(line);
    apply_event(line);
    return buf;
}

CollectionState Registry::record_attempt(HarvestAttempt attempt) {
    if (attempt.outcome == Outcome::Failure && attempt.new_watermark)
        throw std::invalid_argument("a failed attempt cannot carry a watermark");
    if (attempt.outcome == Outcome::Failure && !attempt.category)
        throw std::invalid_argument("a failed attempt needs a failure category");
    std::lock_guard lock(mu_);
    Entry& en = entry(attempt.collection_id);
    if (attempt.attempt_id.empty()) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "a%06zu", next_attempt_);
        attempt.attempt_id = buf;
    }
    const std::string line = json{{"event", "attempt"}, {"attempt", attempt_json(attempt)}}.dump();
    append(line);
    apply_event(line);
    return en.state;
}

void Registry::set_enabled(const std::string& collection_id, bool enabled) {
    std::lock_guard lock(mu_);
    entry(collection_id);
    const std::string line = json{{"event", "enable"}, {"collection_id", collection_id}, {"enabled", enabled}}.dump();
    append(line);
    apply_event(line);
}

HarvestMode Registry::decide_mode(const std::string& collection_id, Instant now) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(collection_id);
    if (it == entries_.end()) throw UnknownCollection("unknown collection " + collection_id);
    if (it->second.full_requested) return HarvestMode::full();
    return registry::decide_mode(it->second.state, it->second.config.schedule, now, options_.policy);
}

void Registry::request_full(const std::string& collection_id) {
    std::lock_guard lock(mu_);
    entry(collection_id);
    const std::string line = json{{"event", "resync"}, {"collection_id", collection_id}}.dump();
    append(line);
    apply_event(line);
}

bool Registry::full_requested(std::string_view collection_id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(collection_id);
    if (it == entries_.end()) throw UnknownCollection("unknown collection " + std::string(collection_id));
    return it->second.full_requested;
}

std::vector<DueCollection> Registry::schedule_due(Instant now) const {
    std::lock_guard lock(mu_);
    std::vector<DueCollection> out;
    for (const auto& [id, en] : entries_) {
        if (!en.config.enabled || !en.record.active || en.running) continue;
        if (en.state.last_finished && now - *en.state.last_finished < en.config.schedule) continue;
        out.push_back({id, en.full_requested
                               ? HarvestMode::full()
                               : registry::decide_mode(en.state, en.config.schedule, now, options_.policy)});
    }
    return out;
}

StatsReport Registry::stats(std::optional<Instant> from, std::optional<Instant> until) const {
    std::lock_guard lock(mu_);
    return compute_stats(attempts_, from, until);
}

std::vector<std::string> Registry::collection_ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, en] : entries_) out.push_back(id);
    return out;
}

std::optional<CollectionRecord> Registry::collection(std::string_view id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.record;
}

std::optional<HarvestConfig> Registry::config(std::string_view id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.config;
}

std::optional<CollectionState> Registry::state(std::string_view id) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.state;
}

std::vector<HarvestAttempt> Registry::attempts(std::string_view collection_id) const {
    std::lock_guard lock(mu_);
    std::vector<HarvestAttempt> out;
    for (const auto& a : attempts_)
        if (collection_id.empty() || a.collection_id == collection_id) out.push_back(a);
    return out;
}

void Registry::checkpoint() const {
    if (!options_.data_dir) return;
    std::lock_guard lock(mu_);
    json cols = json::array();
    for (const auto& [id, en] : entries_)
        cols.push_back({{"collection_id", id},
                        {"description", elements_json(en.record.description)},
                        {"contacts", en.record.provider_contacts},
                        {"active", en.record.active},
                        {"config", config_json(en.config)},
                        {"running", en.running ? json(*en.running) : json(nullptr)},
                        {"full_requested", en.full_requested}});
    json atts = json::array();
    for (const auto& a : attempts_) atts.push_back(attempt_json(a));
    const json j{{"collections", cols}, {"attempts", atts}, {"next_attempt", next_attempt_}, {"log_lines", log_lines_}};
    const auto path = *options_.data_dir / "registry.snapshot.json";
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump();
        if (!out) throw std::runtime_error("cannot write registry snapshot");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace harvestkit::registry
