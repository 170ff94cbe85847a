#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "harvestkit/client/client.hpp"
#include "harvestkit/index/resource_index.hpp"
#include "harvestkit/ingest/dbinsert.hpp"
#include "harvestkit/pipeline/harvest.hpp"
#include "harvestkit/registry/registry.hpp"
#include "harvestkit/repository/repository.hpp"
#include "harvestkit/server/oai_server.hpp"
#include "harvestkit/sim/provider.hpp"
#include "harvestkit/validator/validator.hpp"

namespace harvestkit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Operational failure with a message for stderr (exit 1).
struct Failed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Failed("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& p, std::string_view bytes) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
    if (!out) throw Failed("cannot write " + p.string());
}

Instant parse_instant(const std::string& text) {
    auto d = oai::parse_request_date(text);
    if (!d) throw CLI::ValidationError("date", "expected YYYY-MM-DD or YYYY-MM-DDThh:mm:ssZ, got '" + text + "'");
    return d->instant;
}

std::string_view outcome_name(registry::Outcome o) { return registry::to_string(o); }

// Everything a command may touch, opened lazily from the config.
struct Context {
    Config cfg;
    const Environment& env;
    std::ostream& out;
    std::ostream& err;
    bool json_mode = false;
    std::optional<Instant> now_override;
    client::RecordingSleeper sleeper;
    std::unique_ptr<net::Transport> own_transport;
    std::unique_ptr<repository::Repository> repo;
    std::unique_ptr<registry::Registry> registry;

    Context(Config c, const Environment& e, std::ostream& o, std::ostream& er)
        : cfg(std::move(c)), env(e), out(o), err(er) {}

    Instant now() const { return now_override ? *now_override : SystemClock().now(); }

    net::Transport& transport() {
        if (env.transport) return *env.transport;
        if (!own_transport) own_transport = std::make_unique<net::HttpTransport>();
        return *own_transport;
    }

    client::OaiClient client() {
        client::ClientOptions o;
        o.retry = {cfg.max_retries, cfg.retry_base};
        if (env.no_sleep) o.sleeper = &sleeper;
        if (cfg.profile) o.profile = oai::DcProfile::from_json(read_file(*cfg.profile));
        return client::OaiClient(transport(), o);
    }

    std::optional<fs::path> sub(const char* name) const {
        if (!cfg.data_dir) return std::nullopt;
        return *cfg.data_dir / name;
    }

    repository::Repository& repository() {
        if (!repo) {
            repository::RepositoryConfig rc;
            rc.domain = cfg.domain;
            rc.postdate_offset = cfg.postdate_offset;
            rc.data_dir = sub("repository");
            if (rc.data_dir) fs::create_directories(*rc.data_dir);
            if (cfg.profile) rc.profile = oai::DcProfile::from_json(read_file(*cfg.profile));
            repo = std::make_unique<repository::Repository>(rc);
        }
        return *repo;
    }

    registry::Registry& reg() {
        if (!registry) {
            auto& r = repository();
            registry::RegistryOptions o;
            o.data_dir = sub("registry");
            o.on_register = [&r](const registry::CollectionRecord& c, const registry::HarvestConfig& h, Instant t) {
                r.add_collection(c.collection_id, c.description, h.native_public, t);
            };
            registry = std::make_unique<registry::Registry>(o);
        }
        return *registry;
    }

    ingest::TransformConfig transform() const {
        ingest::TransformConfig t;
        if (cfg.stop_phrases) t.load_stop_phrases(cfg.stop_phrases->string());
        return t;
    }

    std::shared_ptr<const repository::ServingSnapshot> snapshot() {
        auto s = repository().current();
        if (!s) throw Failed("nothing published yet; run harvest or ingest first");
        return s;
    }

    void print(const json& j, const std::string& text) {
        if (json_mode) out << j.dump(2) << '\n';
        else out << text;
    }
};

std::string checks_text(const validator::ValidationReport& r) {
    std::ostringstream o;
    o << r.provider << ": " << validator::to_string(r.verdict) << " (" << r.error_count() << " errors)\n";
    for (const auto& c : r.checks)
        if (!c.passed)
            o << "  " << validator::to_string(c.severity) << ' ' << c.check_id << " [" << client::to_string(c.category)
              << "] " << c.evidence << '\n';
    return o.str();
}

// ---- validate ---------------------------------------------------------------

struct ValidateArgs {
    std::string base_url;
    std::string prefix = "oai_dc";
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_validate(Context& ctx, const ValidateArgs& a) {
    auto c = ctx.client();
    ManualClock clock(ctx.now());
    validator::ValidatorOptions o;
    o.format_prefix = a.prefix;
    o.seed = a.seed;
    auto report = validator::validate_provider(c, a.base_url, clock, o);
    if (!a.out.empty()) write_file(a.out, validator::report_to_json(report));
    ctx.print(json::parse(validator::report_to_json(report)), checks_text(report));
    return report.verdict == validator::Verdict::Pass ? kExitOk : kExitFailure;
}

// ---- register ---------------------------------------------------------------

struct RegisterArgs {
    std::string base_url;
    std::string title;
    std::string description;
    std::string set;
    std::string prefix = "oai_dc";
    double schedule_days = 0;
    std::vector<std::string> contacts;
    std::string report;
    bool private_native = false;
};

int cmd_register(Context& ctx, const RegisterArgs& a) {
    validator::ValidationReport report;
    if (!a.report.empty()) {
        report = validator::report_from_json(read_file(a.report));
        if (report.provider != a.base_url)
            throw Failed("report " + a.report + " is for " + report.provider + ", not " + a.base_url);
    } else {
        auto c = ctx.client();
        ManualClock clock(ctx.now());
        validator::ValidatorOptions o;
        o.format_prefix = a.prefix;
        report = validator::validate_provider(c, a.base_url, clock, o);
    }
    registry::HarvestConfig cfg;
    cfg.base_url = a.base_url;
    cfg.set_spec = a.set;
    cfg.format_prefix = a.prefix;
    cfg.schedule = a.schedule_days > 0 ? Seconds{static_cast<long long>(a.schedule_days * 86400)} : ctx.cfg.schedule;
    cfg.native_public = !a.private_native;
    std::vector<oai::DcElement> desc{{"title", "", "", a.title, ""}};
    if (!a.description.empty()) desc.push_back({"description", "", "", a.description, ""});
    desc.push_back({"identifier", "", "URI", a.base_url, ""});
    auto id = ctx.reg().register_collection(desc, cfg, report, ctx.now(), a.contacts);
    if (!id) {
        ctx.print({{"error", registry::to_string(id.error().kind)}, {"message", id.error().message}},
                  std::string(registry::to_string(id.error().kind)) + ": " + id.error().message + "\n" +
                      (report.verdict == validator::Verdict::Pass ? "" : checks_text(report)));
        return kExitFailure;
    }
    ctx.reg().checkpoint();
    ctx.repository().publish(ctx.now());
    ctx.print({{"collection_id", *id}, {"repo_identifier", ctx.repository().collection(*id)->repo_identifier}},
              *id + "\n");
    return kExitOk;
}

// ---- harvest ----------------------------------------------------------------

struct HarvestArgs {
    std::vector<std::string> collections;
    bool all = false;
    bool due = false;
    bool full = false;
    bool no_publish = false;
};

int cmd_harvest(Context& ctx, const HarvestArgs& a) {
    auto& reg = ctx.reg();
    auto& repo = ctx.repository();
    const Instant now = ctx.now();
    std::vector<std::string> ids = a.collections;
    if (a.all)
        for (const auto& id : reg.collection_ids())
            if (reg.config(id)->enabled) ids.push_back(id);
    if (a.full)
        for (const auto& id : ids) reg.request_full(id);

    pipeline::HarvestOptions opts;
    opts.transform = ctx.transform();
    opts.staging_dir = ctx.sub("staging");
    auto c = ctx.client();
    std::vector<pipeline::HarvestRun> runs;
    if (a.due) runs = pipeline::harvest_due(reg, repo, c, now, opts);
    for (const auto& id : ids) {
        if (!reg.config(id)) throw Failed("unknown collection " + id);
        runs.push_back(pipeline::harvest_collection(reg, repo, c, id, now, opts));
    }
    reg.checkpoint();
    std::shared_ptr<const repository::ServingSnapshot> snap;
    if (!a.no_publish && !runs.empty()) snap = repo.publish(now);

    json arr = json::array();
    std::ostringstream text;
    bool failed = false;
    for (const auto& r : runs) {
        arr.push_back(json::parse(pipeline::run_to_json(r)));
        const auto& at = r.attempt;
        text << at.collection_id << ' ' << at.attempt_id << ' '
             << (at.mode.kind == client::HarvestMode::Kind::Full ? "full" : "incremental") << ' '
             << outcome_name(at.outcome);
        if (at.category) text << ' ' << client::to_string(*at.category);
        text << ": " << at.detail << '\n';
        failed |= at.outcome == registry::Outcome::Failure;
    }
    if (runs.empty()) text << "nothing to harvest\n";
    json j{{"runs", arr}};
    if (snap) j["snapshot"] = json::parse(repository::manifest_to_json(snap->manifest()));
    ctx.print(j, text.str());
    return failed ? kExitFailure : kExitOk;
}

// ---- ingest -----------------------------------------------------------------

int cmd_ingest(Context& ctx, const std::vector<std::string>& files, bool no_publish) {
    auto& repo = ctx.repository();
    json arr = json::array();
    std::ostringstream text;
    for (const auto& f : files) {
        repository::InsertResult r;
        try {
            r = repo.insert_xml(read_file(f), ctx.now());
        } catch (const repository::MalformedDocumentError& e) {
            throw Failed(f + ": malformed dbInsert document at byte " + std::to_string(e.offset) + ": " + e.what());
        } catch (const repository::UnknownCollection& e) {
            throw Failed(f + ": " + e.what());
        }
        arr.push_back({{"file", f},
                       {"inserted", r.inserted.size()},
                       {"deleted", r.deleted.size()},
                       {"excluded", r.excluded},
                       {"unknown_deletes", r.unknown_deletes}});
        text << f << ": " << r.inserted.size() << " stored, " << r.deleted.size() << " deleted, " << r.excluded.size()
             << " excluded\n";
    }
    json j{{"files", arr}};
    if (!no_publish) {
        auto snap = repo.publish(ctx.now());
        j["snapshot"] = json::parse(repository::manifest_to_json(snap->manifest()));
        text << "published " << snap->id() << " (" << snap->manifest().record_count << " records)\n";
    }
    ctx.print(j, text.str());
    return kExitOk;
}

// ---- stats ------------------------------------------------------------------

int cmd_stats(Context& ctx, const std::string& since, const std::string& until, const std::string& format) {
    std::optional<Instant> from, to;
    if (!since.empty()) from = parse_instant(since);
    if (!until.empty()) to = parse_instant(until);
    const auto report = ctx.reg().stats(from, to);
    if (ctx.json_mode || format == "json") ctx.out << registry::stats_to_json(report) << '\n';
    else ctx.out << registry::stats_to_text(report);
    return kExitOk;
}

// ---- serve-oai --------------------------------------------------------------

// Follows the repository's manifest so a running server picks up new publishes.
class SnapshotFollower {
public:
    explicit SnapshotFollower(fs::path dir) : dir_(std::move(dir)) {}

    std::shared_ptr<const repository::ServingSnapshot> operator()() {
        std::lock_guard lock(mu_);
        std::error_code ec;
        const auto stamp = fs::last_write_time(dir_ / "manifest.json", ec);
        if (!ec && (!current_ || stamp != stamp_)) {
            try {
                current_ = repository::Repository::load_snapshot(dir_);
                stamp_ = stamp;
            } catch (const std::exception&) {
                // A publish in progress; keep serving the previous snapshot.
            }
        }
        return current_;
    }

private:
    fs::path dir_;
    std::mutex mu_;
    fs::file_time_type stamp_{};
    std::shared_ptr<const repository::ServingSnapshot> current_;
};

server::ServerConfig server_config(const Config& cfg, const std::string& base_url) {
    server::ServerConfig s;
    s.page_size = cfg.page_size;
    s.repository_name = cfg.repository_name;
    s.base_url = base_url;
    s.admin_email = cfg.admin_email;
    s.repository_identifier = cfg.domain;
    s.token_key = cfg.token_key;
    return s;
}

int cmd_serve(Context& ctx, const std::string& host, int port) {
    const auto dir = ctx.sub("repository");
    if (!dir) throw Failed("serve-oai needs a data_dir");
    auto follower = std::make_shared<SnapshotFollower>(*dir);
    if (!(*follower)()) throw Failed("nothing published in " + dir->string());
    SystemClock clock;
    // The advertised base URL is only known once the port is bound.
    std::shared_ptr<server::OaiServer> srv;
    net::HttpServer http([&srv](const net::QueryArgs& q) { return srv->handle(q); }, host, port);
    srv = std::make_shared<server::OaiServer>(server_config(ctx.cfg, http.base_url()),
                                              [follower] { return (*follower)(); }, clock);
    ctx.print({{"base_url", http.base_url()}}, "serving " + http.base_url() + "\n");
    ctx.out.flush();
    http.wait();
    return kExitOk;
}

// ---- index / search / dedup-report -------------------------------------------

enum class IndexMode { Metadata, Resource, Naive };

std::optional<index::ContentHashes> saved_hashes(Context& ctx) {
    auto dir = ctx.sub("index");
    if (!dir || !fs::exists(*dir / "content_hashes.json")) return std::nullopt;
    return index::hashes_from_json(read_file(*dir / "content_hashes.json"));
}

index::ResourceCentricIndex resource_index(Context& ctx) {
    auto hashes = saved_hashes(ctx);
    return index::build_resource_centric(*ctx.snapshot(), hashes ? &*hashes : nullptr);
}

int cmd_index(Context& ctx, IndexMode mode, bool fetch) {
    auto snap = ctx.snapshot();
    json j{{"snapshot_id", snap->id()}};
    std::ostringstream text;
    if (mode == IndexMode::Naive) {
        const auto naive = index::build_naive_identifier(*snap);
        j["mode"] = "naive-identifier";
        j["documents"] = naive.size();
        text << "naive identifier index: " << naive.size() << " documents\n";
        ctx.print(j, text.str());
        return kExitOk;
    }
    if (mode == IndexMode::Metadata) {
        const auto idx = index::build_metadata_centric(*snap);
        std::size_t without_url = 0;
        for (const auto& [id, d] : idx.index.documents())
            if (!d.resource) ++without_url;
        j["mode"] = "metadata-centric";
        j["documents"] = idx.index.size();
        j["documents_without_url"] = without_url;
        text << "metadata-centric index: " << idx.index.size() << " documents (" << without_url << " without URL)\n";
        ctx.print(j, text.str());
        return kExitOk;
    }

    std::optional<index::ContentHashes> hashes = saved_hashes(ctx);
    if (fetch) {
        auto records = index::build_metadata_centric(*snap);
        std::vector<std::string> urls;
        for (const auto& [id, v] : records.records)
            for (const auto& u : v.urls) urls.push_back(u.canonical);
        std::sort(urls.begin(), urls.end());
        urls.erase(std::unique(urls.begin(), urls.end()), urls.end());
        index::HttpFetcher fetcher;
        index::FetchPoolOptions po{ctx.cfg.fetch_concurrency, std::chrono::milliseconds(ctx.cfg.fetch_politeness_ms),
                                   ctx.cfg.fetch_max_bytes};
        auto report = index::fetch_all(urls, fetcher, po);
        hashes = report.hashes;
        j["fetched"] = report.hashes.size();
        j["fetch_failures"] = report.failures.size();
        text << "fetched " << report.hashes.size() << " of " << urls.size() << " URLs\n";
        if (auto dir = ctx.sub("index")) write_file(*dir / "content_hashes.json", index::hashes_to_json(*hashes));
    }
    const auto rc = index::build_resource_centric(*snap, hashes ? &*hashes : nullptr);
    const auto rep = index::dedup_report(rc);
    if (auto dir = ctx.sub("index")) {
        write_file(*dir / "entities.json", index::entities_to_json(rc.entities, 2));
        write_file(*dir / "dedup_report.json", index::dedup_report_to_json(rep));
    }
    j["mode"] = "resource-centric";
    j["documents"] = rc.index.size();
    j["records"] = rep.records;
    j["content_hash_merges"] = rep.content_hash_merges;
    text << "resource-centric index: " << rc.index.size() << " entities over " << rep.records << " records ("
         << rep.content_hash_merges << " merged by content hash)\n";
    ctx.print(j, text.str());
    return kExitOk;
}

std::string title_of(const index::IndexDocument* d) {
    if (!d) return {};
    auto it = d->fields.find("title");
    return it == d->fields.end() ? std::string{} : it->second;
}

int cmd_search(Context& ctx, const std::vector<std::string>& terms, bool resource, std::size_t limit) {
    std::string query;
    for (const auto& t : terms) query += (query.empty() ? "" : " ") + t;
    json arr = json::array();
    std::ostringstream text;
    std::vector<index::Hit> hits;
    if (resource) {
        const auto rc = resource_index(ctx);
        hits = index::search(rc, query);
        for (std::size_t i = 0; i < hits.size() && i < limit; ++i) {
            const auto* e = rc.entity(hits[i].doc_id);
            arr.push_back({{"doc_id", hits[i].doc_id},
                           {"score", hits[i].score},
                           {"records", e->member_records},
                           {"title", title_of(rc.index.find(hits[i].doc_id))}});
            text << hits[i].doc_id << '\t' << hits[i].score << '\t' << e->member_records.size() << " records\t"
                 << title_of(rc.records.index.find(e->member_records.front())) << '\n';
        }
    } else {
        const auto idx = index::build_metadata_centric(*ctx.snapshot());
        hits = index::search(idx, query);
        for (std::size_t i = 0; i < hits.size() && i < limit; ++i) {
            const auto* d = idx.index.find(hits[i].doc_id);
            arr.push_back({{"doc_id", hits[i].doc_id},
                           {"score", hits[i].score},
                           {"title", title_of(d)},
                           {"resource", d->resource ? json(*d->resource) : json(nullptr)}});
            text << hits[i].doc_id << '\t' << hits[i].score << '\t' << title_of(d) << '\n';
        }
    }
    ctx.print({{"query", query}, {"mode", resource ? "resource-centric" : "metadata-centric"}, {"total", hits.size()},
               {"hits", arr}},
              text.str().empty() ? "no hits\n" : text.str());
    return kExitOk;
}

int cmd_dedup_report(Context& ctx) {
    const auto rep = index::dedup_report(resource_index(ctx));
    std::ostringstream t;
    t << "records " << rep.records << "\nidentifier fields " << rep.identifier_fields << "\nfetchable URLs "
      << rep.fetchable_urls << "\nrecords with several URLs " << rep.multi_url_records << "\nrecords without URL "
      << rep.records_without_url << "\nentities " << rep.entities << "\ncontent-hash merges "
      << rep.content_hash_merges << "\nsplash page suspects " << rep.splash_suspects.size() << '\n';
    if (ctx.json_mode) ctx.out << index::dedup_report_to_json(rep) << '\n';
    else ctx.out << t.str();
    return kExitOk;
}

// ---- simulate / pipeline --------------------------------------------------------

Instant scenario_end(const sim::SimScenario& s) {
    Instant end = s.start;
    for (const auto& e : s.timeline) end = std::max(end, e.at);
    return end;
}

int cmd_simulate(Context& ctx, const std::string& file, const std::string& host, int port, const std::string& at) {
    auto scenario = sim::load_scenario(read_file(file));
    sim::ProviderSimulator provider(scenario);
    provider.advance(at.empty() ? scenario_end(scenario) : parse_instant(at));
    net::HttpServer http(provider.handler(), host, port);
    ctx.print({{"base_url", http.base_url()}, {"records", provider.live().size()}},
              "simulating " + scenario.repository_name + " at " + http.base_url() + " (" +
                  std::to_string(provider.live().size()) + " live records)\n");
    ctx.out.flush();
    http.wait();
    return kExitOk;
}

int cmd_pipeline(Context& ctx, const std::string& file, const std::vector<std::string>& query) {
    const auto scenario = sim::load_scenario(read_file(file));
    sim::ProviderSimulator provider(scenario);
    const Instant now = ctx.now_override ? *ctx.now_override : scenario_end(scenario) + hours(1);
    provider.advance(now);
    net::LoopbackTransport loop;
    loop.mount(scenario.base_url, provider.handler());
    Environment env = ctx.env;
    env.transport = &loop;
    env.no_sleep = true;
    Context inner(ctx.cfg, env, ctx.out, ctx.err);
    inner.now_override = now;

    auto c = inner.client();
    ManualClock clock(now);
    const auto report = validator::validate_provider(c, scenario.base_url, clock);
    registry::HarvestConfig hc;
    hc.base_url = scenario.base_url;
    hc.schedule = ctx.cfg.schedule;
    auto id = inner.reg().register_collection({{"title", "", "", scenario.repository_name, ""}}, hc, report, now);
    if (!id) throw Failed(std::string(registry::to_string(id.error().kind)) + ": " + id.error().message + "\n" +
                          checks_text(report));

    pipeline::HarvestOptions opts;
    opts.transform = inner.transform();
    opts.staging_dir = inner.sub("staging");
    const auto run = pipeline::harvest_collection(inner.reg(), inner.repository(), c, *id, now, opts);
    inner.reg().checkpoint();
    if (run.attempt.outcome == registry::Outcome::Failure) {
        ctx.print(json::parse(pipeline::run_to_json(run)),
                  "harvest failed: " + std::string(client::to_string(*run.attempt.category)) + ": " +
                      run.attempt.detail + "\n");
        return kExitFailure;
    }
    const auto snap = inner.repository().publish(now);
    const auto rc = index::build_resource_centric(*snap);

    std::size_t stored = 0;
    for (const auto& r : inner.repository().records())
        if (r.collection_id == *id && !r.is_collection_record && !r.deleted) ++stored;
    const std::size_t truth = provider.live().size();

    json j{{"collection_id", *id},
           {"ground_truth", truth},
           {"stored", stored},
           {"excluded", run.inserted.excluded.size()},
           {"snapshot", json::parse(repository::manifest_to_json(snap->manifest()))},
           {"metadata_documents", rc.records.index.size()},
           {"resource_entities", rc.entities.size()}};
    std::ostringstream t;
    t << "collection " << *id << ": " << stored << " stored of " << truth << " live at the provider";
    if (!run.inserted.excluded.empty()) t << " (" << run.inserted.excluded.size() << " excluded)";
    t << "\nsnapshot " << snap->id() << ", " << rc.records.index.size() << " metadata documents, " << rc.entities.size()
      << " resources\n";
    if (!query.empty()) {
        std::string q;
        for (const auto& s : query) q += (q.empty() ? "" : " ") + s;
        const auto hits = index::search(rc.records, q);
        json arr = json::array();
        for (std::size_t i = 0; i < hits.size() && i < 10; ++i) {
            arr.push_back({{"doc_id", hits[i].doc_id}, {"title", title_of(rc.records.index.find(hits[i].doc_id))}});
            t << "  " << hits[i].doc_id << '\t' << title_of(rc.records.index.find(hits[i].doc_id)) << '\n';
        }
        j["query"] = q;
        j["hits"] = arr;
    }
    ctx.print(j, t.str());
    return stored + run.inserted.excluded.size() == truth ? kExitOk : kExitFailure;
}

}  // namespace

Config config_from_json(std::string_view text) {
    const json j = json::parse(text);
    Config c;
    if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
    auto positive = [](double v, const char* what) {
        if (!(v > 0)) throw std::invalid_argument(std::string(what) + " must be positive");
        return v;
    };
    if (j.contains("postdate_offset_hours"))
        c.postdate_offset = Seconds{static_cast<long long>(positive(j.at("postdate_offset_hours"), "postdate_offset_hours") * 3600)};
    if (j.contains("page_size")) c.page_size = static_cast<std::size_t>(positive(j.at("page_size"), "page_size"));
    if (j.contains("schedule_days"))
        c.schedule = Seconds{static_cast<long long>(positive(j.at("schedule_days"), "schedule_days") * 86400)};
    c.domain = j.value("domain", c.domain);
    c.base_url = j.value("base_url", c.base_url);
    c.repository_name = j.value("repository_name", c.repository_name);
    c.admin_email = j.value("admin_email", c.admin_email);
    c.token_key = j.value("token_key", c.token_key);
    if (j.contains("stop_phrases")) c.stop_phrases = j.at("stop_phrases").get<std::string>();
    if (j.contains("profile")) c.profile = j.at("profile").get<std::string>();
    if (j.contains("fetch")) {
        const auto& f = j.at("fetch");
        if (f.contains("concurrency")) c.fetch_concurrency = static_cast<std::size_t>(positive(f.at("concurrency"), "fetch.concurrency"));
        c.fetch_politeness_ms = f.value("politeness_ms", c.fetch_politeness_ms);
        if (c.fetch_politeness_ms < 0) throw std::invalid_argument("fetch.politeness_ms must not be negative");
        if (f.contains("max_bytes")) c.fetch_max_bytes = static_cast<std::size_t>(positive(f.at("max_bytes"), "fetch.max_bytes"));
    }
    if (j.contains("retry")) {
        const auto& r = j.at("retry");
        c.max_retries = r.value("max_retries", c.max_retries);
        if (c.max_retries < 0) throw std::invalid_argument("retry.max_retries must not be negative");
        if (r.contains("base_seconds")) c.retry_base = Seconds{static_cast<long long>(positive(r.at("base_seconds"), "retry.base_seconds"))};
    }
    return c;
}

Config load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read config " + path.string());
    return config_from_json(std::string(std::istreambuf_iterator<char>(in), {}));
}

int run(const std::vector<std::string>& args, const Environment& env, std::ostream& out, std::ostream& err) {
    CLI::App app{"Metadata harvesting, normalization and serving pipeline", "harvestkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::string config_path, data_dir, now_text;
    bool json_out = false;
    app.add_option("--config", config_path, "JSON config file (default: $HARVESTKIT_CONFIG)");
    app.add_option("--data-dir", data_dir, "Overrides data_dir from the config");
    app.add_option("--now", now_text, "Pretend the current time is this instant");
    app.add_flag("--json", json_out, "Machine-readable output");

    auto json_flag = [&](CLI::App* s) { s->add_flag("--json", json_out, "Machine-readable output"); };

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "Check an OAI-PMH provider");
    validate->add_option("base_url", va.base_url)->required();
    validate->add_option("--prefix", va.prefix);
    validate->add_option("--seed", va.seed);
    validate->add_option("--out", va.out, "Also write the JSON report here");
    json_flag(validate);

    RegisterArgs ra;
    auto* reg = app.add_subcommand("register", "Validate and register a collection");
    reg->add_option("--base-url", ra.base_url)->required();
    reg->add_option("--title", ra.title)->required();
    reg->add_option("--description", ra.description);
    reg->add_option("--set", ra.set);
    reg->add_option("--prefix", ra.prefix);
    reg->add_option("--schedule-days", ra.schedule_days)->check(CLI::PositiveNumber);
    reg->add_option("--contact", ra.contacts);
    reg->add_option("--report", ra.report, "Use a saved validation report instead of validating now");
    reg->add_flag("--private-native", ra.private_native, "Do not re-expose native records in nsdl_all");
    json_flag(reg);

    HarvestArgs ha;
    auto* harvest = app.add_subcommand("harvest", "Run harvests and publish");
    harvest->add_option("--collection", ha.collections);
    harvest->add_flag("--all", ha.all, "Every enabled collection");
    harvest->add_flag("--due", ha.due, "Collections whose schedule has come round");
    harvest->add_flag("--full", ha.full, "Force a full re-sync");
    harvest->add_flag("--no-publish", ha.no_publish);
    json_flag(harvest);

    std::vector<std::string> ingest_files;
    bool ingest_no_publish = false;
    auto* ingest = app.add_subcommand("ingest", "Insert dbInsert documents and publish");
    ingest->add_option("files", ingest_files)->required()->check(CLI::ExistingFile);
    ingest->add_flag("--no-publish", ingest_no_publish);
    json_flag(ingest);

    std::string since, until, format = "text";
    auto* stats = app.add_subcommand("stats", "Harvest failure statistics");
    stats->add_option("--since", since);
    stats->add_option("--until", until);
    stats->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
    json_flag(stats);

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve-oai", "Serve the published snapshot over OAI-PMH");
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    json_flag(serve);

    bool rc_mode = false, mc_mode = false, naive_mode = false, fetch = false;
    auto* idx = app.add_subcommand("index", "Build a search index over the published snapshot");
    auto* g = idx->add_option_group("mode");
    g->add_flag("--resource-centric", rc_mode);
    g->add_flag("--metadata-centric", mc_mode);
    g->add_flag("--naive-identifier", naive_mode, "Diagnostic: one document per dc:identifier");
    g->require_option(0, 1);
    idx->add_flag("--fetch", fetch, "Fetch URLs and merge by content hash");
    json_flag(idx);

    std::vector<std::string> terms;
    bool search_rc = false;
    std::size_t limit = 20;
    auto* search = app.add_subcommand("search", "Conjunctive term search");
    search->add_option("query", terms)->required();
    search->add_flag("--resource-centric", search_rc);
    search->add_option("--limit", limit);
    json_flag(search);

    auto* dedup = app.add_subcommand("dedup-report", "Resource deduplication census");
    json_flag(dedup);

    std::string scenario_file, sim_at;
    int sim_port = 8081;
    auto* simulate = app.add_subcommand("simulate", "Serve a scripted provider");
    simulate->add_option("scenario", scenario_file)->required()->check(CLI::ExistingFile);
    simulate->add_option("--host", host);
    simulate->add_option("--port", sim_port);
    simulate->add_option("--at", sim_at, "Advance the scenario to this instant (default: its last event)");
    json_flag(simulate);

    std::string pipeline_scenario;
    std::vector<std::string> pipeline_query;
    auto* pipe = app.add_subcommand("pipeline", "validate, register, harvest, publish and index one scenario");
    pipe->add_option("--scenario", pipeline_scenario)->required()->check(CLI::ExistingFile);
    pipe->add_option("--query", pipeline_query, "Search the result");
    json_flag(pipe);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "harvestkit: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        Config cfg;
        if (config_path.empty())
            if (auto it = env.vars.find("HARVESTKIT_CONFIG"); it != env.vars.end()) config_path = it->second;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (!data_dir.empty()) cfg.data_dir = data_dir;
        Context ctx(cfg, env, out, err);
        ctx.json_mode = json_out;
        if (!now_text.empty()) ctx.now_override = parse_instant(now_text);

        if (validate->parsed()) return cmd_validate(ctx, va);
        if (reg->parsed()) return cmd_register(ctx, ra);
        if (harvest->parsed()) {
            if (ha.collections.empty() && !ha.all && !ha.due) {
                err << "harvest: give --collection, --all or --due\n";
                return kExitUsage;
            }
            return cmd_harvest(ctx, ha);
        }
        if (ingest->parsed()) return cmd_ingest(ctx, ingest_files, ingest_no_publish);
        if (stats->parsed()) return cmd_stats(ctx, since, until, format);
        if (serve->parsed()) return cmd_serve(ctx, host, port);
        if (idx->parsed())
            return cmd_index(ctx, naive_mode ? IndexMode::Naive : mc_mode ? IndexMode::Metadata : IndexMode::Resource,
                             fetch);
        if (search->parsed()) return cmd_search(ctx, terms, search_rc, limit);
        if (dedup->parsed()) return cmd_dedup_report(ctx);
        if (simulate->parsed()) return cmd_simulate(ctx, scenario_file, host, sim_port, sim_at);
        if (pipe->parsed()) return cmd_pipeline(ctx, pipeline_scenario, pipeline_query);
    } catch (const CLI::ValidationError& e) {
        err << "harvestkit: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "harvestkit: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "harvestkit: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace harvestkit::cli
