#include "harvestkit/pipeline/harvest.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "harvestkit/ingest/dbinsert.hpp"

namespace harvestkit::pipeline {

using nlohmann::json;

namespace {

void stage(const std::filesystem::path& dir, const ingest::DbInsertDocument& doc) {
    std::filesystem::create_directories(dir);
    const auto path = dir / (doc.attempt_id + ".xml");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << ingest::serialize_db_insert(doc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

HarvestRun harvest_collection(registry::Registry& registry, repository::Repository& repo, client::OaiClient& client,
                              const std::string& collection_id, Instant now, const HarvestOptions& options) {
    const auto config = registry.config(collection_id);
    if (!config) throw registry::UnknownCollection("unknown collection " + collection_id);
    const auto mode = options.mode ? *options.mode : registry.decide_mode(collection_id, now);

    HarvestRun run;
    auto& a = run.attempt;
    a.collection_id = collection_id;
    a.mode = mode;
    a.started_at = now;
    a.attempt_id = registry.begin_attempt(collection_id, mode, now);

    auto fail = [&](const client::Failure& f) {
        a.outcome = registry::Outcome::Failure;
        a.category = f.category;
        a.detail = f.detail;
        a.finished_at = now;
        registry.record_attempt(a);
        return run;
    };

    auto info = client.identify(config->base_url);
    if (!info) return fail(info.error());
    a.deleted_policy = info->deleted_policy;

    const client::HarvestTarget target{config->base_url, config->format_prefix, config->set_spec, info->granularity};
    auto result = client.harvest(target, mode);
    run.log = result.log;
    a.records_seen = result.records.size();
    if (!result.ok()) return fail(*result.failure);

    try {
        auto doc = ingest::normalize_batch(result.records, collection_id, a.attempt_id, options.transform);
        if (options.staging_dir) stage(*options.staging_dir, doc);
        run.inserted = repo.insert(doc, now);
        if (mode.kind == client::HarvestMode::Kind::Full) {
            std::vector<std::string> keep;
            for (const auto& r : result.records)
                if (!r.header.deleted) keep.push_back(r.header.identifier);
            run.retired = repo.retain_only(collection_id, keep, now);
        }
    } catch (const std::exception& e) {
        // Only reachable through a broken local store; the provider is not at fault
        // but the attempt still has to be closed.
        client::Failure f;
        f.category = client::FailureCategory::Transient;
        f.detail = std::string("ingest: ") + e.what();
        f.url = config->base_url;
        return fail(f);
    }

    a.outcome = registry::Outcome::Success;
    a.new_watermark = result.completed_through;
    a.detail = std::to_string(run.inserted.inserted.size()) + " stored, " + std::to_string(run.inserted.deleted.size()) +
               " deleted, " + std::to_string(run.inserted.excluded.size()) + " excluded";
    if (!run.retired.empty()) a.detail += ", " + std::to_string(run.retired.size()) + " retired";
    a.finished_at = now;
    registry.record_attempt(a);
    return run;
}

std::vector<HarvestRun> harvest_due(registry::Registry& registry, repository::Repository& repo,
                                    client::OaiClient& client, Instant now, const HarvestOptions& options) {
    std::vector<HarvestRun> runs;
    for (const auto& due : registry.schedule_due(now)) {
        HarvestOptions o = options;
        o.mode = due.mode;
        runs.push_back(harvest_collection(registry, repo, client, due.collection_id, now, o));
    }
    return runs;
}

std::string run_to_json(const HarvestRun& run, int indent) {
    json j = json::parse(registry::attempt_to_json(run.attempt));
    j["inserted"] = run.inserted.inserted.size();
    j["deleted"] = run.inserted.deleted.size();
    j["excluded"] = run.inserted.excluded;
    j["retired"] = run.retired.size();
    return j.dump(indent);
}

}  // namespace harvestkit::pipeline
