#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "harvestkit/client/client.hpp"
#include "harvestkit/ingest/transform.hpp"
#include "harvestkit/registry/registry.hpp"
#include "harvestkit/repository/repository.hpp"

namespace harvestkit::pipeline {

struct HarvestOptions {
    ingest::TransformConfig transform;
    /// When set, each successful attempt's dbInsert document is kept here
    /// as <attempt_id>.xml before it is inserted.
    std::optional<std::filesystem::path> staging_dir;
    /// Overrides the registry's decision for this run.
    std::optional<client::HarvestMode> mode;
};

struct HarvestRun {
    registry::HarvestAttempt attempt;
    repository::InsertResult inserted;
    /// Stored records a full harvest did not return, now tombstoned.
    std::vector<std::string> retired;
    std::vector<std::string> log;
};

/// One registry-driven attempt: decide the mode, harvest, normalize and
/// insert, then log the outcome. A failed harvest inserts nothing and
/// leaves the watermark where it was. Does not publish.
HarvestRun harvest_collection(registry::Registry& registry, repository::Repository& repo, client::OaiClient& client,
                              const std::string& collection_id, Instant now, const HarvestOptions& options = {});

/// Every collection schedule_due() reports, in collection id order.
std::vector<HarvestRun> harvest_due(registry::Registry& registry, repository::Repository& repo,
                                    client::OaiClient& client, Instant now, const HarvestOptions& options = {});

std::string run_to_json(const HarvestRun& run, int indent = -1);

}  // namespace harvestkit::pipeline
