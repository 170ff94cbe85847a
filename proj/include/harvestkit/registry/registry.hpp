#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "harvestkit/client/client.hpp"
#include "harvestkit/expected.hpp"
#include "harvestkit/oai/model.hpp"
#include "harvestkit/time.hpp"
#include "harvestkit/validator/validator.hpp"

namespace harvestkit::registry {

using client::FailureCategory;
using client::HarvestMode;

struct CollectionRecord {
    std::string collection_id;
    std::vector<oai::DcElement> description;
    std::vector<std::string> provider_contacts;  // stored, never mailed
    bool active = true;
};

struct HarvestConfig {
    std::string collection_id;  // assigned at registration
    std::string base_url;
    std::string set_spec;  // empty: whole repository
    std::string format_prefix = "oai_dc";
    Seconds schedule = days(7);
    bool enabled = true;
    /// Provider allows re-exposing its native records.
    bool native_public = true;
};

enum class Outcome { Success, Failure };
std::string_view to_string(Outcome o);

struct HarvestAttempt {
    std::string attempt_id;
    std::string collection_id;
    Instant started_at{};
    Instant finished_at{};
    HarvestMode mode;
    Outcome outcome = Outcome::Success;
    std::optional<FailureCategory> category;  // set iff Failure
    std::size_t records_seen = 0;
    std::optional<Instant> new_watermark;  // absent on Failure
    /// Policy the provider declared during this attempt, if it answered Identify.
    std::optional<oai::DeletedPolicy> deleted_policy;
    std::string detail;
};

struct CollectionState {
    std::string collection_id;
    std::optional<Instant> watermark;
    std::size_t consecutive_failures = 0;
    std::optional<Instant> last_full_harvest;
    oai::DeletedPolicy deleted_policy = oai::DeletedPolicy::No;
    std::optional<Instant> last_finished;
    std::size_t successes = 0;

    bool operator==(const CollectionState&) const = default;
};

struct RegistryPolicy {
    std::size_t resync_threshold = 3;  // consecutive failures forcing Full
    std::size_t resync_every = 4;      // Full every Nth scheduled harvest for non-persistent providers
};

/// Pure: the state after one more attempt.
CollectionState apply_attempt(CollectionState state, const HarvestAttempt& attempt);
/// Pure fold of a collection's attempt log.
CollectionState fold_attempts(const std::string& collection_id, const std::vector<HarvestAttempt>& attempts);

HarvestMode decide_mode(const CollectionState& state, Seconds schedule, Instant now, const RegistryPolicy& policy = {});

struct DueCollection {
    std::string collection_id;
    HarvestMode mode;
};

struct CollectionStats {
    std::string collection_id;
    std::size_t attempts = 0;
    std::size_t successes = 0;
    std::size_t failures = 0;
};

struct StatsReport {
    std::optional<Instant> from;
    std::optional<Instant> until;
    std::size_t attempts = 0;
    std::size_t successes = 0;
    std::size_t failures = 0;
    std::optional<double> failure_rate;  // null on an empty window
    std::map<FailureCategory, std::size_t> breakdown;
    std::vector<CollectionStats> per_collection;  // by collection id
};

/// Attempts whose started_at lies in [from, until).
StatsReport compute_stats(const std::vector<HarvestAttempt>& attempts, std::optional<Instant> from,
                          std::optional<Instant> until);
std::string stats_to_json(const StatsReport& report, int indent = 2);
StatsReport stats_from_json(std::string_view json_text);
std::string stats_to_text(const StatsReport& report);

struct RegistrationError {
    enum class Kind { ValidationRequired, DuplicateBaseUrlSet, MissingTitle };
    Kind kind;
    std::string message;
};
std::string_view to_string(RegistrationError::Kind k);

class UnknownCollection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string attempt_to_json(const HarvestAttempt& a);
HarvestAttempt attempt_from_json(std::string_view json_text);

struct RegistryOptions {
    RegistryPolicy policy;
    std::optional<std::filesystem::path> data_dir;  // memory only when unset
    /// Called once per successful registration, e.g. to store the collection
    /// description record in the repository.
    std::function<void(const CollectionRecord&, const HarvestConfig&, Instant)> on_register;
};

/// Event-sourced catalog. All mutations go through one lock; the state is
/// rebuilt from the append-only log on open.
class Registry {
public:
    explicit Registry(RegistryOptions options = {});

    Expected<std::string, RegistrationError> register_collection(std::vector<oai::DcElement> description,
                                                                 HarvestConfig config,
                                                                 const validator::ValidationReport& report, Instant now,
                                                                 std::vector<std::string> contacts = {});

    /// Marks an attempt as running; it is excluded from schedule_due until
    /// recorded.
    std::string begin_attempt(const std::string& collection_id, const HarvestMode& mode, Instant now);
    CollectionState record_attempt(HarvestAttempt attempt);

    void set_enabled(const std::string& collection_id, bool enabled);
    /// Operator re-sync: the next decided mode is Full regardless of policy,
    /// until a Full harvest succeeds.
    void request_full(const std::string& collection_id);
    bool full_requested(std::string_view collection_id) const;

    HarvestMode decide_mode(const std::string& collection_id, Instant now) const;
    std::vector<DueCollection> schedule_due(Instant now) const;
    StatsReport stats(std::optional<Instant> from = {}, std::optional<Instant> until = {}) const;

    std::vector<std::string> collection_ids() const;
    std::optional<CollectionRecord> collection(std::string_view id) const;
    std::optional<HarvestConfig> config(std::string_view id) const;
    std::optional<CollectionState> state(std::string_view id) const;
    std::vector<HarvestAttempt> attempts(std::string_view collection_id = {}) const;
    const RegistryPolicy& policy() const noexcept { return options_.policy; }

    /// Writes the folded state so reopening skips the covered log prefix.
    void checkpoint() const;

private:
    struct Entry {
        CollectionRecord record;
        HarvestConfig config;
        CollectionState state;
        std::optional<std::string> running;
        bool full_requested = false;
    };

    void apply_event(const std::string& line);
    void append(const std::string& line);
    Entry& entry(std::string_view id);

    RegistryOptions options_;
    mutable std::mutex mu_;
    std::map<std::string, Entry, std::less<>> entries_;
    std::vector<HarvestAttempt> attempts_;
    std::size_t next_attempt_ = 1;
    std::size_t log_lines_ = 0;
};

}  // namespace harvestkit::registry
