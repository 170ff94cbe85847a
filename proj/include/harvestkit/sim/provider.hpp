#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "harvestkit/net.hpp"
#include "harvestkit/oai/model.hpp"
#include "harvestkit/oai/protocol.hpp"
#include "harvestkit/time.hpp"

namespace harvestkit::sim {

struct SimEvent {
    enum class Op { Upsert, Delete };
    Instant at{};
    Op op = Op::Upsert;
    std::string identifier;
    std::vector<oai::DcElement> elements;  // Upsert only
    std::vector<std::string> sets;         // Upsert only
};

enum class FaultKind {
    Disconnect,
    Http5xx,
    InvalidUtf8,
    BrokenToken,
    WrongDatestamp,
    SchemaInvalidRecord,
    NonIdempotentWindow,
    ForgottenDeletes,
    SplashPageUrls,
};

std::string_view to_string(FaultKind k);
std::optional<FaultKind> parse_fault_kind(std::string_view s);

/// Which requests a fault fires on. Unset fields match anything; `times`
/// caps how often it fires (unset: every matching request).
struct FaultTrigger {
    std::optional<std::string> verb;
    std::optional<std::size_t> page;
    std::optional<int> times;
};

struct FaultSpec {
    FaultKind kind;
    FaultTrigger trigger;
    std::string bytes = "\xC0\x80";  // InvalidUtf8 payload
    std::size_t record_index = 0;     // which record on the page is corrupted
    int http_status = 503;
    std::string splash_url = "http://provider.example.org/";
};

struct SimScenario {
    std::string repository_name = "Simulated Provider";
    std::string base_url = "http://sim.example.org/oai";
    std::string admin_email = "admin@sim.example.org";
    oai::DeletedPolicy deleted_policy = oai::DeletedPolicy::Persistent;
    oai::Granularity granularity = oai::Granularity::Second;
    std::size_t page_size = 10;
    Instant start{};
    std::vector<SimEvent> timeline;
    std::vector<FaultSpec> faults;

    /// Throws std::invalid_argument when a record's events are not strictly ordered.
    void validate() const;
};

class TimeRegression : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Current ground-truth state of one record.
struct TruthRecord {
    std::string identifier;
    Instant datestamp{};
    bool deleted = false;
    std::vector<oai::DcElement> elements;
    std::vector<std::string> sets;
};

/// Scriptable in-memory data provider. Protocol behaviour is faithful except
/// where a configured fault fires.
class ProviderSimulator {
public:
    explicit ProviderSimulator(SimScenario scenario);

    /// Applies every timeline event at or before `to`.
    void advance(Instant to);
    Instant now() const;

    net::HttpResponse handle(const net::QueryArgs& args);
    net::Handler handler();

    const SimScenario& scenario() const noexcept { return scenario_; }

    /// Every record ever created, deleted ones as tombstones.
    std::map<std::string, TruthRecord> truth() const;
    /// Records that currently exist (not deleted).
    std::map<std::string, TruthRecord> live() const;
    /// Records (including tombstones) whose datestamp lies in [from, until].
    std::vector<TruthRecord> window(std::optional<Instant> from, std::optional<Instant> until) const;

    std::size_t request_count() const;
    std::size_t fault_fire_count(std::size_t fault_index) const;

private:
    struct ListCursor {
        std::string verb;
        std::string prefix;
        std::string set;
        std::string from;
        std::string until;
        std::size_t offset = 0;
    };

    net::HttpResponse dispatch(const net::QueryArgs& args);
    const FaultSpec* fire(const std::string& verb, std::size_t page, bool has_token, FaultKind only);
    bool has_fault(FaultKind k) const;
    std::string payload_for(const TruthRecord& r, std::string_view prefix, const FaultSpec* utf8,
                            const FaultSpec* schema) const;
    std::vector<const TruthRecord*> select(const std::optional<oai::RequestDate>& from,
                                           const std::optional<oai::RequestDate>& until, const std::string& set);
    std::string encode_cursor(const ListCursor& c) const;
    std::optional<ListCursor> decode_cursor(std::string_view token) const;
    net::HttpResponse list(const net::QueryArgs& args, const std::string& verb, ListCursor cursor, bool resumed);
    net::HttpResponse respond(const oai::RequestArgs& echo, std::string_view verb, std::string_view body) const;
    net::HttpResponse respond_error(const oai::RequestArgs& echo, oai::ProtocolErrorCode code, std::string message) const;

    SimScenario scenario_;
    mutable std::mutex mutex_;
    Instant now_{};
    std::size_t next_event_ = 0;
    std::map<std::string, TruthRecord> state_;
    std::vector<int> fired_;
    std::map<std::string, int> window_requests_;
    std::size_t requests_ = 0;
};

/// Deterministic synthetic records: `count` upserts one `step` apart
/// starting at `start`, each with a title, creator, subject, description,
/// type, language and an http identifier.
std::vector<SimEvent> synthetic_records(std::size_t count, Instant start, Seconds step,
                                        std::string_view id_prefix = "oai:sim.example.org:", std::uint64_t seed = 1);

SimScenario load_scenario(std::string_view json_text);
std::string dump_scenario(const SimScenario& scenario);

}  // namespace harvestkit::sim
