#pragma once

// Shared fixtures for unit and acceptance tests.

#include <algorithm>
#include <map>
#include <stdexcept>

#include "harvestkit/client/client.hpp"
#include "harvestkit/ingest/transform.hpp"
#include "harvestkit/pipeline/harvest.hpp"
#include "harvestkit/registry/registry.hpp"
#include "harvestkit/repository/repository.hpp"
#include "harvestkit/validator/validator.hpp"
#include "harvestkit/net.hpp"
#include "harvestkit/sim/provider.hpp"

namespace harvestkit::testing {

inline Instant t0() { return make_instant(2005, 1, 1); }

inline sim::SimScenario scenario(std::size_t records, std::size_t page_size = 10,
                                 oai::DeletedPolicy policy = oai::DeletedPolicy::Persistent,
                                 std::string base_url = "http://sim.example.org/oai") {
    sim::SimScenario s;
    s.base_url = std::move(base_url);
    s.page_size = page_size;
    s.deleted_policy = policy;
    s.start = t0();
    s.timeline = sim::synthetic_records(records, t0() + Seconds{60}, Seconds{60});
    return s;
}

// Updates and deletes spread over four days after the initial load. Deleted
// ids are never updated later.
inline sim::SimScenario churn(std::size_t records, std::size_t updates, std::size_t deletes) {
    auto s = scenario(records);
    for (std::size_t i = 0; i < updates; ++i) {
        const std::size_t n = (i * 7) % records + 1;
        sim::SimEvent e;
        e.at = t0() + days(1 + i % 4) + Seconds{60 * static_cast<long>(i + 1)};
        e.identifier = "oai:sim.example.org:" + std::to_string(n);
        e.elements = {{"title", "", "", "Revised " + std::to_string(n), ""},
                      {"identifier", "", "", "http://sim.example.org/item/" + std::to_string(n), ""}};
        s.timeline.push_back(e);
    }
    for (std::size_t i = 0; i < deletes; ++i) {
        sim::SimEvent e;
        e.at = t0() + days(1 + i % 4) + Seconds{3600 + 60 * static_cast<long>(i)};
        e.op = sim::SimEvent::Op::Delete;
        e.identifier = "oai:sim.example.org:" + std::to_string(records - 1 - i * 7 % (records - 1));
        s.timeline.push_back(e);
    }
    std::stable_sort(s.timeline.begin(), s.timeline.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
    return s;
}

/// A simulator mounted on a loopback transport with a non-sleeping client.
struct SimHarness {
    explicit SimHarness(sim::SimScenario s) : provider(std::move(s)) {
        transport.mount(provider.scenario().base_url, provider.handler());
    }

    client::OaiClient client(client::RetryPolicy retry = {}) {
        client::ClientOptions opts;
        opts.retry = retry;
        opts.sleeper = &sleeper;
        return client::OaiClient(transport, opts);
    }

    client::HarvestTarget target(std::string prefix = "oai_dc") const {
        return {provider.scenario().base_url, std::move(prefix), "", provider.scenario().granularity};
    }

    sim::ProviderSimulator provider;
    net::LoopbackTransport transport;
    client::RecordingSleeper sleeper;
};

inline sim::FaultSpec fault(sim::FaultKind kind) { return sim::FaultSpec{kind, {}}; }

inline sim::FaultSpec fault_on_page(sim::FaultKind kind, std::size_t page, std::optional<int> times = std::nullopt) {
    sim::FaultSpec f{kind, {}};
    f.trigger.verb = "ListRecords";
    f.trigger.page = page;
    f.trigger.times = times;
    return f;
}

/// Registry + repository wired the way the CLI wires them, harvesting one
/// simulator.
struct Aggregator {
    explicit Aggregator(sim::SimScenario s, registry::RegistryPolicy policy = {})
        : sim(std::move(s)), registry(options(policy)) {}

    registry::RegistryOptions options(registry::RegistryPolicy policy) {
        registry::RegistryOptions o;
        o.policy = policy;
        o.on_register = [this](const registry::CollectionRecord& r, const registry::HarvestConfig& c, Instant now) {
            repo.add_collection(r.collection_id, r.description, c.native_public, now);
        };
        return o;
    }

    std::string register_provider(Instant now, Seconds schedule = days(1)) {
        ManualClock clock(now);
        auto c = sim.client();
        auto report = validator::validate_provider(c, sim.provider.scenario().base_url, clock);
        registry::HarvestConfig cfg;
        cfg.base_url = sim.provider.scenario().base_url;
        cfg.schedule = schedule;
        auto id = registry.register_collection({{"title", "", "", "Simulated collection", ""}}, cfg, report, now);
        if (!id) throw std::runtime_error(id.error().message);
        return *id;
    }

    pipeline::HarvestRun harvest(const std::string& cid, Instant now, std::optional<client::HarvestMode> mode = {}) {
        auto c = sim.client({0, Seconds{0}});
        pipeline::HarvestOptions o;
        o.mode = mode;
        return pipeline::harvest_collection(registry, repo, c, cid, now, o);
    }

    SimHarness sim;
    repository::Repository repo;
    registry::Registry registry;
};

using RecordState = std::map<std::string, std::vector<oai::DcElement>>;

/// Live item records of a collection: source identifier -> normalized elements.
inline RecordState stored_state(const repository::Repository& repo, const std::string& cid) {
    RecordState out;
    for (const auto& r : repo.records())
        if (r.collection_id == cid && !r.is_collection_record && !r.deleted)
            out[r.source_identifier] = repository::assemble(r.rows);
    return out;
}

/// What a faithful aggregator should hold for the simulator's ground truth.
inline RecordState expected_state(const sim::ProviderSimulator& provider) {
    RecordState out;
    for (const auto& [id, r] : provider.live()) {
        auto n = ingest::safe_transform(id, r.elements);
        if (ingest::has_min_content(n)) out[id] = n.elements;
    }
    return out;
}

}  // namespace harvestkit::testing
