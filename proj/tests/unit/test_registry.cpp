#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "harvestkit/registry/registry.hpp"
#include "harvestkit/repository/repository.hpp"

using namespace harvestkit;
using namespace harvestkit::registry;

namespace {

const Instant kT = make_instant(2005, 3, 1);

validator::ValidationReport report(validator::Verdict v = validator::Verdict::Pass) {
    validator::ValidationReport r;
    r.provider = "http://p.example.org/oai";
    r.verdict = v;
    return r;
}

std::vector<oai::DcElement> titled(std::string t) { return {{"title", "", "", std::move(t), ""}}; }

HarvestConfig cfg(std::string url, std::string set = {}) {
    HarvestConfig c;
    c.base_url = std::move(url);
    c.set_spec = std::move(set);
    return c;
}

HarvestAttempt success(const std::string& cid, Instant at, HarvestMode mode, Instant watermark) {
    HarvestAttempt a;
    a.collection_id = cid;
    a.started_at = at;
    a.finished_at = at + Seconds{60};
    a.mode = mode;
    a.new_watermark = watermark;
    a.deleted_policy = oai::DeletedPolicy::Persistent;
    return a;
}

HarvestAttempt failure(const std::string& cid, Instant at, FailureCategory c = FailureCategory::Transient) {
    HarvestAttempt a;
    a.collection_id = cid;
    a.started_at = at;
    a.finished_at = at + Seconds{60};
    a.outcome = Outcome::Failure;
    a.category = c;
    return a;
}

bool is_full(const HarvestMode& m) { return m.kind == HarvestMode::Kind::Full; }

struct TempDir {
    TempDir() : path(std::filesystem::temp_directory_path() / ("hk-reg-" + std::to_string(::getpid()))) {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::filesystem::path path;
};

}  // namespace

TEST(Registry, RegistrationInjectsCollectionRecord) {
    repository::Repository repo;
    RegistryOptions opts;
    opts.on_register = [&](const CollectionRecord& r, const HarvestConfig& c, Instant now) {
        repo.add_collection(r.collection_id, r.description, c.native_public, now);
    };
    Registry reg(opts);
    auto id = reg.register_collection(titled("Ocean"), cfg("http://p.example.org/oai"), report(), kT, {"a@p.org"});
    ASSERT_TRUE(id);
    EXPECT_EQ(*id, "c0001");
    EXPECT_EQ(repo.size(), 1u);
    EXPECT_TRUE(repo.collection("c0001"));
    EXPECT_EQ(reg.collection("c0001")->provider_contacts, std::vector<std::string>{"a@p.org"});
    EXPECT_FALSE(reg.state("c0001")->watermark);
    EXPECT_TRUE(is_full(reg.decide_mode("c0001", kT)));
}

TEST(Registry, RegistrationErrors) {
    Registry reg;
    auto bad = reg.register_collection(titled("X"), cfg("http://p.example.org/oai"), report(validator::Verdict::Fail), kT);
    ASSERT_FALSE(bad);
    EXPECT_EQ(bad.error().kind, RegistrationError::Kind::ValidationRequired);
    ASSERT_TRUE(reg.register_collection(titled("X"), cfg("http://p.example.org/oai", "math"), report(), kT));
    auto dup = reg.register_collection(titled("Y"), cfg("http://p.example.org/oai", "math"), report(), kT);
    ASSERT_FALSE(dup);
    EXPECT_EQ(dup.error().kind, RegistrationError::Kind::DuplicateBaseUrlSet);
    // Another set on the same provider is a different collection.
    EXPECT_TRUE(reg.register_collection(titled("Z"), cfg("http://p.example.org/oai", "bio"), report(), kT));
    auto untitled = reg.register_collection({}, cfg("http://q.example.org/oai"), report(), kT);
    ASSERT_FALSE(untitled);
    EXPECT_EQ(untitled.error().kind, RegistrationError::Kind::MissingTitle);
    EXPECT_EQ(reg.collection_ids().size(), 2u);
}

TEST(DecideMode, Rules) {
    CollectionState s;
    EXPECT_TRUE(is_full(decide_mode(s, days(7), kT)));

    s = apply_attempt(s, success("c1", kT, HarvestMode::full(), kT));
    auto m = decide_mode(s, days(7), kT + days(7));
    ASSERT_FALSE(is_full(m));
    EXPECT_EQ(m.since, kT);

    CollectionState transient = s;
    transient.deleted_policy = oai::DeletedPolicy::Transient;
    EXPECT_FALSE(is_full(decide_mode(transient, days(7), kT + days(7))));
    EXPECT_TRUE(is_full(decide_mode(transient, days(7), kT + days(90))));
    // Every fourth scheduled harvest.
    EXPECT_FALSE(is_full(decide_mode(transient, days(7), kT + days(21))));
    EXPECT_TRUE(is_full(decide_mode(transient, days(7), kT + days(28))));
}

TEST(DecideMode, ThresholdWalk) {
    CollectionState s = apply_attempt({}, success("c1", kT, HarvestMode::full(), kT));
    for (int i = 1; i <= 3; ++i) {
        s = apply_attempt(s, failure("c1", kT + days(i)));
        EXPECT_EQ(s.watermark, kT);
        EXPECT_EQ(s.consecutive_failures, static_cast<std::size_t>(i));
        EXPECT_EQ(is_full(decide_mode(s, days(1), kT + days(i))), i == 3);
    }
    s = apply_attempt(s, success("c1", kT + days(4), HarvestMode::full(), kT + days(4)));
    EXPECT_EQ(s.consecutive_failures, 0u);
    EXPECT_EQ(s.last_full_harvest, kT + days(4));
}

TEST(Registry, RecordAttemptChecks) {
    Registry reg;
    EXPECT_THROW(reg.record_attempt(failure("c0404", kT)), UnknownCollection);
    ASSERT_TRUE(reg.register_collection(titled("X"), cfg("http://p/oai"), report(), kT));
    auto bad = failure("c0001", kT);
    bad.new_watermark = kT;
    EXPECT_THROW(reg.record_attempt(bad), std::invalid_argument);
    auto st = reg.record_attempt(success("c0001", kT, HarvestMode::full(), kT + hours(1)));
    EXPECT_EQ(st.watermark, kT + hours(1));
    EXPECT_EQ(st.last_full_harvest, kT);
    st = reg.record_attempt(failure("c0001", kT + days(1)));
    EXPECT_EQ(st.watermark, kT + hours(1));
    EXPECT_EQ(st.consecutive_failures, 1u);
}

TEST(Registry, ScheduleDue) {
    Registry reg;
    for (const char* url : {"http://a/oai", "http://b/oai", "http://c/oai"})
        ASSERT_TRUE(reg.register_collection(titled(url), cfg(url), report(), kT));
    for (const char* id : {"c0001", "c0002", "c0003"}) reg.record_attempt(success(id, kT, HarvestMode::full(), kT));
    reg.record_attempt(success("c0002", kT + days(5), HarvestMode::incremental(kT), kT + days(5)));
    reg.record_attempt(success("c0003", kT + days(6), HarvestMode::incremental(kT), kT + days(6)));
    auto due = reg.schedule_due(kT + days(8));
    ASSERT_EQ(due.size(), 1u);
    EXPECT_EQ(due[0].collection_id, "c0001");
    EXPECT_FALSE(is_full(due[0].mode));

    // Running attempts are not due again.
    const auto attempt = reg.begin_attempt("c0001", due[0].mode, kT + days(8));
    EXPECT_TRUE(reg.schedule_due(kT + days(8)).empty());
    EXPECT_THROW(reg.begin_attempt("c0001", due[0].mode, kT + days(8)), std::logic_error);
    auto a = success("c0001", kT + days(8), due[0].mode, kT + days(8));
    a.attempt_id = attempt;
    reg.record_attempt(a);
    EXPECT_EQ(reg.schedule_due(kT + days(14)).size(), 2u);

    for (const char* id : {"c0001", "c0002", "c0003"}) reg.set_enabled(id, false);
    EXPECT_TRUE(reg.schedule_due(kT + days(100)).empty());
}

TEST(Stats, ArithmeticAndEmptyWindow) {
    std::vector<HarvestAttempt> log;
    for (int i = 0; i < 6; ++i) log.push_back(success("c1", kT + days(i), HarvestMode::full(), kT));
    log.push_back(failure("c1", kT + days(6), FailureCategory::Transient));
    log.push_back(failure("c2", kT + days(7), FailureCategory::DataFormat));
    log.push_back(failure("c2", kT + days(8), FailureCategory::DataFormat));
    log.push_back(failure("c2", kT + days(9), FailureCategory::ProtocolViolation));
    auto r = compute_stats(log, {}, {});
    EXPECT_EQ(r.attempts, 10u);
    ASSERT_TRUE(r.failure_rate);
    EXPECT_DOUBLE_EQ(*r.failure_rate, 0.4);
    EXPECT_EQ(r.breakdown[FailureCategory::DataFormat], 2u);
    ASSERT_EQ(r.per_collection.size(), 2u);
    EXPECT_EQ(r.per_collection[1].failures, 3u);

    auto empty = compute_stats(log, kT + days(100), kT + days(200));
    EXPECT_EQ(empty.attempts, 0u);
    EXPECT_FALSE(empty.failure_rate);
    EXPECT_NE(stats_to_json(empty).find("\"failure_rate\": null"), std::string::npos);

    auto back = stats_from_json(stats_to_json(r));
    EXPECT_EQ(back.attempts, r.attempts);
    EXPECT_EQ(back.breakdown, r.breakdown);
    EXPECT_EQ(back.failure_rate, r.failure_rate);
    EXPECT_EQ(back.per_collection.size(), 2u);
}

// Random attempt logs: the state is a pure fold, watermarks never go back
// and the breakdown partitions the failures.
TEST(Registry, FoldPropertiesOnRandomLogs) {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<HarvestAttempt> log;
        Instant t = kT;
        for (int i = 0; i < 30; ++i) {
            t += hours(1 + rng() % 48);
            if (rng() % 3 == 0) log.push_back(failure("c1", t, static_cast<FailureCategory>(rng() % 3)));
            else log.push_back(success("c1", t, rng() % 2 ? HarvestMode::full() : HarvestMode::incremental(kT),
                                       kT + hours(rng() % 500)));
        }
        CollectionState running;
        running.collection_id = "c1";
        std::optional<Instant> prev;
        for (std::size_t n = 0; n < log.size(); ++n) {
            running = apply_attempt(running, log[n]);
            std::vector<HarvestAttempt> prefix(log.begin(), log.begin() + static_cast<long>(n) + 1);
            ASSERT_EQ(fold_attempts("c1", prefix), running);
            if (prev) {
                ASSERT_GE(*running.watermark, *prev);
            }
            prev = running.watermark;
            if (!running.watermark) {
                ASSERT_TRUE(is_full(decide_mode(running, days(7), t)));
            }
        }
        auto s = compute_stats(log, {}, {});
        std::size_t sum = 0;
        for (const auto& [c, k] : s.breakdown) sum += k;
        ASSERT_EQ(sum, s.failures);
        ASSERT_EQ(s.successes + s.failures, s.attempts);
    }
}

TEST(Registry, ReopenReplaysLogAndCheckpoint) {
    TempDir dir;
    RegistryOptions opts;
    opts.data_dir = dir.path;
    {
        Registry reg(opts);
        ASSERT_TRUE(reg.register_collection(titled("A"), cfg("http://a/oai"), report(), kT));
        ASSERT_TRUE(reg.register_collection(titled("B"), cfg("http://b/oai"), report(), kT));
        auto id = reg.begin_attempt("c0001", HarvestMode::full(), kT);
        auto a = success("c0001", kT, HarvestMode::full(), kT + hours(2));
        a.attempt_id = id;
        reg.record_attempt(a);
        reg.checkpoint();
        reg.record_attempt(failure("c0002", kT + days(1), FailureCategory::DataFormat));
        reg.begin_attempt("c0002", HarvestMode::full(), kT + days(2));
    }
    Registry reopened(opts);
    EXPECT_EQ(reopened.collection_ids(), (std::vector<std::string>{"c0001", "c0002"}));
    EXPECT_EQ(reopened.state("c0001")->watermark, kT + hours(2));
    EXPECT_EQ(reopened.state("c0002")->consecutive_failures, 1u);
    EXPECT_EQ(reopened.attempts().size(), 2u);
    EXPECT_EQ(reopened.schedule_due(kT + days(30)).size(), 1u);  // c0002 still running
    EXPECT_EQ(reopened.begin_attempt("c0001", HarvestMode::full(), kT + days(30)), "a000004");
}
