#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

using namespace harvestkit;
using namespace harvestkit::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct DataDir {
    DataDir() : path(fs::temp_directory_path() / ("hk-cli-" + std::to_string(::getpid()) + "-" + std::to_string(n++))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~DataDir() { fs::remove_all(path); }
    fs::path path;
    static inline int n = 0;
};

struct Result {
    int code;
    std::string out;
    std::string err;
    json parsed() const { return json::parse(out); }
};

Result invoke(std::vector<std::string> args, net::Transport* transport = nullptr) {
    cli::Environment env;
    env.transport = transport;
    env.no_sleep = true;
    std::ostringstream out, err;
    const int code = cli::run(args, env, out, err);
    return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

// Config with no retries and a data dir, so every invocation shares state.
fs::path config(const DataDir& d) {
    auto p = d.path / "config.json";
    write(p, json{{"data_dir", (d.path / "data").string()}, {"retry", {{"max_retries", 0}}}, {"page_size", 10}}.dump());
    return p;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(invoke({}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"validate"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"--now", "yesterday", "stats"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"harvest"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"index", "--resource-centric", "--naive-identifier"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"--help"}).code, cli::kExitOk);
}

TEST(Cli, ConfigRejectsNonPositiveValues) {
    EXPECT_THROW(cli::config_from_json(R"({"page_size": 0})"), std::invalid_argument);
    EXPECT_THROW(cli::config_from_json(R"({"postdate_offset_hours": -1})"), std::invalid_argument);
    auto c = cli::config_from_json(R"({"postdate_offset_hours": 1, "fetch": {"concurrency": 2}})");
    EXPECT_EQ(c.postdate_offset, hours(1));
    EXPECT_EQ(c.fetch_concurrency, 2u);
    EXPECT_EQ(c.page_size, 100u);

    DataDir d;
    write(d.path / "bad.json", R"({"page_size": -3})");
    EXPECT_EQ(invoke({"--config", (d.path / "bad.json").string(), "stats"}).code, cli::kExitUsage);
}

TEST(Cli, ValidateExitReflectsVerdict) {
    SimHarness clean(scenario(25));
    clean.provider.advance(t0() + days(1));
    auto r = invoke({"--json", "validate", clean.provider.scenario().base_url}, &clean.transport);
    EXPECT_EQ(r.code, cli::kExitOk) << r.out << r.err;
    EXPECT_EQ(r.parsed()["verdict"], "Pass");

    auto s = scenario(25);
    s.faults.push_back(fault(sim::FaultKind::InvalidUtf8));
    SimHarness broken(s);
    broken.provider.advance(t0() + days(1));
    r = invoke({"validate", s.base_url}, &broken.transport);
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.out.find("DataFormat"), std::string::npos) << r.out;
}

TEST(Cli, RegisterHarvestSearchAndStats) {
    DataDir d;
    const auto cfg = config(d).string();
    SimHarness clean(scenario(30));
    clean.provider.advance(t0() + days(1));
    const auto base = clean.provider.scenario().base_url;

    auto r = invoke({"--config", cfg, "--now", "2005-01-02", "--json", "register", "--base-url", base, "--title",
                     "Simulated collection"},
                    &clean.transport);
    ASSERT_EQ(r.code, cli::kExitOk) << r.out << r.err;
    const std::string cid = r.parsed()["collection_id"];

    r = invoke({"--config", cfg, "--now", "2005-01-02", "--json", "harvest", "--collection", cid}, &clean.transport);
    ASSERT_EQ(r.code, cli::kExitOk) << r.out << r.err;
    EXPECT_EQ(r.parsed()["runs"][0]["outcome"], "success");
    EXPECT_EQ(r.parsed()["runs"][0]["inserted"], 30);

    // Same URL, now broken: the run fails with a category and inserts nothing.
    auto s = scenario(30);
    s.faults.push_back(fault_on_page(sim::FaultKind::Http5xx, 0));
    SimHarness broken(s);
    broken.provider.advance(t0() + days(2));
    r = invoke({"--config", cfg, "--now", "2005-01-03", "--json", "harvest", "--collection", cid}, &broken.transport);
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_EQ(r.parsed()["runs"][0]["outcome"], "failure");
    EXPECT_EQ(r.parsed()["runs"][0]["category"], "Transient");

    r = invoke({"--config", cfg, "--now", "2005-01-03", "--json", "stats"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    registry::RegistryOptions ro;
    ro.data_dir = d.path / "data" / "registry";
    registry::Registry reloaded(ro);
    EXPECT_EQ(r.parsed(), json::parse(registry::stats_to_json(reloaded.stats())));
    EXPECT_EQ(r.parsed()["attempts"], 2);

    r = invoke({"--config", cfg, "--now", "2005-01-03", "--json", "search", "--limit", "3", "1"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_GT(r.parsed()["total"].get<int>(), 0) << r.out;
    EXPECT_LE(r.parsed()["hits"].size(), 3u);

    r = invoke({"--config", cfg, "--json", "index", "--naive-identifier"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    r = invoke({"--config", cfg, "--json", "index"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(r.parsed()["records"], 30);
    EXPECT_TRUE(fs::exists(d.path / "data" / "index" / "entities.json"));
    r = invoke({"--config", cfg, "--json", "dedup-report"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_EQ(r.parsed()["records"], 30);
}

TEST(Cli, IngestRejectsMalformedDocument) {
    DataDir d;
    write(d.path / "bad.xml", "<dbInsert><record>");
    auto r = invoke({"--config", config(d).string(), "ingest", (d.path / "bad.xml").string()});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.err.find("malformed"), std::string::npos) << r.err;
}

TEST(Cli, PipelineScenarioMatchesGroundTruth) {
    DataDir d;
    auto s = scenario(40);
    write(d.path / "scenario.json", sim::dump_scenario(s));
    auto r = invoke({"--data-dir", (d.path / "data").string(), "--json", "pipeline", "--scenario",
                     (d.path / "scenario.json").string(), "--query", "7"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.out << r.err;
    const auto j = r.parsed();
    EXPECT_EQ(j["ground_truth"], 40);
    EXPECT_EQ(j["stored"].get<int>() + j["excluded"].get<int>(), 40);
    EXPECT_EQ(j["metadata_documents"], j["stored"]);
    EXPECT_FALSE(j["hits"].empty());
}

TEST(Cli, ShippedProfileMatchesBuiltIn) {
    std::ifstream in(HARVESTKIT_DATA_DIR "/nsdl_dc_profile.json");
    ASSERT_TRUE(in);
    const auto p = oai::DcProfile::from_json(std::string(std::istreambuf_iterator<char>(in), {}));
    const auto& s = oai::DcProfile::standard();
    EXPECT_EQ(p.refinements, s.refinements);
    EXPECT_EQ(p.schemes, s.schemes);
    EXPECT_EQ(p.extra_elements, s.extra_elements);
}
