#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harvestkit/net.hpp"
#include "harvestkit/time.hpp"

namespace harvestkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

struct Config {
    std::optional<std::filesystem::path> data_dir;  // unset: nothing persists
    Seconds postdate_offset = hours(3);
    std::size_t page_size = 100;
    Seconds schedule = days(7);
    std::string domain = "nsdl.example.org";
    std::string base_url = "http://localhost:8080/oai";
    std::string repository_name = "harvestkit aggregator";
    std::string admin_email = "admin@example.org";
    std::string token_key = "harvestkit-default-token-key";
    std::optional<std::filesystem::path> stop_phrases;
    std::optional<std::filesystem::path> profile;
    std::size_t fetch_concurrency = 4;
    long fetch_politeness_ms = 1000;
    std::size_t fetch_max_bytes = 8u << 20;
    int max_retries = 3;
    Seconds retry_base{30};
};

/// Reads the JSON config file; missing keys keep their defaults. Throws
/// std::invalid_argument on non-positive durations or sizes.
Config load_config(const std::filesystem::path& path);
Config config_from_json(std::string_view text);

/// Hooks the tests use to run the tool without sockets or wall time.
struct Environment {
    std::map<std::string, std::string> vars;  // HARVESTKIT_CONFIG is read from here
    net::Transport* transport = nullptr;      // null: live HTTP
    bool no_sleep = false;                    // retries do not wait
};

/// The whole tool. Never throws; errors are rendered to `err`.
int run(const std::vector<std::string>& args, const Environment& env, std::ostream& out, std::ostream& err);

}  // namespace harvestkit::cli
