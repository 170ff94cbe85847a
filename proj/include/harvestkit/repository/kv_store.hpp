#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace harvestkit::repository {

/// Ordered string map with an optional append-only JSON-lines log. Each
/// mutation is one line; opening the store replays the log. Not
/// thread-safe: the repository serializes writers.
class KvStore {
public:
    KvStore() = default;  // memory only
    explicit KvStore(std::filesystem::path log_file);

    void put(std::string key, std::string value);
    void erase(const std::string& key);
    std::optional<std::string> get(std::string_view key) const;
    bool contains(std::string_view key) const { return map_.find(key) != map_.end(); }

    /// Entries whose key starts with prefix, in key order.
    std::vector<std::pair<std::string, std::string>> scan(std::string_view prefix = {}) const;
    std::size_t size() const noexcept { return map_.size(); }

    /// Replaces the whole contents; the log is rewritten atomically.
    void replace_all(std::map<std::string, std::string, std::less<>> entries);
    /// Rewrites the log with only live entries.
    void compact();

private:
    void append(std::string_view line);

    std::map<std::string, std::string, std::less<>> map_;
    std::optional<std::filesystem::path> file_;
};

}  // namespace harvestkit::repository
