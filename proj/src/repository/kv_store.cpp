#include "harvestkit/repository/kv_store.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace harvestkit::repository {

using nlohmann::json;

KvStore::KvStore(std::filesystem::path log_file) : file_(std::move(log_file)) {
    if (file_->has_parent_path()) std::filesystem::create_directories(file_->parent_path());
    std::ifstream in(*file_);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            // A torn final line from an interrupted write is dropped.
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw std::runtime_error(file_->string() + ":" + std::to_string(n) + ": corrupt log line");
        }
        if (j.contains("d")) map_.erase(j.at("k").get<std::string>());
        else map_[j.at("k").get<std::string>()] = j.at("v").get<std::string>();
    }
}

void KvStore::append(std::string_view line) {
    if (!file_) return;
    std::ofstream out(*file_, std::ios::app | std::ios::binary);
    out << line << '\n';
    if (!out) throw std::runtime_error("cannot append to " + file_->string());
}

void KvStore::put(std::string key, std::string value) {
    append(json{{"k", key}, {"v", value}}.dump());
    map_[std::move(key)] = std::move(value);
}

void KvStore::erase(const std::string& key) {
    if (map_.erase(key) == 0) return;
    append(json{{"k", key}, {"d", true}}.dump());
}

std::optional<std::string> KvStore::get(std::string_view key) const {
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::pair<std::string, std::string>> KvStore::scan(std::string_view prefix) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (auto it = map_.lower_bound(prefix); it != map_.end() && it->first.compare(0, prefix.size(), prefix) == 0; ++it)
        out.emplace_back(it->first, it->second);
    return out;
}

void KvStore::replace_all(std::map<std::string, std::string, std::less<>> entries) {
    map_ = std::move(entries);
    compact();
}

void KvStore::compact() {
    if (!file_) return;
    auto tmp = *file_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        for (const auto& [k, v] : map_) out << json{{"k", k}, {"v", v}}.dump() << '\n';
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, *file_);
}

}  // namespace harvestkit::repository
