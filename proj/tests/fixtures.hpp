#pragma once

// Index fixtures and oracles shared by unit and acceptance tests.

#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "harvestkit/ingest/dbinsert.hpp"
#include "harvestkit/repository/repository.hpp"
#include "support.hpp"

namespace harvestkit::testing {

struct UrlCase {
    const char* input;
    const char* expected;  // nullptr: must be rejected
};

// Hand-derived from the URI generic syntax rules.
inline const std::vector<UrlCase>& url_golden_table() {
    static const std::vector<UrlCase> t{
        {"HTTP://Example.COM:80", "http://example.com/"},
        {"http://example.com", "http://example.com/"},
        {"http://EXAMPLE.com/Path", "http://example.com/Path"},
        {"http://example.com:8080/", "http://example.com:8080/"},
        {"ftp://ftp.example.org:21/pub/", "ftp://ftp.example.org/pub/"},
        {"https://example.com:443/x", "https://example.com/x"},
        {"http://example.com/a/./b/../c", "http://example.com/a/c"},
        {"http://example.com/a/b/c/./../../g", "http://example.com/a/g"},
        {"http://example.com/../a", "http://example.com/a"},
        {"http://example.com/a/..", "http://example.com/"},
        {"http://example.com/%7euser", "http://example.com/~user"},
        {"http://example.com/a%2fb", "http://example.com/a%2Fb"},
        {"http://example.com/%41%42c", "http://example.com/ABc"},
        {"http://example.com/%2e%2E/x", "http://example.com/x"},
        {"http://example.com/p?q=%7e&r=%3d", "http://example.com/p?q=~&r=%3D"},
        {"http://example.com/doc#section", "http://example.com/doc"},
        {"http://example.com?x=1", "http://example.com/?x=1"},
        {"http://example.com:/", "http://example.com/"},
        {"mailto:someone@example.com", nullptr},
        {"http://example.com/%zz", nullptr},
    };
    return t;
}

/// Mostly-URL-shaped strings for normalizer fuzzing.
inline std::string random_url(std::mt19937& rng) {
    static const std::vector<std::string> parts{"a", "B", ".", "..", "%2e", "%7E", "%7e", "%41", "%2F", "%zz", "x y",
                                                "~", "?", "#", "=", "&", ":", "@", "//", "%", "C%3a", "-", "_"};
    static const std::vector<std::string> heads{"http://", "HTTP://", "ftp://", "https://", "Http://", "gopher://", ""};
    static const std::vector<std::string> hosts{"Example.com", "EXAMPLE.org:80", "host:21", "h:443", "[::1]:8080",
                                                "user@host", "", "ex%41mple.com", "a.b:99999"};
    std::string u = heads[rng() % heads.size()] + hosts[rng() % hosts.size()];
    const int n = static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) u += (rng() % 2 ? "/" : "") + parts[rng() % parts.size()];
    return u;
}

/// A repository holding one collection, to which item records are added by
/// raw DC elements and pushed through the normal ingest path.
struct IndexFixture : repository::Repository {
    IndexFixture() { add_collection("c0001", {{"title", "", "", "Fixture collection", ""}}, true, t0()); }

    std::string add(const std::string& source_id, std::vector<oai::DcElement> elements) {
        oai::MetadataRecord r;
        r.header = {source_id, t0(), {}, false};
        r.format_prefix = "oai_dc";
        r.elements = std::move(elements);
        r.raw_xml = oai::serialize_dc_payload("oai_dc", r.elements);
        insert(ingest::normalize_batch({r}, "c0001", "a1"), t0() + hours(1));
        return repo_identifier("c0001", source_id);
    }

    std::shared_ptr<const repository::ServingSnapshot> snapshot() { return publish(t0() + hours(2)); }
};

inline oai::DcElement title(std::string v) { return {"title", "", "", std::move(v), ""}; }
inline oai::DcElement ident(std::string v) { return {"identifier", "", "", std::move(v), ""}; }

struct DedupFixture {
    std::vector<std::vector<oai::DcElement>> records;
    std::size_t identifier_fields = 0;
    std::set<std::string> canonical_urls;  // written by hand, not by normalize_url
};

/// 120 records, 150 identifier fields, 100 distinct fetchable URLs. Twenty
/// records repeat an earlier URL with different spelling; thirty carry a
/// second identifier, half of them not fetchable.
inline DedupFixture dedup_fixture() {
    DedupFixture f;
    auto url = [](std::size_t i) { return "http://host" + std::to_string(i % 7) + ".example.org/item/" + std::to_string(i); };
    for (std::size_t i = 0; i < 100; ++i) {
        f.records.push_back({title("Item " + std::to_string(i)), ident(url(i))});
        f.canonical_urls.insert(url(i));
    }
    for (std::size_t i = 0; i < 20; ++i) {
        const std::size_t j = i * 5;
        std::string spelled = "HTTP://HOST" + std::to_string(j % 7) + ".Example.ORG:80/item/./" + std::to_string(j);
        f.records.push_back({title("Copy " + std::to_string(i)), ident(spelled)});
    }
    for (std::size_t i = 0; i < 30; ++i) {
        auto& r = f.records[i * 4 + 1];
        if (i % 2 == 0) r.push_back(ident(url((i * 4 + 3) % 100) + "#top"));
        else r.push_back(ident("ISBN 0-" + std::to_string(1000 + i)));
    }
    for (const auto& r : f.records)
        for (const auto& e : r)
            if (e.name == "identifier") ++f.identifier_fields;
    return f;
}

/// Brute-force grouping: two records belong together iff a chain of
/// pairwise shared keys connects them. Quadratic on purpose.
inline std::set<std::set<std::string>> connected_groups(const std::map<std::string, std::set<std::string>>& keys) {
    std::vector<std::string> ids;
    for (const auto& [id, k] : keys) ids.push_back(id);
    const std::size_t n = ids.size();
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            for (const auto& k : keys.at(ids[a]))
                if (keys.at(ids[b]).count(k)) adj[a][b] = true;
    std::vector<int> comp(n, -1);
    int next = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<std::size_t> stack{s};
        comp[s] = next;
        while (!stack.empty()) {
            auto x = stack.back();
            stack.pop_back();
            for (std::size_t y = 0; y < n; ++y)
                if (adj[x][y] && comp[y] < 0) {
                    comp[y] = next;
                    stack.push_back(y);
                }
        }
        ++next;
    }
    std::map<int, std::set<std::string>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[comp[i]].insert(ids[i]);
    std::set<std::set<std::string>> out;
    for (auto& [c, g] : groups) out.insert(std::move(g));
    return out;
}

}  // namespace harvestkit::testing
