#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "fixtures.hpp"
#include "harvestkit/digest.hpp"
#include "harvestkit/index/resource_index.hpp"

using namespace harvestkit;
using namespace harvestkit::index;
using namespace harvestkit::testing;

namespace {

// Properties any canonical URL must have, checked without the normalizer.
void expect_canonical_shape(const std::string& u) {
    static const std::regex shape(R"(^(http|https|ftp)://[^A-Z/?#]+/[^#]*$)");
    EXPECT_TRUE(std::regex_match(u, shape)) << u;
    const std::string path = u.substr(0, u.find('?')) + "/";
    EXPECT_EQ(path.find("/./"), std::string::npos) << u;
    EXPECT_EQ(path.find("/../"), std::string::npos) << u;
    static const std::regex bad_escape(R"(%([0-9A-Fa-f]{2}))");
    for (std::sregex_iterator it(u.begin(), u.end(), bad_escape), end; it != end; ++it) {
        const std::string hex = (*it)[1];
        EXPECT_EQ(hex, [&] {
            std::string up = hex;
            for (auto& c : up) c = static_cast<char>(std::toupper(c));
            return up;
        }()) << u;
        const int v = std::stoi(hex, nullptr, 16);
        EXPECT_FALSE(std::isalnum(v) || v == '-' || v == '.' || v == '_' || v == '~') << u;
    }
    EXPECT_FALSE(u.starts_with("http://") && u.find(":80/") != std::string::npos && u.find(":80/") < u.find('/', 7)) << u;
}

}  // namespace

TEST(NormalizeUrl, GoldenTable) {
    for (const auto& c : url_golden_table()) {
        auto n = normalize_url(c.input);
        if (!c.expected) {
            EXPECT_FALSE(n) << c.input;
            continue;
        }
        ASSERT_TRUE(n) << c.input << ": " << n.error().message;
        EXPECT_EQ(n->canonical, c.expected) << c.input;
        EXPECT_EQ(n->original, c.input);
    }
}

TEST(NormalizeUrl, IdempotentAndCanonicalOnFuzz) {
    std::mt19937 rng(11);
    std::size_t accepted = 0;
    for (int i = 0; i < 20000; ++i) {
        const auto u = random_url(rng);
        auto a = normalize_url(u);
        if (!a) continue;
        ++accepted;
        auto b = normalize_url(a->canonical);
        ASSERT_TRUE(b) << u << " -> " << a->canonical;
        ASSERT_EQ(a->canonical, b->canonical) << u;
        expect_canonical_shape(a->canonical);
    }
    EXPECT_GT(accepted, 5000u);
}

TEST(Search, ConjunctiveTfWithTitleWeight) {
    SearchIndex idx;
    idx.put({"d1", {{"title", "Photosynthesis basics"}, {"text", "plants light"}}, {}, {}});
    idx.put({"d2", {{"title", "Light"}, {"text", "photosynthesis photosynthesis"}}, {}, {}});
    idx.put({"d3", {{"text", "photosynthesis"}}, {}, {}});
    auto hits = idx.search("Photosynthesis");
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_EQ(hits[0], (Hit{"d1", 3.0}));
    EXPECT_EQ(hits[1], (Hit{"d2", 2.0}));
    EXPECT_EQ(idx.search("photosynthesis light").size(), 2u);
    EXPECT_TRUE(idx.search("").empty());
    EXPECT_TRUE(idx.search("photosynthesis absent").empty());
    idx.put({"d1", {{"text", "nothing"}}, {}, {}});
    EXPECT_EQ(idx.search("photosynthesis").size(), 2u);
    EXPECT_TRUE(idx.remove("d2"));
    EXPECT_EQ(idx.search("light").size(), 0u);
}

TEST(Search, TiesBreakByDocId) {
    SearchIndex idx;
    for (auto id : {"z", "m", "a"}) idx.put({id, {{"text", "same"}}, {}, {}});
    auto hits = idx.search("same");
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_EQ(hits[0].doc_id, "a");
    EXPECT_EQ(hits[2].doc_id, "z");
}

TEST(MetadataCentric, OneDocumentPerLiveRecord) {
    IndexFixture repo;
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i)
        ids.push_back(repo.add("r" + std::to_string(i), {title("Record " + std::to_string(i)),
                                                          ident("http://example.org/" + std::to_string(i))}));
    repo.mark_deleted(ids[3], t0() + hours(1));
    auto idx = build_metadata_centric(*repo.snapshot());
    EXPECT_EQ(idx.index.size(), 9u);
    EXPECT_EQ(idx.index.find(ids[3]), nullptr);
    EXPECT_EQ(idx.index.find(ids[0])->resource, "http://example.org/0");
    EXPECT_EQ(search(idx, "record 7").front().doc_id, ids[7]);
}

TEST(MetadataCentric, RecordWithoutValidUrlHasNoResource) {
    IndexFixture repo;
    const auto id = repo.add("bad", {title("Broken link"), {"identifier", "", "URI", "http://exa mple.org/<>", ""}});
    auto idx = build_metadata_centric(*repo.snapshot());
    ASSERT_NE(idx.index.find(id), nullptr);
    EXPECT_FALSE(idx.index.find(id)->resource);
}

TEST(MetadataCentric, IncrementalUpdateTouchesOnlyChanges) {
    IndexFixture repo;
    for (int i = 0; i < 10; ++i) repo.add("r" + std::to_string(i), {title("Record " + std::to_string(i))});
    auto idx = build_metadata_centric(*repo.snapshot());
    repo.add("r2", {title("Record two revised")});
    repo.add("r5", {title("Record five revised")});
    auto st = update_metadata_centric(idx, *repo.snapshot());
    EXPECT_EQ(st.replaced, 2u);
    EXPECT_EQ(st.added, 0u);
    EXPECT_EQ(st.removed, 0u);
    EXPECT_EQ(st.unchanged, 8u);
    EXPECT_EQ(search(idx, "revised").size(), 2u);
    repo.mark_deleted(repo.repo_identifier("c0001", "r2"), t0() + hours(1));
    st = update_metadata_centric(idx, *repo.snapshot());
    EXPECT_EQ(st.removed, 1u);
    EXPECT_EQ(idx.index.size(), 9u);

    // Same documents as a from-scratch build.
    auto fresh = build_metadata_centric(*repo.snapshot());
    EXPECT_EQ(idx.index.documents(), fresh.index.documents());
}

TEST(ResourceCentric, SpellingVariantsShareAnEntity) {
    IndexFixture repo;
    const auto a = repo.add("a", {title("A"), ident("http://X.example/a")});
    const auto b = repo.add("b", {title("B"), ident("HTTP://x.example:80/a")});
    auto rc = build_resource_centric(*repo.snapshot());
    ASSERT_EQ(rc.entities.size(), 1u);
    EXPECT_EQ(rc.entities[0].member_records, (std::vector<std::string>{a, b}));
    EXPECT_EQ(rc.entities[0].merged_by, MergedBy::UrlOnly);
}

TEST(ResourceCentric, DedupFixtureCountsAndOracle) {
    IndexFixture repo;
    const auto f = dedup_fixture();
    for (std::size_t i = 0; i < f.records.size(); ++i) repo.add("rec" + std::to_string(i), f.records[i]);
    auto snap = repo.snapshot();
    auto rc = build_resource_centric(*snap);
    const auto naive = build_naive_identifier(*snap);
    const auto report = dedup_report(rc);
    EXPECT_EQ(naive.size(), 150u);
    EXPECT_EQ(report.records, 120u);
    EXPECT_EQ(report.identifier_fields, 150u);
    EXPECT_EQ(report.fetchable_urls, 100u);
    EXPECT_LE(rc.entities.size(), 100u);

    std::map<std::string, std::set<std::string>> keys;
    for (const auto& [id, v] : rc.records.records) {
        auto& k = keys[id];
        for (const auto& u : v.urls) k.insert(u.canonical);
        if (k.empty()) k.insert("self:" + id);
    }
    std::set<std::set<std::string>> got;
    for (const auto& e : rc.entities) got.insert({e.member_records.begin(), e.member_records.end()});
    EXPECT_EQ(got, connected_groups(keys));

    std::set<std::string> urls;
    for (const auto& [id, v] : rc.records.records)
        for (const auto& u : v.urls) urls.insert(u.canonical);
    EXPECT_EQ(urls, f.canonical_urls);
}

// Random small corpora against the quadratic grouping oracle, with and
// without content digests.
TEST(ResourceCentric, MatchesBruteForceOracle) {
    std::mt19937 rng(17);
    for (int round = 0; round < 12; ++round) {
        IndexFixture repo;
        const int n = 20 + static_cast<int>(rng() % 60);
        const int pool = 5 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) {
            std::vector<oai::DcElement> els{title("R" + std::to_string(i))};
            const int k = static_cast<int>(rng() % 3);
            for (int j = 0; j < k; ++j) els.push_back(ident("http://h.example/" + std::to_string(rng() % pool)));
            repo.add("s" + std::to_string(i), els);
        }
        ContentHashes hashes;
        for (int u = 0; u < pool; ++u)
            if (rng() % 3 == 0) hashes["http://h.example/" + std::to_string(u)] = md5_hex(std::to_string(rng() % 4));
        auto snap = repo.snapshot();
        for (const ContentHashes* h : {static_cast<const ContentHashes*>(nullptr), static_cast<const ContentHashes*>(&hashes)}) {
            auto rc = build_resource_centric(*snap, h);
            std::map<std::string, std::set<std::string>> keys;
            for (const auto& [id, v] : rc.records.records) {
                auto& k = keys[id];
                for (const auto& u : v.urls) {
                    k.insert(u.canonical);
                    if (h && h->count(u.canonical)) k.insert("md5:" + h->at(u.canonical));
                }
                if (k.empty()) k.insert("self:" + id);
            }
            std::set<std::set<std::string>> got;
            std::size_t covered = 0;
            for (const auto& e : rc.entities) {
                EXPECT_FALSE(e.member_records.empty());
                covered += e.member_records.size();
                got.insert({e.member_records.begin(), e.member_records.end()});
                if (e.content_hash) {
                    for (const auto& u : e.member_urls) EXPECT_EQ(h->at(u.canonical), *e.content_hash);
                }
            }
            EXPECT_EQ(covered, rc.records.records.size());
            EXPECT_EQ(got, connected_groups(keys));
            EXPECT_LE(rc.entities.size(), rc.records.records.size());
        }
    }
}

TEST(ResourceCentric, ContentHashMergeNeedsEqualBytes) {
    IndexFixture repo;
    repo.add("a", {title("Mirror one"), ident("http://one.example/page")});
    repo.add("b", {title("Mirror two"), ident("http://two.example/page")});
    repo.add("c", {title("Other"), ident("http://three.example/page")});
    FixtureFetcher fetcher;
    fetcher.serve("http://one.example/page", "<html>same</html>");
    fetcher.serve("http://two.example/page", "<html>same</html>");
    fetcher.serve("http://three.example/page", "<html>different</html>");
    auto report = fetch_all({"http://one.example/page", "http://two.example/page", "http://three.example/page"}, fetcher,
                            {2, std::chrono::milliseconds(0)});
    EXPECT_TRUE(report.failures.empty());
    EXPECT_EQ(report.hashes.at("http://one.example/page"), md5_hex("<html>same</html>"));
    auto rc = build_resource_centric(*repo.snapshot(), &report.hashes);
    ASSERT_EQ(rc.entities.size(), 2u);
    std::size_t merged = 0;
    for (const auto& e : rc.entities)
        if (e.merged_by == MergedBy::ContentHash) {
            ++merged;
            EXPECT_EQ(e.member_records.size(), 2u);
            EXPECT_EQ(e.evidence.size(), 2u);
            EXPECT_EQ(e.content_hash, md5_hex("<html>same</html>"));
        }
    EXPECT_EQ(merged, 1u);
}

TEST(FetchContent, DigestsAndErrors) {
    FixtureFetcher f;
    f.serve("http://x.example/hello", "hello");
    f.fail("http://x.example/gone", 410);
    auto ok = fetch_content({"http://x.example/hello", "http://x.example/hello"}, f);
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->digest, "5d41402abc4b2a76b9719d911017c592");
    EXPECT_EQ(ok->body, "hello");
    auto missing = fetch_content({"http://x.example/none", ""}, f);
    ASSERT_FALSE(missing);
    EXPECT_EQ(missing.error().status, 404);
    EXPECT_EQ(fetch_content({"http://x.example/gone", ""}, f).error().status, 410);
    EXPECT_EQ(fetch_content({"http://x.example/hello", ""}, f, 3).error().kind, FetchError::Kind::TooLarge);
}

TEST(FetchContent, HttpFetcherAgainstLocalServer) {
    net::HttpServer server([](const net::QueryArgs&) { return net::HttpResponse{200, "hello", "text/plain", false}; });
    HttpFetcher f;
    auto got = fetch_content({server.base_url("/x"), ""}, f);
    ASSERT_TRUE(got) << got.error().message;
    EXPECT_EQ(got->digest, "5d41402abc4b2a76b9719d911017c592");
    EXPECT_EQ(f.get("ftp://example.org/", 10).error().kind, FetchError::Kind::Unsupported);
}

TEST(ResourceCentric, HitsCollapseAndDominate) {
    IndexFixture repo;
    repo.add("p1", {title("Photosynthesis lab"), ident("http://labs.example/photo")});
    repo.add("p2", {title("Photosynthesis activity"), ident("HTTP://LABS.example/photo")});
    repo.add("p3", {title("Photosynthesis worksheet"), ident("http://labs.example/./photo#top")});
    repo.add("q", {title("Cell respiration"), ident("http://labs.example/resp")});
    auto rc = build_resource_centric(*repo.snapshot());
    EXPECT_EQ(search(rc.records, "photosynthesis").size(), 3u);
    EXPECT_EQ(search(rc, "photosynthesis").size(), 1u);
    for (auto q : {"photosynthesis", "lab", "cell", "photosynthesis worksheet", "nothing", "example"})
        EXPECT_LE(search(rc, q).size(), search(rc.records, q).size()) << q;
    EXPECT_EQ(rc.index.size(), rc.entities.size());
}

TEST(DedupReport, FlagsSplashPages) {
    IndexFixture repo;
    for (int i = 0; i < 5; ++i) repo.add("s" + std::to_string(i), {title("Item " + std::to_string(i)), ident("http://provider.example.org/")});
    repo.add("t", {title("Elsewhere"), ident("http://provider.example.org/item/9")});
    auto rc = build_resource_centric(*repo.snapshot());
    auto r = dedup_report(rc);
    EXPECT_EQ(r.entities, 2u);
    ASSERT_EQ(r.splash_suspects.size(), 1u);
    EXPECT_EQ(rc.entity(r.splash_suspects[0])->member_records.size(), 5u);
}
