#include <gtest/gtest.h>

#include <random>

#include "harvestkit/client/client.hpp"
#include "harvestkit/ingest/dbinsert.hpp"
#include "harvestkit/net.hpp"
#include "harvestkit/server/oai_server.hpp"
#include "harvestkit/validator/validator.hpp"
#include "harvestkit/xml.hpp"

using namespace harvestkit;
using namespace harvestkit::server;
using oai::DcElement;

namespace {

const Instant kT = make_instant(2006, 1, 25, 12);
const std::string kBase = "http://aggregator.example.org/oai";

oai::MetadataRecord item(int n) {
    oai::MetadataRecord r;
    r.header = {"oai:p:" + std::to_string(n), make_instant(2005, 6, 1), {}, false};
    r.format_prefix = "oai_dc";
    r.elements = {{"title", "", "", "Record " + std::to_string(n), ""},
                  {"identifier", "", "", "http://example.org/" + std::to_string(n), ""}};
    r.raw_xml = oai::serialize_dc_payload("oai_dc", r.elements);
    return r;
}

// Repository with `n` items inserted one minute apart from kT, published.
struct Fixture {
    explicit Fixture(int n, bool native_public = true, std::size_t page_size = 10) {
        repo.add_collection("c0001", {{"title", "", "", "Collection", ""}}, native_public, kT - days(1));
        for (int i = 1; i <= n; ++i)
            repo.insert(ingest::normalize_batch({item(i)}, "c0001", "a1"), kT + Seconds{60 * i});
        repo.publish(kT + Seconds{60 * n});
        ServerConfig cfg;
        cfg.base_url = kBase;
        cfg.page_size = page_size;
        server = std::make_unique<OaiServer>(cfg, [this] { return repo.current(); }, clock);
        transport.mount(kBase, server->handler());
        clock.set(kT + days(1));
    }

    client::OaiClient client() {
        client::ClientOptions o;
        o.sleeper = &sleeper;
        return client::OaiClient(transport, o);
    }

    std::string get(const net::QueryArgs& args, Instant now) { return server->handle_at(args, now).body; }

    repository::Repository repo;
    ManualClock clock;
    std::unique_ptr<OaiServer> server;
    net::LoopbackTransport transport;
    client::RecordingSleeper sleeper;
};

std::vector<std::pair<std::string, Instant>> headers(client::OaiClient& c, std::optional<Instant> from,
                                                     std::optional<Instant> until, std::string prefix = "oai_dc") {
    auto r = c.list_identifiers({kBase, std::move(prefix), "", oai::Granularity::Second}, from, until);
    EXPECT_FALSE(r.failure) << (r.failure ? r.failure->detail : "");
    std::vector<std::pair<std::string, Instant>> out;
    for (const auto& h : r.headers) out.emplace_back(h.identifier, h.datestamp);
    return out;
}

std::string error_code(const std::string& body) {
    auto root = xml::parse(body);
    if (!root) return "unparseable";
    const auto* e = root->child("error");
    return e ? *e->attribute("code") : "";
}

}  // namespace

TEST(OaiServer, PastWindowIsRepeatable) {
    Fixture f(30);
    auto c = f.client();
    const Instant from = kT + hours(3) + Seconds{300};
    const Instant until = kT + hours(3) + Seconds{1200};
    auto a = headers(c, from, until);
    auto b = headers(c, from, until);
    EXPECT_EQ(a.size(), 16u);
    EXPECT_EQ(a, b);
}

TEST(OaiServer, RecordsAreInvisibleUntilServedDatestamp) {
    Fixture f(0);
    f.repo.insert(ingest::normalize_batch({item(1)}, "c0001", "a2"), kT);
    f.repo.publish(kT);
    const std::string id = f.repo.repo_identifier("c0001", "oai:p:1");
    const net::QueryArgs early{{"verb", "ListIdentifiers"}, {"metadataPrefix", "oai_dc"},
                               {"until", format_datestamp(kT + hours(1))}};
    EXPECT_EQ(f.get(early, kT + hours(1)).find(id), std::string::npos);
    EXPECT_EQ(error_code(f.get({{"verb", "GetRecord"}, {"identifier", id}, {"metadataPrefix", "oai_dc"}}, kT + hours(1))),
              "idDoesNotExist");
    const net::QueryArgs covering{{"verb", "ListIdentifiers"}, {"metadataPrefix", "oai_dc"},
                                  {"until", format_datestamp(kT + hours(3))}};
    EXPECT_EQ(f.get(covering, kT + hours(3) - Seconds{1}).find(id), std::string::npos);
    EXPECT_NE(f.get(covering, kT + hours(3)).find(id), std::string::npos);
}

TEST(OaiServer, NsdlAllOmitsPrivateNative) {
    Fixture f(1, false);
    const std::string id = f.repo.repo_identifier("c0001", "oai:p:1");
    const auto all = f.get({{"verb", "GetRecord"}, {"identifier", id}, {"metadataPrefix", "nsdl_all"}}, kT + days(1));
    const auto search = f.get({{"verb", "GetRecord"}, {"identifier", id}, {"metadataPrefix", "nsdl_search"}}, kT + days(1));
    EXPECT_EQ(all.find("<native"), std::string::npos);
    EXPECT_NE(search.find("<native"), std::string::npos);
    EXPECT_NE(all.find("<memberOf>"), std::string::npos);
}

TEST(OaiServer, PagingArithmetic) {
    Fixture f(24);  // + the collection record = 25 visible
    auto c = f.client();
    std::vector<oai::ListRecordsPage> pages;
    auto r = c.list_records({kBase, "oai_dc", "", oai::Granularity::Second}, {}, {},
                            [&](const oai::ListRecordsPage& p) { pages.push_back(p); });
    ASSERT_TRUE(r.ok()) << r.failure_detail();
    ASSERT_EQ(pages.size(), 3u);
    EXPECT_EQ(r.records.size(), 25u);
    for (std::size_t i = 0; i < 3; ++i) {
        ASSERT_TRUE(pages[i].token);
        EXPECT_EQ(pages[i].token->complete_list_size, 25u);
        EXPECT_EQ(pages[i].token->cursor, i * 10);
    }
    EXPECT_TRUE(pages[2].token->token.empty());
}

TEST(OaiServer, TokensRoundTripAndGoStale) {
    TokenState s{"abc", "ListRecords", "oai_dc", "c0001", "2006-01-01", "", 20, kT, kT + hours(1)};
    const std::string key = "k";
    EXPECT_EQ(decode_token(mint_token(s, key), key), s);
    auto tampered = mint_token(s, key);
    tampered[3] = tampered[3] == 'A' ? 'B' : 'A';
    EXPECT_FALSE(decode_token(tampered, key));
    EXPECT_FALSE(decode_token(mint_token(s, key), "other"));

    Fixture f(15);
    const Instant now = kT + days(1);
    auto first = f.get({{"verb", "ListRecords"}, {"metadataPrefix", "oai_dc"}}, now);
    auto root = xml::parse(first);
    const std::string token = root->child("ListRecords")->child("resumptionToken")->text;
    ASSERT_FALSE(token.empty());
    auto resolved = f.server->resolve_token(token, now);
    ASSERT_TRUE(resolved);
    EXPECT_EQ(resolved->position, 10u);
    EXPECT_EQ(resolved->snapshot_id, f.repo.current()->id());
    EXPECT_EQ(error_code(f.get({{"verb", "ListRecords"}, {"resumptionToken", token}}, now)), "");
    EXPECT_EQ(error_code(f.get({{"verb", "ListRecords"}, {"resumptionToken", token}}, now + days(2))),
              "badResumptionToken");
    EXPECT_EQ(error_code(f.get({{"verb", "ListRecords"}, {"resumptionToken", "garbage"}}, now)), "badResumptionToken");
    EXPECT_EQ(error_code(f.get({{"verb", "ListIdentifiers"}, {"resumptionToken", token}}, now)), "badResumptionToken");

    f.repo.insert(ingest::normalize_batch({item(99)}, "c0001", "a9"), now);
    f.repo.publish(now);
    EXPECT_EQ(error_code(f.get({{"verb", "ListRecords"}, {"resumptionToken", token}}, now)), "badResumptionToken");
}

TEST(OaiServer, ProtocolErrors) {
    Fixture f(3);
    const Instant now = kT + days(1);
    EXPECT_EQ(error_code(f.get({{"verb", "Nope"}}, now)), "badVerb");
    EXPECT_EQ(error_code(f.get({{"verb", "ListRecords"}, {"metadataPrefix", "mods"}}, now)), "cannotDisseminateFormat");
    EXPECT_EQ(error_code(f.get({{"verb", "GetRecord"}, {"identifier", "oai:x:1"}, {"metadataPrefix", "oai_dc"}}, now)),
              "idDoesNotExist");
    EXPECT_EQ(error_code(f.get({{"verb", "ListRecords"}, {"metadataPrefix", "oai_dc"}, {"set", "c0404"}}, now)),
              "noRecordsMatch");
    EXPECT_EQ(error_code(f.get({{"verb", "ListRecords"}}, now)), "badArgument");
    const auto sets = f.get({{"verb", "ListSets"}}, now);
    EXPECT_EQ(error_code(sets), "");
    EXPECT_NE(sets.find("<setSpec>c0001</setSpec>"), std::string::npos);
    const auto identify = f.get({{"verb", "Identify"}}, now);
    EXPECT_NE(identify.find("<deletedRecord>persistent</deletedRecord>"), std::string::npos);
    EXPECT_NE(identify.find("<granularity>YYYY-MM-DDThh:mm:ssZ</granularity>"), std::string::npos);
    const auto formats = f.get({{"verb", "ListMetadataFormats"}}, now);
    for (const char* p : {"nsdl_dc", "oai_dc", "nsdl_links", "nsdl_search", "nsdl_all"})
        EXPECT_NE(formats.find(std::string("<metadataPrefix>") + p + "<"), std::string::npos) << p;
}

TEST(OaiServer, DeletedRecordsStayAsHeaders) {
    Fixture f(3);
    const std::string id = f.repo.repo_identifier("c0001", "oai:p:2");
    f.repo.mark_deleted(id, kT + hours(1));
    f.repo.publish(kT + hours(1));
    auto body = f.get({{"verb", "GetRecord"}, {"identifier", id}, {"metadataPrefix", "nsdl_dc"}}, kT + days(1));
    EXPECT_NE(body.find("status=\"deleted\""), std::string::npos);
    EXPECT_EQ(body.find("<metadata>"), std::string::npos);
}

// Window contents do not depend on page size or on when within the
// snapshot the pages are fetched.
TEST(OaiServer, WindowStableAcrossPagingAndTime) {
    std::mt19937 rng(5);
    Fixture big(40, true, 7);
    Fixture small(40, true, 3);
    auto cb = big.client();
    auto cs = small.client();
    for (int i = 0; i < 20; ++i) {
        Instant a = kT + hours(3) + Seconds{static_cast<long>(rng() % 3000)};
        Instant b = a + Seconds{static_cast<long>(rng() % 3000)};
        auto x = headers(cb, a, b);
        big.clock.advance(days(1));
        auto y = headers(cb, a, b);
        auto z = headers(cs, a, b);
        EXPECT_EQ(x, y);
        EXPECT_EQ(x, z);
    }
}

TEST(OaiServer, SelfHarvestValidates) {
    Fixture f(60);
    for (int i : {5, 17, 33}) f.repo.mark_deleted(f.repo.repo_identifier("c0001", "oai:p:" + std::to_string(i)), kT + hours(2));
    f.repo.publish(kT + hours(2));
    auto c = f.client();
    auto report = validator::validate_provider(c, kBase, f.clock);
    EXPECT_EQ(report.verdict, validator::Verdict::Pass) << validator::report_to_json(report);
    EXPECT_EQ(report.error_count(), 0u);
}
