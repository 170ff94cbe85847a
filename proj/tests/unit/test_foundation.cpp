#include <gtest/gtest.h>

#include <random>

#include "harvestkit/digest.hpp"
#include "harvestkit/net.hpp"
#include "harvestkit/time.hpp"
#include "harvestkit/utf8.hpp"

using namespace harvestkit;

TEST(Time, FormatsDatestampsAndDays) {
    const Instant t = make_instant(2005, 8, 1, 13, 5, 9);
    EXPECT_EQ(format_datestamp(t), "2005-08-01T13:05:09Z");
    EXPECT_EQ(format_day(t), "2005-08-01");
    EXPECT_EQ(format_datestamp(Instant{}), "1970-01-01T00:00:00Z");
    EXPECT_EQ(make_instant(2000, 3, 1) - make_instant(2000, 2, 28), days(2));  // leap year
}

TEST(Time, ManualClockOnlyMovesWhenTold) {
    ManualClock clock(make_instant(2005, 1, 1));
    EXPECT_EQ(clock.now(), make_instant(2005, 1, 1));
    clock.advance(hours(3));
    EXPECT_EQ(clock.now(), make_instant(2005, 1, 1, 3));
    clock.set(make_instant(2006, 1, 1));
    EXPECT_EQ(clock.now(), make_instant(2006, 1, 1));
}

// RFC 1321 appendix A.5 test suite.
TEST(Digest, Md5MatchesReferenceVectors) {
    EXPECT_EQ(md5_hex(""), "d41d8cd98f00b204e9800998ecf8427e");
    EXPECT_EQ(md5_hex("a"), "0cc175b9c0f1b6a831c399e269772661");
    EXPECT_EQ(md5_hex("abc"), "900150983cd24fb0d6963f7d28e17f72");
    EXPECT_EQ(md5_hex("message digest"), "f96b697d7cb7938d525a2f31aaf161d0");
    EXPECT_EQ(md5_hex("abcdefghijklmnopqrstuvwxyz"), "c3fcd3d76192e4007dfb496cca67e13b");
    EXPECT_EQ(md5_hex("12345678901234567890123456789012345678901234567890123456789012345678901234567890"),
              "57edf4a22be3c955ac49da2e2107b67a");
    EXPECT_EQ(md5_hex("hello"), "5d41402abc4b2a76b9719d911017c592");
}

// RFC 4231 test case 2.
TEST(Digest, HmacSha256MatchesReferenceVector) {
    EXPECT_EQ(hmac_sha256_hex("Jefe", "what do ya want for nothing?"),
              "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST(Digest, Base64UrlRoundTripsAndRejectsJunk) {
    // RFC 4648 section 10 vectors, unpadded.
    EXPECT_EQ(base64url_encode("f"), "Zg");
    EXPECT_EQ(base64url_encode("fo"), "Zm8");
    EXPECT_EQ(base64url_encode("foo"), "Zm9v");
    EXPECT_EQ(base64url_encode("foobar"), "Zm9vYmFy");
    EXPECT_EQ(base64url_encode("\xfb\xff"), "-_8");
    std::mt19937 rng(7);
    for (int i = 0; i < 500; ++i) {
        std::string s(rng() % 40, '\0');
        for (auto& c : s) c = static_cast<char>(rng());
        auto back = base64url_decode(base64url_encode(s));
        ASSERT_TRUE(back.has_value());
        EXPECT_EQ(*back, s);
    }
    EXPECT_FALSE(base64url_decode("Zm9v!").has_value());
    EXPECT_FALSE(base64url_decode("Z").has_value());
    EXPECT_FALSE(base64url_decode("Zh").has_value());  // non-zero trailing bits
}

namespace {

std::string encode_cp(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
    return out;
}

}  // namespace

TEST(Utf8, AcceptsEveryScalarValueAndRejectsSurrogates) {
    for (char32_t cp = 0; cp <= 0x10FFFF; ++cp) {
        const std::string s = encode_cp(cp);
        const bool surrogate = cp >= 0xD800 && cp <= 0xDFFF;
        ASSERT_EQ(utf8::is_valid(s), !surrogate) << std::hex << static_cast<unsigned>(cp);
        if (!surrogate) {
            std::size_t pos = 0;
            ASSERT_EQ(utf8::decode_at(s, pos), cp);
            std::string again;
            utf8::append(again, cp);
            ASSERT_EQ(again, s);
        }
    }
}

TEST(Utf8, ReportsOffsetOfFirstBadSequence) {
    EXPECT_EQ(utf8::find_invalid("abc\xC0\x80z"), 3u);         // overlong NUL
    EXPECT_EQ(utf8::find_invalid("\xE0\x80\xAF"), 0u);          // overlong '/'
    EXPECT_EQ(utf8::find_invalid("ok \xED\xA0\x80"), 3u);       // surrogate
    EXPECT_EQ(utf8::find_invalid("\xF4\x90\x80\x80"), 0u);      // above U+10FFFF
    EXPECT_EQ(utf8::find_invalid("xx\xE2\x82"), 2u);            // truncated
    EXPECT_EQ(utf8::find_invalid("\x80"), 0u);                  // stray continuation
    EXPECT_EQ(utf8::find_invalid("\xF5\x80\x80\x80"), 0u);
    EXPECT_EQ(utf8::find_invalid("caf\xC3\xA9 \xFF"), 6u);
    EXPECT_FALSE(utf8::find_invalid("caf\xC3\xA9 \xE2\x82\xAC \xF0\x9F\x98\x80").has_value());
}

TEST(Net, PercentCodingAndQueryParsing) {
    EXPECT_EQ(net::percent_encode("a b&c=d/é"), "a%20b%26c%3Dd%2F%C3%A9");
    EXPECT_EQ(net::percent_decode("a%20b+c%zz"), "a b c%zz");
    auto args = net::parse_query("verb=ListRecords&from=2005-01-01&from=x&flag");
    ASSERT_EQ(args.size(), 4u);
    EXPECT_EQ(args[1], (std::pair<std::string, std::string>{"from", "2005-01-01"}));
    EXPECT_EQ(args[3].first, "flag");
    EXPECT_EQ(net::build_url("http://h/oai", {{"verb", "Identify"}}), "http://h/oai?verb=Identify");
}

TEST(Net, SplitsHttpUrls) {
    auto p = net::split_http_url("http://Example.org:8080/oai?verb=Identify");
    EXPECT_EQ(p.scheme, "http");
    EXPECT_EQ(p.host, "Example.org");
    EXPECT_EQ(p.port, 8080);
    EXPECT_EQ(p.path, "/oai?verb=Identify");
    EXPECT_EQ(net::split_http_url("http://h").path, "/");
    EXPECT_THROW(net::split_http_url("ftp://h/x"), std::invalid_argument);
    EXPECT_THROW(net::split_http_url("http://h:x/"), std::invalid_argument);
}

TEST(Net, LoopbackRoutesByBaseUrl) {
    net::LoopbackTransport t;
    t.mount("http://a/oai", [](const net::QueryArgs& args) {
        net::HttpResponse r;
        r.body = args.empty() ? "none" : args.front().second;
        return r;
    });
    EXPECT_EQ(t.get("http://a/oai?verb=Identify").body, "Identify");
    EXPECT_THROW(t.get("http://b/oai"), net::TransportError);
}

TEST(Net, HttpServerServesAndDisconnects) {
    int calls = 0;
    net::HttpServer server([&](const net::QueryArgs& args) {
        ++calls;
        net::HttpResponse r;
        if (!args.empty() && args.front().second == "drop") r.disconnect = true;
        r.body = "<ok/>";
        return r;
    });
    net::HttpTransport http({std::chrono::seconds{5}});
    auto r = http.get(server.base_url() + "?verb=Identify");
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.body, "<ok/>");
    EXPECT_THROW(http.get(server.base_url() + "?verb=drop"), net::TransportError);
    server.stop();
    try {
        http.get(server.base_url());
        FAIL() << "expected refusal";
    } catch (const net::TransportError& e) {
        EXPECT_EQ(e.kind(), net::TransportError::Kind::Refused);
    }
}
