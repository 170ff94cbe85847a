#include "harvestkit/index/url.hpp"

#include <cctype>
#include <vector>

namespace harvestkit::index {

namespace {

bool unreserved(unsigned char c) { return std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~'; }

bool allowed(unsigned char c) {
    static constexpr std::string_view reserved = ":/?#[]@!$&'()*+,;=";
    return unreserved(c) || reserved.find(static_cast<char>(c)) != std::string_view::npos;
}

int hexval(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Uppercases escapes and decodes the ones that stand for unreserved characters.
bool normalize_escapes(std::string_view in, std::string& out) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    for (std::size_t i = 0; i < in.size(); ++i) {
        const auto c = static_cast<unsigned char>(in[i]);
        if (c != '%') {
            if (!allowed(c)) return false;
            out += static_cast<char>(c);
            continue;
        }
        if (i + 2 >= in.size()) return false;
        const int hi = hexval(in[i + 1]), lo = hexval(in[i + 2]);
        if (hi < 0 || lo < 0) return false;
        const auto v = static_cast<unsigned char>(hi * 16 + lo);
        if (unreserved(v)) {
            out += static_cast<char>(v);
        } else {
            out += '%';
            out += kHex[hi];
            out += kHex[lo];
        }
        i += 2;
    }
    return true;
}

// The remove_dot_segments algorithm of the URI generic syntax.
std::string remove_dot_segments(std::string_view in) {
    std::string out;
    while (!in.empty()) {
        if (in.starts_with("../")) {
            in.remove_prefix(3);
        } else if (in.starts_with("./")) {
            in.remove_prefix(2);
        } else if (in.starts_with("/./")) {
            in.remove_prefix(2);
        } else if (in == "/.") {
            in = "/";
        } else if (in.starts_with("/../") || in == "/..") {
            in = in.size() == 3 ? std::string_view("/") : in.substr(3);
            const auto cut = out.rfind('/');
            out.erase(cut == std::string::npos ? 0 : cut);
        } else if (in == "." || in == "..") {
            in = {};
        } else {
            const auto next = in.find('/', 1);
            const auto seg = in.substr(0, next);
            out += seg;
            in.remove_prefix(seg.size());
        }
    }
    return out;
}

Unexpected<UnparseableUrl> fail(std::string m) { return unexpected(UnparseableUrl{std::move(m)}); }

}  // namespace

Expected<NormalizedUrl, UnparseableUrl> normalize_url(std::string_view url) {
    const std::string original(url);
    if (auto hash = url.find('#'); hash != std::string_view::npos) url = url.substr(0, hash);

    const auto colon = url.find("://");
    if (colon == std::string_view::npos) return fail("no scheme");
    const std::string scheme = lower(url.substr(0, colon));
    int default_port = 0;
    if (scheme == "http") default_port = 80;
    else if (scheme == "https") default_port = 443;
    else if (scheme == "ftp") default_port = 21;
    else return fail("unsupported scheme " + scheme);

    std::string_view rest = url.substr(colon + 3);
    const auto auth_end = rest.find_first_of("/?");
    std::string_view authority = rest.substr(0, auth_end);
    rest = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);

    // Credentials do not change which resource is named.
    if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
    std::string_view host = authority;
    std::string_view port;
    if (host.starts_with('[')) {
        const auto close = host.find(']');
        if (close == std::string_view::npos) return fail("unterminated IPv6 literal");
        port = host.substr(close + 1);
        host = host.substr(0, close + 1);
        if (!port.empty() && port.front() != ':') return fail("junk after IPv6 literal");
        if (!port.empty()) port.remove_prefix(1);
    } else if (auto c = host.rfind(':'); c != std::string_view::npos) {
        port = host.substr(c + 1);
        host = host.substr(0, c);
    }
    if (host.empty()) return fail("empty host");
    std::string h;
    if (!normalize_escapes(host, h)) return fail("bad host");
    h = lower(h);
    if (h.front() == '[') {
        for (unsigned char c : std::string_view(h).substr(1, h.size() - 2))
            if (!(std::isxdigit(c) || c == ':' || c == '.')) return fail("bad IPv6 literal");
    } else {
        for (unsigned char c : h)
            if (!(std::isalnum(c) || c == '-' || c == '.')) return fail("bad host");
        if (h.front() == '.' || h.find("..") != std::string::npos) return fail("empty host label");
    }

    std::string out = scheme + "://" + h;
    if (!port.empty()) {
        long p = 0;
        for (unsigned char c : port) {
            if (!std::isdigit(c)) return fail("bad port");
            p = p * 10 + (c - '0');
            if (p > 65535) return fail("port out of range");
        }
        if (p != default_port) out += ':' + std::to_string(p);
    }

    const auto q = rest.find('?');
    std::string path, query;
    if (!normalize_escapes(rest.substr(0, q), path)) return fail("bad path escape");
    if (q != std::string_view::npos && !normalize_escapes(rest.substr(q + 1), query)) return fail("bad query escape");
    // Escapes are settled first so a decoded "%2E" cannot leave a dot
    // segment behind for a second pass to find.
    path = remove_dot_segments(path);
    out += path.empty() ? "/" : path;
    if (q != std::string_view::npos) out += '?' + query;
    return NormalizedUrl{out, original};
}

}  // namespace harvestkit::index
