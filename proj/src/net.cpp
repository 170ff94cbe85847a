#include "harvestkit/net.hpp"

#include <httplib.h>

#include <cctype>
#include <thread>

namespace harvestkit::net {

std::string_view to_string(TransportError::Kind k) {
    switch (k) {
        case TransportError::Kind::Refused: return "connection refused";
        case TransportError::Kind::Timeout: return "timeout";
        case TransportError::Kind::Dns: return "name resolution failed";
        case TransportError::Kind::Reset: return "connection reset";
        case TransportError::Kind::Other: return "transport failure";
    }
    return "transport failure";
}

std::string percent_encode(std::string_view s) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += kHex[c >> 4];
            out += kHex[c & 0xF];
        }
    }
    return out;
}

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::string percent_decode(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            const int hi = hex_value(s[i + 1]);
            const int lo = hex_value(s[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out += static_cast<char>(hi * 16 + lo);
                i += 2;
                continue;
            }
        }
        out += s[i] == '+' ? ' ' : s[i];
    }
    return out;
}

QueryArgs parse_query(std::string_view query) {
    QueryArgs args;
    while (!query.empty()) {
        const auto amp = query.find('&');
        const std::string_view pair = query.substr(0, amp);
        if (!pair.empty()) {
            const auto eq = pair.find('=');
            if (eq == std::string_view::npos) args.emplace_back(percent_decode(pair), "");
            else args.emplace_back(percent_decode(pair.substr(0, eq)), percent_decode(pair.substr(eq + 1)));
        }
        if (amp == std::string_view::npos) break;
        query.remove_prefix(amp + 1);
    }
    return args;
}

std::string build_url(std::string_view base_url, const QueryArgs& args) {
    std::string url(base_url);
    char sep = base_url.find('?') == std::string_view::npos ? '?' : '&';
    for (const auto& [k, v] : args) {
        url += sep;
        url += percent_encode(k);
        url += '=';
        url += percent_encode(v);
        sep = '&';
    }
    return url;
}

UrlParts split_http_url(std::string_view url) {
    UrlParts parts;
    const auto colon = url.find("://");
    if (colon == std::string_view::npos) throw std::invalid_argument("not an absolute URL: " + std::string(url));
    parts.scheme = std::string(url.substr(0, colon));
    for (auto& c : parts.scheme) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (parts.scheme != "http" && parts.scheme != "https")
        throw std::invalid_argument("unsupported URL scheme: " + parts.scheme);
    std::string_view rest = url.substr(colon + 3);
    const auto slash = rest.find_first_of("/?");
    std::string_view authority = rest.substr(0, slash);
    parts.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    if (!parts.path.empty() && parts.path.front() == '?') parts.path.insert(parts.path.begin(), '/');
    parts.port = parts.scheme == "https" ? 443 : 80;
    const auto port_colon = authority.rfind(':');
    if (port_colon != std::string_view::npos && authority.find(']', port_colon) == std::string_view::npos) {
        const std::string port(authority.substr(port_colon + 1));
        if (port.empty() || port.find_first_not_of("0123456789") != std::string::npos)
            throw std::invalid_argument("bad port in URL: " + std::string(url));
        parts.port = std::stoi(port);
        authority = authority.substr(0, port_colon);
    }
    if (authority.empty()) throw std::invalid_argument("URL without host: " + std::string(url));
    parts.host = std::string(authority);
    return parts;
}

HttpResponse HttpTransport::get(const std::string& url) {
    UrlParts parts;
    try {
        parts = split_http_url(url);
    } catch (const std::invalid_argument& e) {
        throw TransportError(TransportError::Kind::Other, e.what());
    }
    if (parts.scheme != "http") throw TransportError(TransportError::Kind::Other, "https is not supported: " + url);
    httplib::Client client(parts.host, parts.port);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    client.set_follow_location(true);
    httplib::Headers headers{{"User-Agent", options_.user_agent}};
    std::string body;
    bool too_large = false;
    auto result = client.Get(parts.path, headers, [&](const char* data, std::size_t len) {
        if (body.size() + len > options_.max_body_bytes) {
            too_large = true;
            return false;
        }
        body.append(data, len);
        return true;
    });
    if (too_large) throw TransportError(TransportError::Kind::Other, "response body too large: " + url);
    if (!result) {
        const auto err = result.error();
        TransportError::Kind kind = TransportError::Kind::Other;
        if (err == httplib::Error::Connection) kind = TransportError::Kind::Refused;
        else if (err == httplib::Error::ConnectionTimeout) kind = TransportError::Kind::Timeout;
        else if (err == httplib::Error::Read || err == httplib::Error::Write) kind = TransportError::Kind::Reset;
        throw TransportError(kind, httplib::to_string(err) + ": " + url);
    }
    HttpResponse response;
    response.status = result->status;
    response.body = std::move(body);
    response.content_type = result->get_header_value("Content-Type");
    return response;
}

void LoopbackTransport::mount(std::string base_url, Handler handler) {
    std::lock_guard lock(mutex_);
    routes_[std::move(base_url)] = std::move(handler);
}

HttpResponse LoopbackTransport::get(const std::string& url) {
    const auto q = url.find('?');
    const std::string base = url.substr(0, q);
    Handler handler;
    {
        std::lock_guard lock(mutex_);
        auto it = routes_.find(base);
        if (it == routes_.end()) throw TransportError(TransportError::Kind::Refused, "connection refused: " + base);
        handler = it->second;
    }
    HttpResponse r = handler(q == std::string::npos ? QueryArgs{} : parse_query(std::string_view(url).substr(q + 1)));
    if (r.disconnect) throw TransportError(TransportError::Kind::Reset, "connection closed by peer: " + base);
    return r;
}

struct HttpServer::Impl {
    httplib::Server server;
    std::thread thread;
};

HttpServer::HttpServer(Handler handler, const std::string& host, int port) : impl_(std::make_unique<Impl>()), host_(host) {
    auto serve = [handler](const httplib::Request& req, httplib::Response& res) {
        QueryArgs args;
        for (const auto& [k, v] : req.params) args.emplace_back(k, v);
        if (req.method == "POST" && req.get_header_value("Content-Type").starts_with("application/x-www-form-urlencoded")) {
            for (auto& kv : parse_query(req.body)) args.push_back(std::move(kv));
        }
        HttpResponse r = handler(args);
        if (r.disconnect) {
            // Promise a body and hang up before sending it.
            res.set_content_provider(1024, "text/xml",
                                     [](std::size_t, std::size_t, httplib::DataSink&) { return false; });
            return;
        }
        res.status = r.status;
        res.set_content(std::move(r.body), r.content_type);
    };
    impl_->server.Get(".*", serve);
    impl_->server.Post(".*", serve);
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port(host);
    } else {
        if (!impl_->server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
        port_ = port;
    }
    if (port_ <= 0) throw std::runtime_error("cannot bind " + host);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

HttpServer::~HttpServer() { stop(); }

std::string HttpServer::base_url(std::string_view path) const {
    return "http://" + host_ + ":" + std::to_string(port_) + std::string(path);
}

void HttpServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void HttpServer::wait() {
    if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace harvestkit::net
