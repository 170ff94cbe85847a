#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace harvestkit::net {

/// Decoded query arguments in request order; repeats are kept so the
/// protocol layer can reject them.
using QueryArgs = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "text/xml; charset=utf-8";
    /// Drop the connection instead of answering.
    bool disconnect = false;
};

class TransportError : public std::runtime_error {
public:
    enum class Kind { Refused, Timeout, Dns, Reset, Other };
    TransportError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(TransportError::Kind k);

class Transport {
public:
    virtual ~Transport() = default;
    /// Throws TransportError when no HTTP response arrives.
    virtual HttpResponse get(const std::string& url) = 0;
};

std::string percent_encode(std::string_view s);
std::string percent_decode(std::string_view s);
QueryArgs parse_query(std::string_view query);
std::string build_url(std::string_view base_url, const QueryArgs& args);

struct UrlParts {
    std::string scheme;
    std::string host;
    int port = 0;
    std::string path;  // includes the query, if any
};

/// Splits an absolute http(s) URL into connection parts; throws
/// std::invalid_argument on anything else.
UrlParts split_http_url(std::string_view url);

struct HttpOptions {
    std::chrono::seconds timeout{30};
    std::string user_agent = "harvestkit/0.1";
    std::size_t max_body_bytes = 64u << 20;
};

/// Live HTTP over sockets.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(HttpOptions options = {}) : options_(std::move(options)) {}
    HttpResponse get(const std::string& url) override;

private:
    HttpOptions options_;
};

using Handler = std::function<HttpResponse(const QueryArgs&)>;

/// In-process routing by base URL; the same wire bytes without sockets.
class LoopbackTransport final : public Transport {
public:
    void mount(std::string base_url, Handler handler);
    HttpResponse get(const std::string& url) override;

private:
    std::mutex mutex_;
    std::map<std::string, Handler, std::less<>> routes_;
};

/// Serves a handler over HTTP GET and POST (form-encoded) on a background
/// thread until destroyed.
class HttpServer {
public:
    HttpServer(Handler handler, const std::string& host = "127.0.0.1", int port = 0);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    int port() const noexcept { return port_; }
    std::string base_url(std::string_view path = "/oai") const;
    void stop();
    /// Blocks the caller until the server stops.
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
    std::string host_;
};

}  // namespace harvestkit::net
