#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "harvestkit/net.hpp"
#include "harvestkit/oai/protocol.hpp"
#include "harvestkit/repository/repository.hpp"
#include "harvestkit/time.hpp"

namespace harvestkit::server {

struct ServerConfig {
    std::size_t page_size = 100;
    std::string repository_name = "harvestkit aggregator";
    std::string base_url = "http://localhost:8080/oai";
    std::string admin_email = "admin@example.org";
    std::string repository_identifier = "nsdl.example.org";
    Seconds token_ttl = hours(24);
    /// HMAC key for resumption tokens.
    std::string token_key = "harvestkit-default-token-key";
};

/// Everything a list request needs to continue, carried inside the token.
struct TokenState {
    std::string snapshot_id;
    std::string verb;
    std::string metadata_prefix;
    std::string set;
    std::string from;   // as requested, may be empty
    std::string until;  // as requested, may be empty
    std::size_t position = 0;
    Instant visible_until{};  // visibility cap fixed by the first page
    Instant expires{};

    bool operator==(const TokenState&) const = default;
};

std::string mint_token(const TokenState& state, std::string_view key);
/// Signature and shape only; expiry and snapshot checks are the server's.
std::optional<TokenState> decode_token(std::string_view token, std::string_view key);

using SnapshotSource = std::function<std::shared_ptr<const repository::ServingSnapshot>()>;

/// Read-only data provider over whatever snapshot the source returns.
class OaiServer {
public:
    OaiServer(ServerConfig config, SnapshotSource snapshots, const Clock& clock);

    net::HttpResponse handle(const net::QueryArgs& args) const;
    net::HttpResponse handle_at(const net::QueryArgs& args, Instant now) const;
    net::Handler handler() const;

    /// Resolves a token against the current snapshot at `now`.
    std::optional<TokenState> resolve_token(std::string_view token, Instant now) const;

    const ServerConfig& config() const noexcept { return config_; }

private:
    ServerConfig config_;
    SnapshotSource snapshots_;
    const Clock& clock_;
};

}  // namespace harvestkit::server
