#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace harvestkit {

using Md5Digest = std::array<std::uint8_t, 16>;

Md5Digest md5(std::string_view bytes);
std::string to_hex(const Md5Digest& d);
std::string md5_hex(std::string_view bytes);

/// HMAC-SHA256, lowercase hex.
std::string hmac_sha256_hex(std::string_view key, std::string_view message);

std::string base64url_encode(std::string_view bytes);
std::optional<std::string> base64url_decode(std::string_view text);

}  // namespace harvestkit
