#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace harvestkit::utf8 {

/// Offset of the first byte of the first ill-formed sequence (RFC 3629:
/// overlongs, surrogates, code points above U+10FFFF and truncated
/// sequences are all rejected), or nullopt when the input is valid.
std::optional<std::size_t> find_invalid(std::string_view bytes) noexcept;

inline bool is_valid(std::string_view bytes) noexcept { return !find_invalid(bytes).has_value(); }

/// Decodes one code point at `pos` of already-validated input and advances `pos`.
char32_t decode_at(std::string_view valid, std::size_t& pos) noexcept;

void append(std::string& out, char32_t cp);

}  // namespace harvestkit::utf8
