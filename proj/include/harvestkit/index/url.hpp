#pragma once

#include <string>
#include <string_view>

#include "harvestkit/expected.hpp"

namespace harvestkit::index {

struct NormalizedUrl {
    std::string canonical;
    std::string original;

    bool operator==(const NormalizedUrl&) const = default;
};

struct UnparseableUrl {
    std::string message;
};

/// Canonical form for equivalence tests: lowercase scheme and host, no
/// default port, "/" for an empty path, uppercase percent hex, unreserved
/// characters decoded, dot segments removed. Fragment and userinfo are
/// dropped, the query kept. Accepts http, https and ftp.
Expected<NormalizedUrl, UnparseableUrl> normalize_url(std::string_view url);

}  // namespace harvestkit::index
