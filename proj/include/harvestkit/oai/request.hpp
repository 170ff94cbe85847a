#pragma once

#include <optional>
#include <string>
#include <vector>

#include "harvestkit/expected.hpp"
#include "harvestkit/oai/model.hpp"
#include "harvestkit/oai/protocol.hpp"

namespace harvestkit::oai {

/// A syntactically valid protocol request.
struct ParsedRequest {
    std::string verb;
    std::string identifier;
    std::string metadata_prefix;
    std::string set;
    std::string resumption_token;
    std::optional<RequestDate> from;
    std::optional<RequestDate> until;

    /// Inclusive upper bound; a day-granularity `until` covers the whole day.
    std::optional<Instant> until_inclusive() const;
};

/// Checks verb and argument legality the way a data provider must before
/// looking at any data: badVerb / badArgument only.
Expected<ParsedRequest, std::vector<ProtocolError>> parse_request(const RequestArgs& args, Granularity supported);

}  // namespace harvestkit::oai
