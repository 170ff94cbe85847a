#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "harvestkit/expected.hpp"
#include "harvestkit/ingest/transform.hpp"
#include "harvestkit/oai/model.hpp"

namespace harvestkit::ingest {

inline constexpr std::string_view kDbInsertNs = "urn:harvestkit:dbinsert:v1";

/// One harvested record and what the transforms made of it. Deleted records
/// carry an empty payload and no normalized elements.
struct DbInsertEntry {
    oai::MetadataRecord original;
    NormalizedRecord normalized;
};

struct DbInsertDocument {
    std::string collection_id;
    std::string attempt_id;
    std::vector<DbInsertEntry> entries;
};

class IdentifierMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Pairs each original with its normalized form. Throws IdentifierMismatch
/// when a pair disagrees on the source identifier.
DbInsertDocument build_db_insert(std::vector<std::pair<oai::MetadataRecord, NormalizedRecord>> pairs,
                                 std::string collection_id, std::string attempt_id);

/// Runs safe_transform over harvested records and builds the document.
DbInsertDocument normalize_batch(const std::vector<oai::MetadataRecord>& records, std::string collection_id,
                                 std::string attempt_id, const TransformConfig& config = {});

std::string serialize_db_insert(const DbInsertDocument& doc);

struct MalformedDocument {
    std::size_t offset = 0;
    std::string message;
};

/// Single forward pass; each entry is handed over as soon as it is complete.
/// Returns the document header (entries left empty).
Expected<DbInsertDocument, MalformedDocument> stream_db_insert(std::string_view xml,
                                                                const std::function<void(DbInsertEntry&&)>& on_entry);

Expected<DbInsertDocument, MalformedDocument> parse_db_insert(std::string_view xml);

}  // namespace harvestkit::ingest
