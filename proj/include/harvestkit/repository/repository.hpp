#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "harvestkit/ingest/dbinsert.hpp"
#include "harvestkit/oai/model.hpp"
#include "harvestkit/repository/kv_store.hpp"
#include "harvestkit/time.hpp"

namespace harvestkit::repository {

inline constexpr std::string_view kFormatNsdlDc = "nsdl_dc";
inline constexpr std::string_view kFormatOaiDc = "oai_dc";
inline constexpr std::string_view kFormatLinks = "nsdl_links";
inline constexpr std::string_view kFormatSearch = "nsdl_search";
inline constexpr std::string_view kFormatAll = "nsdl_all";
inline constexpr std::array<std::string_view, 5> kExportFormats{kFormatNsdlDc, kFormatOaiDc, kFormatLinks, kFormatSearch,
                                                                 kFormatAll};

inline constexpr std::string_view kLinksNs = "urn:harvestkit:nsdl_links:v1";
inline constexpr std::string_view kBundleNs = "urn:harvestkit:bundle:v1";

class UnknownCollection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class UnknownIdentifier : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MissingCollectionRecord : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MalformedDocumentError : public std::runtime_error {
public:
    MalformedDocumentError(std::size_t offset, const std::string& message)
        : std::runtime_error(message), offset(offset) {}
    std::size_t offset;
};

struct ElementRow {
    std::string name;
    std::string qualifier;
    std::string scheme;
    std::string value;
    std::string language;
    std::size_t position = 0;

    bool operator==(const ElementRow&) const = default;
};

std::vector<ElementRow> shred(const std::vector<oai::DcElement>& elements);
std::vector<oai::DcElement> assemble(std::vector<ElementRow> rows);

/// Erases refinements and schemes. Elements with no parent among the
/// fifteen are dropped.
std::vector<oai::DcElement> dumb_down(const std::vector<oai::DcElement>& elements);

/// Membership payload. For the collection record itself pass an empty
/// collection id: no self-membership is emitted.
std::string build_links(std::string_view collection_repo_id);

struct StoredRecord {
    std::string repo_identifier;
    std::string collection_id;
    std::string source_identifier;
    std::string original;  // payload bytes as harvested
    std::string original_format;
    Instant provider_datestamp{};
    std::vector<ElementRow> rows;
    Instant served_datestamp{};
    bool deleted = false;
    bool native_public = true;
    bool is_collection_record = false;
    /// Normalized form failed profile validation; still served.
    bool schema_warning = false;
};

struct CollectionEntry {
    std::string collection_id;
    std::string repo_identifier;  // of its description record
    bool native_public = true;
};

struct RepositoryConfig {
    std::string domain = "nsdl.example.org";
    Seconds postdate_offset = hours(3);
    std::optional<std::filesystem::path> data_dir;  // memory only when unset
    oai::DcProfile profile = oai::DcProfile::standard();  // for schema warnings
};

/// One published record as the server sees it.
struct ServedEntry {
    std::string repo_identifier;
    Instant served_datestamp{};
    bool deleted = false;
    std::string set_spec;  // the collection id
    bool schema_warning = false;
    std::map<std::string, std::string, std::less<>> payloads;  // by format

    bool operator==(const ServedEntry&) const = default;
};

struct SnapshotManifest {
    std::string snapshot_id;
    Instant published_at{};
    std::size_t record_count = 0;
    std::string checksum;  // MD5 of the canonical content
};

/// Immutable once built. Entries are ordered by (served_datestamp, repo_identifier).
class ServingSnapshot {
public:
    ServingSnapshot(std::vector<ServedEntry> entries, Instant published_at);

    const std::vector<ServedEntry>& entries() const noexcept { return entries_; }
    const ServedEntry* find(std::string_view repo_identifier) const;
    const SnapshotManifest& manifest() const noexcept { return manifest_; }
    const std::string& id() const noexcept { return manifest_.snapshot_id; }
    /// Canonical content bytes (the publish instant is not part of them).
    const std::string& content() const noexcept { return content_; }
    std::vector<std::string> set_specs() const;
    std::optional<Instant> earliest_datestamp() const;

private:
    std::vector<ServedEntry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::string content_;
    SnapshotManifest manifest_;
};

std::string manifest_to_json(const SnapshotManifest& m);

struct InsertResult {
    std::vector<std::string> inserted;  // repo identifiers, document order
    std::vector<std::string> deleted;
    /// Source identifiers left out: nothing left to describe the resource.
    std::vector<std::string> excluded;
    /// Deletions for records never stored.
    std::size_t unknown_deletes = 0;
};

class Repository {
public:
    explicit Repository(RepositoryConfig config = {});

    const RepositoryConfig& config() const noexcept { return config_; }

    /// Stores the collection-description record; items of the collection
    /// link to it. Re-adding refreshes the description.
    std::string add_collection(const std::string& collection_id, const std::vector<oai::DcElement>& description,
                               bool native_public, Instant now);
    std::optional<CollectionEntry> collection(std::string_view collection_id) const;

    InsertResult insert(const ingest::DbInsertDocument& doc, Instant now);
    /// Streams a serialized dbInsert document.
    InsertResult insert_xml(std::string_view db_insert_xml, Instant now);

    void mark_deleted(const std::string& repo_identifier, Instant now);
    /// Tombstones every live item of the collection whose source identifier is
    /// not in `keep` (a full harvest is the truth).
    std::vector<std::string> retain_only(const std::string& collection_id,
                                         const std::vector<std::string>& keep_source_ids, Instant now);

    std::shared_ptr<const ServingSnapshot> publish(Instant now);
    std::shared_ptr<const ServingSnapshot> current() const;

    std::optional<StoredRecord> find(std::string_view repo_identifier) const;
    std::optional<std::string> export_payload(std::string_view repo_identifier, std::string_view format) const;
    std::string repo_identifier(std::string_view collection_id, std::string_view source_identifier) const;
    std::vector<StoredRecord> records() const;
    std::size_t size() const;

    /// Repo identifiers of records whose rows satisfy the predicate at least
    /// `min_matches` times.
    std::vector<std::string> query_elements(const std::function<bool(const ElementRow&)>& pred,
                                            std::size_t min_matches = 1) const;
    std::size_t count_with_fetchable_uris(std::size_t k) const;
    std::vector<std::string> uri_identifiers() const;

    /// Loads the last published snapshot from a data directory without
    /// opening the staging stores.
    static std::shared_ptr<const ServingSnapshot> load_snapshot(const std::filesystem::path& data_dir);

private:
    void store(const StoredRecord& r);
    void write_exports(const StoredRecord& r);
    std::optional<StoredRecord> load(std::string_view repo_identifier) const;
    void insert_entry(ingest::DbInsertEntry&& entry, const std::string& collection_id, Instant now, InsertResult& out);

    RepositoryConfig config_;
    mutable std::mutex mu_;
    KvStore input_;
    KvStore exports_;
    KvStore serving_;
    std::shared_ptr<const ServingSnapshot> current_;
};

}  // namespace harvestkit::repository
