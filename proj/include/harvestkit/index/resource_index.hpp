#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "harvestkit/expected.hpp"
#include "harvestkit/index/search.hpp"
#include "harvestkit/index/url.hpp"
#include "harvestkit/net.hpp"
#include "harvestkit/oai/model.hpp"
#include "harvestkit/repository/repository.hpp"

namespace harvestkit::index {

/// What the indexer reads out of one nsdl_search payload.
struct RecordView {
    std::string repo_identifier;
    std::string collection;  // memberOf target
    std::vector<oai::DcElement> elements;
    std::string native_text;
    std::size_t identifier_fields = 0;
    /// Fetchable URLs among the URI identifiers, canonical, deduplicated.
    std::vector<NormalizedUrl> urls;

    bool operator==(const RecordView&) const = default;
};

/// nullopt for collection description records (no memberOf), which are
/// not resources.
std::optional<RecordView> read_search_payload(std::string repo_identifier, std::string_view payload);

IndexDocument record_document(const RecordView& view);

struct MetadataCentricIndex {
    std::string snapshot_id;
    SearchIndex index;
    std::map<std::string, RecordView> records;
    std::map<std::string, std::string> fingerprints;  // repo id -> md5 of payload
};

MetadataCentricIndex build_metadata_centric(const repository::ServingSnapshot& snapshot);

struct UpdateStats {
    std::size_t added = 0;
    std::size_t replaced = 0;
    std::size_t removed = 0;
    std::size_t unchanged = 0;
};

/// Brings an index up to a newer snapshot, touching only documents whose
/// payload changed.
UpdateStats update_metadata_centric(MetadataCentricIndex& index, const repository::ServingSnapshot& snapshot);

std::vector<Hit> search(const MetadataCentricIndex& index, std::string_view query);

enum class MergedBy { UrlOnly, ContentHash };
std::string_view to_string(MergedBy m);

/// canonical URL -> lowercase hex MD5 of the fetched body
using ContentHashes = std::map<std::string, std::string>;

struct ResourceEntity {
    std::string entity_id;
    std::vector<NormalizedUrl> member_urls;   // by canonical
    std::vector<std::string> member_records;  // sorted
    std::optional<std::string> content_hash;  // set when every member URL has this digest
    MergedBy merged_by = MergedBy::UrlOnly;
    /// (canonical url, digest) pairs behind a ContentHash merge, so a
    /// consumer can discount merges through a shared landing page.
    std::vector<std::pair<std::string, std::string>> evidence;
};

struct ResourceCentricIndex {
    MetadataCentricIndex records;
    std::vector<ResourceEntity> entities;  // by entity_id
    std::map<std::string, std::string> entity_of;  // repo id -> entity id
    SearchIndex index;  // one merged document per entity

    const ResourceEntity* entity(std::string_view id) const;
};

/// Phase I unions records sharing a canonical URL; with `hashes`, phase II
/// unions URLs whose content digests are equal. Records without a fetchable
/// URL stay singletons.
ResourceCentricIndex build_resource_centric(MetadataCentricIndex records, const ContentHashes* hashes = nullptr);
ResourceCentricIndex build_resource_centric(const repository::ServingSnapshot& snapshot,
                                            const ContentHashes* hashes = nullptr);

/// An entity matches when any of its member records matches; its score is
/// the best member score. Never more hits than the metadata-centric search.
std::vector<Hit> search(const ResourceCentricIndex& index, std::string_view query);

/// Diagnostic only: one document per dc:identifier field, the construction
/// that overcounts resources.
SearchIndex build_naive_identifier(const repository::ServingSnapshot& snapshot);

struct DedupReport {
    std::size_t records = 0;
    std::size_t identifier_fields = 0;
    std::size_t fetchable_urls = 0;  // distinct canonical
    std::size_t multi_url_records = 0;
    std::size_t records_without_url = 0;
    std::size_t entities = 0;
    std::size_t content_hash_merges = 0;
    /// Entities whose only URL is a site root shared by several records.
    std::vector<std::string> splash_suspects;
};

DedupReport dedup_report(const ResourceCentricIndex& index, std::size_t splash_min_records = 3);
std::string dedup_report_to_json(const DedupReport& r, int indent = 2);
std::string entities_to_json(const std::vector<ResourceEntity>& entities, int indent = -1);

struct FetchError {
    enum class Kind { Timeout, HttpStatus, TooLarge, Unsupported, Network };
    Kind kind;
    int status = 0;
    std::string message;
};
std::string_view to_string(FetchError::Kind k);

class Fetcher {
public:
    virtual ~Fetcher() = default;
    virtual Expected<std::string, FetchError> get(const std::string& url, std::size_t max_bytes) = 0;
};

/// Serves canned bodies; unknown URLs answer 404.
class FixtureFetcher final : public Fetcher {
public:
    void serve(std::string url, std::string body);
    void fail(std::string url, int status);
    Expected<std::string, FetchError> get(const std::string& url, std::size_t max_bytes) override;
    std::size_t requests() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> bodies_;
    std::map<std::string, int> statuses_;
    std::size_t requests_ = 0;
};

/// Live HTTP GET; ftp URLs are reported Unsupported.
class HttpFetcher final : public Fetcher {
public:
    explicit HttpFetcher(net::HttpOptions options = {}) : options_(std::move(options)) {}
    Expected<std::string, FetchError> get(const std::string& url, std::size_t max_bytes) override;

private:
    net::HttpOptions options_;
};

struct FetchedContent {
    std::string body;
    std::string digest;  // lowercase hex MD5
};

inline constexpr std::size_t kDefaultMaxFetchBytes = 8u << 20;

Expected<FetchedContent, FetchError> fetch_content(const NormalizedUrl& url, Fetcher& fetcher,
                                                   std::size_t max_bytes = kDefaultMaxFetchBytes);

struct FetchPoolOptions {
    std::size_t concurrency = 4;
    /// Minimum gap between two requests to the same host.
    std::chrono::milliseconds politeness{0};
    std::size_t max_bytes = kDefaultMaxFetchBytes;
};

struct FetchReport {
    ContentHashes hashes;
    std::map<std::string, FetchError> failures;
};

/// Fetches every URL once with a bounded worker pool. Failed URLs are left
/// out of `hashes`, so their entities stay UrlOnly.
FetchReport fetch_all(const std::vector<std::string>& canonical_urls, Fetcher& fetcher, const FetchPoolOptions& options = {});

std::string hashes_to_json(const ContentHashes& h);
ContentHashes hashes_from_json(std::string_view text);

}  // namespace harvestkit::index
