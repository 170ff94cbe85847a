#include "harvestkit/index/resource_index.hpp"

#include <algorithm>
#include <atomic>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <thread>

#include "harvestkit/digest.hpp"
#include "harvestkit/oai/protocol.hpp"
#include "harvestkit/xml.hpp"

namespace harvestkit::index {

using nlohmann::json;

namespace {

void collect_text(const xml::XmlElement& e, std::string& out) {
    if (!e.text.empty()) {
        if (!out.empty()) out += ' ';
        out += e.text;
    }
    for (const auto& c : e.children) collect_text(c, out);
}

const xml::XmlElement* first_child(const xml::XmlElement* e) {
    return e && !e->children.empty() ? &e->children.front() : nullptr;
}

std::string entity_key(const std::string& s) { return "res:" + md5_hex(s).substr(0, 16); }

struct UnionFind {
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::size_t> parent;
};

bool is_site_root(std::string_view canonical) {
    const auto p = canonical.find("://");
    if (p == std::string_view::npos) return false;
    const auto slash = canonical.find('/', p + 3);
    return slash != std::string_view::npos && canonical.substr(slash) == "/";
}

std::string host_of(std::string_view url) {
    const auto p = url.find("://");
    if (p == std::string_view::npos) return {};
    const auto rest = url.substr(p + 3);
    return std::string(rest.substr(0, rest.find('/')));
}

}  // namespace

std::optional<RecordView> read_search_payload(std::string repo_identifier, std::string_view payload) {
    auto root = xml::parse(payload);
    if (!root) throw std::runtime_error("unparseable nsdl_search payload for " + repo_identifier);
    const auto* links = first_child(root->child("nsdl_links"));
    const auto* member = links ? links->child("memberOf") : nullptr;
    if (!member) return std::nullopt;

    RecordView v;
    v.repo_identifier = std::move(repo_identifier);
    v.collection = member->text;
    if (const auto* dc = first_child(root->child("nsdl_dc"))) {
        auto elements = oai::read_dc_payload(*dc, oai::kNsdlDc, oai::DcProfile::standard());
        if (!elements) throw std::runtime_error("bad nsdl_dc in " + v.repo_identifier + ": " + elements.error().message);
        v.elements = std::move(*elements);
    }
    if (const auto* native = root->child("native")) collect_text(*native, v.native_text);

    std::set<std::string> seen;
    for (const auto& e : v.elements) {
        if (e.name != "identifier") continue;
        ++v.identifier_fields;
        if (e.scheme != "URI") continue;
        auto n = normalize_url(e.value);
        if (n && seen.insert(n->canonical).second) v.urls.push_back(std::move(*n));
    }
    return v;
}

IndexDocument record_document(const RecordView& v) {
    IndexDocument d;
    d.doc_id = v.repo_identifier;
    std::string title, text;
    for (const auto& e : v.elements) {
        auto& dst = e.name == "title" ? title : text;
        if (!dst.empty()) dst += ' ';
        dst += e.value;
    }
    d.fields["title"] = std::move(title);
    d.fields["text"] = std::move(text);
    d.fields["native"] = v.native_text;
    d.fields["collection"] = v.collection;
    if (!v.urls.empty()) d.resource = v.urls.front().canonical;
    d.records = {v.repo_identifier};
    return d;
}

MetadataCentricIndex build_metadata_centric(const repository::ServingSnapshot& snapshot) {
    MetadataCentricIndex idx;
    update_metadata_centric(idx, snapshot);
    return idx;
}

UpdateStats update_metadata_centric(MetadataCentricIndex& idx, const repository::ServingSnapshot& snapshot) {
    UpdateStats st;
    std::set<std::string> live;
    for (const auto& e : snapshot.entries()) {
        if (e.deleted) continue;
        auto p = e.payloads.find(std::string(repository::kFormatSearch));
        if (p == e.payloads.end()) continue;
        const std::string fp = md5_hex(p->second);
        live.insert(e.repo_identifier);
        auto old = idx.fingerprints.find(e.repo_identifier);
        if (old != idx.fingerprints.end() && old->second == fp) {
            ++st.unchanged;
            continue;
        }
        auto view = read_search_payload(e.repo_identifier, p->second);
        if (!view) {
            live.erase(e.repo_identifier);
            continue;
        }
        (old == idx.fingerprints.end() ? st.added : st.replaced)++;
        idx.fingerprints[e.repo_identifier] = fp;
        idx.index.put(record_document(*view));
        idx.records[e.repo_identifier] = std::move(*view);
    }
    for (auto it = idx.records.begin(); it != idx.records.end();) {
        if (live.count(it->first)) {
            ++it;
            continue;
        }
        idx.index.remove(it->first);
        idx.fingerprints.erase(it->first);
        it = idx.records.erase(it);
        ++st.removed;
    }
    idx.snapshot_id = snapshot.id();
    return st;
}

std::vector<Hit> search(const MetadataCentricIndex& index, std::string_view query) { return index.index.search(query); }

std::string_view to_string(MergedBy m) { return m == MergedBy::UrlOnly ? "UrlOnly" : "ContentHash"; }

const ResourceEntity* ResourceCentricIndex::entity(std::string_view id) const {
    auto it = std::lower_bound(entities.begin(), entities.end(), id,
                               [](const ResourceEntity& e, std::string_view k) { return e.entity_id < k; });
    return it != entities.end() && it->entity_id == id ? &*it : nullptr;
}

ResourceCentricIndex build_resource_centric(MetadataCentricIndex records, const ContentHashes* hashes) {
    ResourceCentricIndex out;
    std::vector<const RecordView*> views;
    for (const auto& [id, v] : records.records) views.push_back(&v);

    // Phase I: records sharing a canonical URL.
    UnionFind uf(views.size());
    std::map<std::string, std::size_t> owner;
    for (std::size_t i = 0; i < views.size(); ++i)
        for (const auto& u : views[i]->urls) {
            auto [it, fresh] = owner.emplace(u.canonical, i);
            if (!fresh) uf.unite(i, it->second);
        }
    std::vector<std::size_t> phase1(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) phase1[i] = uf.find(i);

    // Phase II: URLs with equal content digests.
    if (hashes) {
        std::map<std::string, std::size_t> by_digest;
        for (const auto& [url, rec] : owner) {
            auto h = hashes->find(url);
            if (h == hashes->end()) continue;
            auto [it, fresh] = by_digest.emplace(h->second, rec);
            if (!fresh) uf.unite(rec, it->second);
        }
    }

    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < views.size(); ++i) groups[uf.find(i)].push_back(i);

    for (const auto& [root, members] : groups) {
        ResourceEntity e;
        std::set<std::size_t> components;
        std::map<std::string, NormalizedUrl> urls;
        for (auto i : members) {
            components.insert(phase1[i]);
            e.member_records.push_back(views[i]->repo_identifier);
            for (const auto& u : views[i]->urls) urls.emplace(u.canonical, u);
        }
        std::sort(e.member_records.begin(), e.member_records.end());
        for (auto& [k, u] : urls) e.member_urls.push_back(u);
        e.entity_id = entity_key(urls.empty() ? e.member_records.front() : urls.begin()->first);
        e.merged_by = components.size() > 1 ? MergedBy::ContentHash : MergedBy::UrlOnly;
        if (hashes && !urls.empty()) {
            std::set<std::string> digests;
            bool all = true;
            for (const auto& [k, u] : urls) {
                auto h = hashes->find(k);
                if (h == hashes->end()) {
                    all = false;
                    continue;
                }
                digests.insert(h->second);
                if (e.merged_by == MergedBy::ContentHash) e.evidence.emplace_back(k, h->second);
            }
            if (all && digests.size() == 1) e.content_hash = *digests.begin();
        }

        IndexDocument d;
        d.doc_id = e.entity_id;
        d.resource = e.entity_id;
        d.records = e.member_records;
        for (const auto& rid : e.member_records) {
            out.entity_of[rid] = e.entity_id;
            for (const auto& [f, text] : records.index.find(rid)->fields) {
                auto& dst = d.fields[f];
                if (!dst.empty() && !text.empty()) dst += '\n';
                dst += text;
            }
        }
        out.index.put(std::move(d));
        out.entities.push_back(std::move(e));
    }
    std::sort(out.entities.begin(), out.entities.end(),
              [](const ResourceEntity& a, const ResourceEntity& b) { return a.entity_id < b.entity_id; });
    out.records = std::move(records);
    return out;
}

ResourceCentricIndex build_resource_centric(const repository::ServingSnapshot& snapshot, const ContentHashes* hashes) {
    return build_resource_centric(build_metadata_centric(snapshot), hashes);
}

std::vector<Hit> search(const ResourceCentricIndex& index, std::string_view query) {
    std::map<std::string, double> best;
    for (const auto& h : index.records.index.search(query)) {
        auto& s = best[index.entity_of.at(h.doc_id)];
        s = std::max(s, h.score);
    }
    std::vector<Hit> hits;
    for (auto& [id, s] : best) hits.push_back({id, s});
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    return hits;
}

SearchIndex build_naive_identifier(const repository::ServingSnapshot& snapshot) {
    SearchIndex out;
    for (const auto& [id, v] : build_metadata_centric(snapshot).records) {
        std::string title;
        for (const auto& e : v.elements)
            if (e.name == "title") title += (title.empty() ? "" : " ") + e.value;
        std::size_t n = 0;
        for (const auto& e : v.elements) {
            if (e.name != "identifier") continue;
            IndexDocument d;
            d.doc_id = id + "#" + std::to_string(n++);
            d.fields["title"] = title;
            d.fields["text"] = e.value;
            d.resource = e.value;
            d.records = {id};
            out.put(std::move(d));
        }
    }
    return out;
}

DedupReport dedup_report(const ResourceCentricIndex& index, std::size_t splash_min_records) {
    DedupReport r;
    std::set<std::string> urls;
    for (const auto& [id, v] : index.records.records) {
        ++r.records;
        r.identifier_fields += v.identifier_fields;
        if (v.urls.size() >= 2) ++r.multi_url_records;
        if (v.urls.empty()) ++r.records_without_url;
        for (const auto& u : v.urls) urls.insert(u.canonical);
    }
    r.fetchable_urls = urls.size();
    r.entities = index.entities.size();
    for (const auto& e : index.entities) {
        if (e.merged_by == MergedBy::ContentHash) ++r.content_hash_merges;
        if (e.member_urls.size() == 1 && is_site_root(e.member_urls.front().canonical) &&
            e.member_records.size() >= splash_min_records)
            r.splash_suspects.push_back(e.entity_id);
    }
    return r;
}

std::string dedup_report_to_json(const DedupReport& r, int indent) {
    return json{{"schema_version", 1},
                {"records", r.records},
                {"identifier_fields", r.identifier_fields},
                {"fetchable_urls", r.fetchable_urls},
                {"multi_url_records", r.multi_url_records},
                {"records_without_url", r.records_without_url},
                {"entities", r.entities},
                {"content_hash_merges", r.content_hash_merges},
                {"splash_suspects", r.splash_suspects}}
        .dump(indent);
}

std::string entities_to_json(const std::vector<ResourceEntity>& entities, int indent) {
    json arr = json::array();
    for (const auto& e : entities) {
        json urls = json::array();
        for (const auto& u : e.member_urls) urls.push_back(u.canonical);
        json ev = json::array();
        for (const auto& [u, d] : e.evidence) ev.push_back({{"url", u}, {"digest", d}});
        arr.push_back({{"entity_id", e.entity_id},
                       {"member_urls", urls},
                       {"member_records", e.member_records},
                       {"content_hash", e.content_hash ? json(*e.content_hash) : json(nullptr)},
                       {"merged_by", to_string(e.merged_by)},
                       {"evidence", ev}});
    }
    return arr.dump(indent);
}

std::string_view to_string(FetchError::Kind k) {
    switch (k) {
        case FetchError::Kind::Timeout: return "timeout";
        case FetchError::Kind::HttpStatus: return "http-status";
        case FetchError::Kind::TooLarge: return "too-large";
        case FetchError::Kind::Unsupported: return "unsupported";
        case FetchError::Kind::Network: return "network";
    }
    return "network";
}

void FixtureFetcher::serve(std::string url, std::string body) {
    std::lock_guard lock(mu_);
    bodies_[std::move(url)] = std::move(body);
}

void FixtureFetcher::fail(std::string url, int status) {
    std::lock_guard lock(mu_);
    statuses_[std::move(url)] = status;
}

Expected<std::string, FetchError> FixtureFetcher::get(const std::string& url, std::size_t max_bytes) {
    std::lock_guard lock(mu_);
    ++requests_;
    if (auto s = statuses_.find(url); s != statuses_.end())
        return unexpected(FetchError{FetchError::Kind::HttpStatus, s->second, "HTTP " + std::to_string(s->second)});
    auto b = bodies_.find(url);
    if (b == bodies_.end()) return unexpected(FetchError{FetchError::Kind::HttpStatus, 404, "HTTP 404"});
    if (b->second.size() > max_bytes) return unexpected(FetchError{FetchError::Kind::TooLarge, 200, "body too large"});
    return b->second;
}

std::size_t FixtureFetcher::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

Expected<std::string, FetchError> HttpFetcher::get(const std::string& url, std::size_t max_bytes) {
    if (!url.starts_with("http://"))
        return unexpected(FetchError{FetchError::Kind::Unsupported, 0, "only http is fetched: " + url});
    auto opts = options_;
    opts.max_body_bytes = max_bytes;
    try {
        net::HttpTransport t(opts);
        auto r = t.get(url);
        if (r.status != 200)
            return unexpected(FetchError{FetchError::Kind::HttpStatus, r.status, "HTTP " + std::to_string(r.status)});
        return std::move(r.body);
    } catch (const net::TransportError& e) {
        const std::string what = e.what();
        if (e.kind() == net::TransportError::Kind::Timeout) return unexpected(FetchError{FetchError::Kind::Timeout, 0, what});
        if (what.find("too large") != std::string::npos)
            return unexpected(FetchError{FetchError::Kind::TooLarge, 0, what});
        return unexpected(FetchError{FetchError::Kind::Network, 0, what});
    }
}

Expected<FetchedContent, FetchError> fetch_content(const NormalizedUrl& url, Fetcher& fetcher, std::size_t max_bytes) {
    auto body = fetcher.get(url.canonical, max_bytes);
    if (!body) return unexpected(body.error());
    FetchedContent c;
    c.digest = md5_hex(*body);
    c.body = std::move(*body);
    return c;
}

FetchReport fetch_all(const std::vector<std::string>& canonical_urls, Fetcher& fetcher, const FetchPoolOptions& options) {
    using Clock = std::chrono::steady_clock;
    FetchReport report;
    std::mutex mu;
    std::map<std::string, Clock::time_point> next_slot;
    std::atomic<std::size_t> cursor{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor++;
            if (i >= canonical_urls.size()) return;
            const auto& url = canonical_urls[i];
            Clock::time_point slot;
            {
                std::lock_guard lock(mu);
                auto& n = next_slot[host_of(url)];
                slot = std::max(n, Clock::now());
                n = slot + options.politeness;
            }
            std::this_thread::sleep_until(slot);
            auto got = fetch_content({url, url}, fetcher, options.max_bytes);
            std::lock_guard lock(mu);
            if (got) report.hashes[url] = got->digest;
            else report.failures.emplace(url, got.error());
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(options.concurrency, canonical_urls.size()));
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return report;
}

std::string hashes_to_json(const ContentHashes& h) { return json(h).dump(2); }

ContentHashes hashes_from_json(std::string_view text) { return json::parse(text).get<ContentHashes>(); }

}  // namespace harvestkit::index
