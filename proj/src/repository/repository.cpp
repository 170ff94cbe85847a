#include "harvestkit/repository/repository.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "harvestkit/digest.hpp"
#include "harvestkit/ingest/transform.hpp"
#include "harvestkit/oai/protocol.hpp"
#include "harvestkit/xml.hpp"

namespace harvestkit::repository {

using nlohmann::json;
using oai::DcElement;

namespace {

constexpr std::string_view kRecPrefix = "rec/";
constexpr std::string_view kColPrefix = "col/";

long long secs(Instant t) { return t.time_since_epoch().count(); }
Instant at(long long s) { return Instant{Seconds{s}}; }

json record_to_json(const StoredRecord& r) {
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back({row.name, row.qualifier, row.scheme, row.value, row.language, row.position});
    return {{"id", r.repo_identifier},     {"cid", r.collection_id},     {"src", r.source_identifier},
            {"orig", r.original},          {"fmt", r.original_format},   {"pds", secs(r.provider_datestamp)},
            {"rows", rows},                {"served", secs(r.served_datestamp)}, {"del", r.deleted},
            {"pub", r.native_public},      {"coll", r.is_collection_record}, {"warn", r.schema_warning}};
}

StoredRecord record_from_json(const json& j) {
    StoredRecord r;
    r.repo_identifier = j.at("id");
    r.collection_id = j.at("cid");
    r.source_identifier = j.at("src");
    r.original = j.at("orig");
    r.original_format = j.at("fmt");
    r.provider_datestamp = at(j.at("pds"));
    for (const auto& row : j.at("rows"))
        r.rows.push_back({row[0], row[1], row[2], row[3], row[4], row[5].get<std::size_t>()});
    r.served_datestamp = at(j.at("served"));
    r.deleted = j.at("del");
    r.native_public = j.at("pub");
    r.is_collection_record = j.at("coll");
    r.schema_warning = j.at("warn");
    return r;
}

json entry_to_json(const ServedEntry& e) {
    return {{"id", e.repo_identifier}, {"served", secs(e.served_datestamp)}, {"del", e.deleted},
            {"set", e.set_spec},       {"warn", e.schema_warning},          {"payloads", e.payloads}};
}

ServedEntry entry_from_json(const json& j) {
    ServedEntry e;
    e.repo_identifier = j.at("id");
    e.served_datestamp = at(j.at("served"));
    e.deleted = j.at("del");
    e.set_spec = j.at("set");
    e.schema_warning = j.at("warn");
    for (const auto& [k, v] : j.at("payloads").items()) e.payloads.emplace(k, v.get<std::string>());
    return e;
}

std::string export_key(std::string_view id, std::string_view format) {
    std::string k(id);
    k += '\t';
    k += format;
    return k;
}

// Natives that do not stand alone as XML (prefixes bound in the harvested
// envelope) are carried as escaped text so the bundle stays well-formed.
std::string native_part(const StoredRecord& r) {
    xml::XmlWriter w;
    if (xml::parse(r.original)) {
        w.open("native", {{"format", r.original_format}});
        w.raw(r.original);
    } else {
        w.open("native", {{"format", r.original_format}, {"encoding", "escaped"}});
        w.text(r.original);
    }
    w.close();
    return w.take();
}

std::string bundle(std::string_view nsdl_dc, std::string_view oai_dc, std::string_view links, std::string_view native) {
    xml::XmlWriter w;
    w.open("bundle", {{"xmlns", std::string(kBundleNs)}});
    w.open("nsdl_dc").raw(nsdl_dc).close();
    w.open("oai_dc").raw(oai_dc).close();
    w.open("nsdl_links").raw(links).close();
    w.raw(native);
    w.close();
    return w.take();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << bytes;
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::vector<ElementRow> shred(const std::vector<DcElement>& elements) {
    std::vector<ElementRow> rows;
    rows.reserve(elements.size());
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const auto& e = elements[i];
        rows.push_back({e.name, e.qualifier, e.scheme, e.value, e.language, i});
    }
    return rows;
}

std::vector<DcElement> assemble(std::vector<ElementRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.position < b.position; });
    std::vector<DcElement> out;
    out.reserve(rows.size());
    for (auto& r : rows)
        out.push_back({std::move(r.name), std::move(r.qualifier), std::move(r.scheme), std::move(r.value),
                       std::move(r.language)});
    return out;
}

std::vector<DcElement> dumb_down(const std::vector<DcElement>& elements) {
    std::vector<DcElement> out;
    out.reserve(elements.size());
    for (const auto& e : elements) {
        if (!oai::is_dc_element_name(e.name)) continue;
        out.push_back({e.name, {}, {}, e.value, e.language});
    }
    return out;
}

std::string build_links(std::string_view collection_repo_id) {
    xml::XmlWriter w;
    w.open("nsdl_links", {{"xmlns", std::string(kLinksNs)}});
    if (!collection_repo_id.empty()) w.element("memberOf", collection_repo_id);
    w.close();
    return w.take();
}

ServingSnapshot::ServingSnapshot(std::vector<ServedEntry> entries, Instant published_at) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const ServedEntry& a, const ServedEntry& b) {
        return std::tie(a.served_datestamp, a.repo_identifier) < std::tie(b.served_datestamp, b.repo_identifier);
    });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        index_.emplace(entries_[i].repo_identifier, i);
        content_ += entry_to_json(entries_[i]).dump();
        content_ += '\n';
    }
    manifest_.checksum = md5_hex(content_);
    manifest_.snapshot_id = manifest_.checksum.substr(0, 16);
    manifest_.published_at = published_at;
    manifest_.record_count = entries_.size();
}

const ServedEntry* ServingSnapshot::find(std::string_view repo_identifier) const {
    auto it = index_.find(repo_identifier);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

std::vector<std::string> ServingSnapshot::set_specs() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.set_spec);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::optional<Instant> ServingSnapshot::earliest_datestamp() const {
    if (entries_.empty()) return std::nullopt;
    return entries_.front().served_datestamp;
}

std::string manifest_to_json(const SnapshotManifest& m) {
    return json{{"snapshot_id", m.snapshot_id},
                {"published_at", format_datestamp(m.published_at)},
                {"record_count", m.record_count},
                {"checksum", m.checksum}}
        .dump(2);
}

Repository::Repository(RepositoryConfig config) : config_(std::move(config)) {
    if (config_.data_dir) {
        const auto& d = *config_.data_dir;
        input_ = KvStore(d / "input.log");
        exports_ = KvStore(d / "export.log");
        serving_ = KvStore(d / "serving.log");
        current_ = load_snapshot(d);
    }
}

std::string Repository::repo_identifier(std::string_view collection_id, std::string_view source_identifier) const {
    return "oai:" + config_.domain + ":" + std::string(collection_id) + "/" + md5_hex(source_identifier).substr(0, 16);
}

void Repository::store(const StoredRecord& r) {
    input_.put(std::string(kRecPrefix) + r.repo_identifier, record_to_json(r).dump());
}

std::optional<StoredRecord> Repository::load(std::string_view repo_identifier) const {
    auto v = input_.get(std::string(kRecPrefix) + std::string(repo_identifier));
    if (!v) return std::nullopt;
    return record_from_json(json::parse(*v));
}

void Repository::write_exports(const StoredRecord& r) {
    if (r.deleted) {
        for (auto f : kExportFormats) exports_.erase(export_key(r.repo_identifier, f));
        return;
    }
    std::string collection_repo_id;
    if (!r.is_collection_record) {
        auto col = input_.get(std::string(kColPrefix) + r.collection_id);
        if (!col) throw MissingCollectionRecord("no description record for collection " + r.collection_id);
        collection_repo_id = json::parse(*col).at("repo_id");
    }
    const auto elements = assemble(r.rows);
    const std::string nsdl_dc = oai::serialize_dc_payload(oai::kNsdlDc, elements);
    const std::string oai_dc = oai::serialize_dc_payload(oai::kOaiDc, dumb_down(elements));
    const std::string links = build_links(collection_repo_id);
    const std::string search = bundle(nsdl_dc, oai_dc, links, native_part(r));
    exports_.put(export_key(r.repo_identifier, kFormatNsdlDc), nsdl_dc);
    exports_.put(export_key(r.repo_identifier, kFormatOaiDc), oai_dc);
    exports_.put(export_key(r.repo_identifier, kFormatLinks), links);
    exports_.put(export_key(r.repo_identifier, kFormatAll), r.native_public ? search : bundle(nsdl_dc, oai_dc, links, {}));
    exports_.put(export_key(r.repo_identifier, kFormatSearch), search);
}

std::string Repository::add_collection(const std::string& collection_id, const std::vector<DcElement>& description,
                                       bool native_public, Instant now) {
    std::lock_guard lock(mu_);
    StoredRecord r;
    r.repo_identifier = repo_identifier(collection_id, collection_id);
    r.collection_id = collection_id;
    r.source_identifier = collection_id;
    r.original_format = std::string(oai::kOaiDc);
    r.original = oai::serialize_dc_payload(oai::kOaiDc, dumb_down(description));
    r.provider_datestamp = now;
    r.rows = shred(description);
    r.served_datestamp = now + config_.postdate_offset;
    r.native_public = native_public;
    r.is_collection_record = true;
    input_.put(std::string(kColPrefix) + collection_id,
               json{{"repo_id", r.repo_identifier}, {"native_public", native_public}}.dump());
    store(r);
    write_exports(r);
    return r.repo_identifier;
}

std::optional<CollectionEntry> Repository::collection(std::string_view collection_id) const {
    std::lock_guard lock(mu_);
    auto v = input_.get(std::string(kColPrefix) + std::string(collection_id));
    if (!v) return std::nullopt;
    auto j = json::parse(*v);
    return CollectionEntry{std::string(collection_id), j.at("repo_id"), j.at("native_public")};
}

void Repository::insert_entry(ingest::DbInsertEntry&& entry, const std::string& collection_id, Instant now,
                              InsertResult& out) {
    const auto& h = entry.original.header;
    const std::string id = repo_identifier(collection_id, h.identifier);
    if (h.deleted) {
        auto existing = load(id);
        if (!existing) {
            ++out.unknown_deletes;
            return;
        }
        existing->deleted = true;
        existing->served_datestamp = now + config_.postdate_offset;
        store(*existing);
        write_exports(*existing);
        out.deleted.push_back(id);
        return;
    }
    if (!ingest::has_min_content(entry.normalized)) {
        out.excluded.push_back(h.identifier);
        return;
    }
    const auto col = json::parse(*input_.get(std::string(kColPrefix) + collection_id));
    StoredRecord r;
    r.repo_identifier = id;
    r.collection_id = collection_id;
    r.source_identifier = h.identifier;
    r.original = std::move(entry.original.raw_xml);
    r.original_format = std::move(entry.original.format_prefix);
    r.provider_datestamp = h.datestamp;
    r.rows = shred(entry.normalized.elements);
    r.served_datestamp = now + config_.postdate_offset;
    r.native_public = col.at("native_public");
    r.schema_warning = !ingest::validate_normalized(entry.normalized, config_.profile).empty();
    store(r);
    write_exports(r);
    out.inserted.push_back(id);
}

InsertResult Repository::insert(const ingest::DbInsertDocument& doc, Instant now) {
    std::lock_guard lock(mu_);
    if (!input_.contains(std::string(kColPrefix) + doc.collection_id))
        throw UnknownCollection("collection '" + doc.collection_id + "' is not registered");
    InsertResult out;
    for (auto entry : doc.entries) insert_entry(std::move(entry), doc.collection_id, now, out);
    return out;
}

InsertResult Repository::insert_xml(std::string_view db_insert_xml, Instant now) {
    std::lock_guard lock(mu_);
    // The collection is only known once the root element is read, so entries
    // are buffered until then; a malformed document stores nothing.
    std::vector<ingest::DbInsertEntry> entries;
    auto header = ingest::stream_db_insert(db_insert_xml, [&](ingest::DbInsertEntry&& e) { entries.push_back(std::move(e)); });
    if (!header) throw MalformedDocumentError(header.error().offset, header.error().message);
    if (!input_.contains(std::string(kColPrefix) + header->collection_id))
        throw UnknownCollection("collection '" + header->collection_id + "' is not registered");
    InsertResult out;
    for (auto& e : entries) insert_entry(std::move(e), header->collection_id, now, out);
    return out;
}

void Repository::mark_deleted(const std::string& repo_identifier, Instant now) {
    std::lock_guard lock(mu_);
    auto r = load(repo_identifier);
    if (!r) throw UnknownIdentifier("no record " + repo_identifier);
    r->deleted = true;
    r->served_datestamp = now + config_.postdate_offset;
    store(*r);
    write_exports(*r);
}

std::vector<std::string> Repository::retain_only(const std::string& collection_id,
                                                 const std::vector<std::string>& keep_source_ids, Instant now) {
    std::lock_guard lock(mu_);
    std::vector<std::string> keep(keep_source_ids);
    std::sort(keep.begin(), keep.end());
    std::vector<std::string> dropped;
    const std::string prefix = std::string(kRecPrefix) + "oai:" + config_.domain + ":" + collection_id + "/";
    for (const auto& [key, value] : input_.scan(prefix)) {
        StoredRecord r = record_from_json(json::parse(value));
        if (r.is_collection_record || r.deleted || std::binary_search(keep.begin(), keep.end(), r.source_identifier))
            continue;
        r.deleted = true;
        r.served_datestamp = now + config_.postdate_offset;
        store(r);
        write_exports(r);
        dropped.push_back(r.repo_identifier);
    }
    return dropped;
}

std::shared_ptr<const ServingSnapshot> Repository::publish(Instant now) {
    std::lock_guard lock(mu_);
    std::vector<ServedEntry> entries;
    entries.reserve(input_.size());
    for (const auto& [key, value] : input_.scan(kRecPrefix)) {
        const StoredRecord r = record_from_json(json::parse(value));
        ServedEntry e{r.repo_identifier, r.served_datestamp, r.deleted, r.collection_id, r.schema_warning, {}};
        if (!r.deleted)
            for (auto f : kExportFormats)
                if (auto p = exports_.get(export_key(r.repo_identifier, f))) e.payloads.emplace(std::string(f), std::move(*p));
        entries.push_back(std::move(e));
    }
    auto snap = std::make_shared<const ServingSnapshot>(std::move(entries), now);
    if (config_.data_dir) {
        std::map<std::string, std::string, std::less<>> rows;
        for (const auto& e : snap->entries()) rows.emplace(e.repo_identifier, entry_to_json(e).dump());
        serving_.replace_all(std::move(rows));
        write_file_atomic(*config_.data_dir / "manifest.json", manifest_to_json(snap->manifest()));
    }
    current_ = snap;
    return snap;
}

std::shared_ptr<const ServingSnapshot> Repository::current() const {
    std::lock_guard lock(mu_);
    return current_;
}

std::shared_ptr<const ServingSnapshot> Repository::load_snapshot(const std::filesystem::path& data_dir) {
    std::ifstream in(data_dir / "manifest.json");
    if (!in) return nullptr;
    const json manifest = json::parse(in);
    KvStore serving(data_dir / "serving.log");
    std::vector<ServedEntry> entries;
    for (const auto& [k, v] : serving.scan()) entries.push_back(entry_from_json(json::parse(v)));
    auto published = oai::parse_datestamp(manifest.at("published_at").get<std::string>());
    auto snap = std::make_shared<const ServingSnapshot>(std::move(entries), published ? *published : Instant{});
    if (snap->manifest().checksum != manifest.at("checksum").get<std::string>())
        throw std::runtime_error("snapshot in " + data_dir.string() + " does not match its manifest");
    return snap;
}

std::optional<StoredRecord> Repository::find(std::string_view repo_identifier) const {
    std::lock_guard lock(mu_);
    return load(repo_identifier);
}

std::optional<std::string> Repository::export_payload(std::string_view repo_identifier, std::string_view format) const {
    std::lock_guard lock(mu_);
    return exports_.get(export_key(repo_identifier, format));
}

std::vector<StoredRecord> Repository::records() const {
    std::lock_guard lock(mu_);
    std::vector<StoredRecord> out;
    for (const auto& [k, v] : input_.scan(kRecPrefix)) out.push_back(record_from_json(json::parse(v)));
    return out;
}

std::size_t Repository::size() const {
    std::lock_guard lock(mu_);
    return input_.scan(kRecPrefix).size();
}

std::vector<std::string> Repository::query_elements(const std::function<bool(const ElementRow&)>& pred,
                                                    std::size_t min_matches) const {
    std::vector<std::string> out;
    for (const auto& r : records()) {
        if (r.deleted) continue;
        const auto n = static_cast<std::size_t>(std::count_if(r.rows.begin(), r.rows.end(), pred));
        if (n >= min_matches && n > 0) out.push_back(r.repo_identifier);
    }
    return out;
}

std::size_t Repository::count_with_fetchable_uris(std::size_t k) const {
    return query_elements(
               [](const ElementRow& row) {
                   return row.name == "identifier" && row.scheme == "URI" && ingest::is_fetchable_url(row.value);
               },
               k)
        .size();
}

std::vector<std::string> Repository::uri_identifiers() const {
    std::vector<std::string> out;
    for (const auto& r : records()) {
        if (r.deleted) continue;
        for (const auto& row : r.rows)
            if (row.name == "identifier" && row.scheme == "URI") out.push_back(row.value);
    }
    return out;
}

}  // namespace harvestkit::repository
