#include "harvestkit/ingest/dbinsert.hpp"

#include <sstream>

#include "harvestkit/oai/protocol.hpp"
#include "harvestkit/xml.hpp"

namespace harvestkit::ingest {

namespace {

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ' ';
        out += p;
    }
    return out;
}

std::vector<std::string> split(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string w; in >> w;) out.push_back(std::move(w));
    return out;
}

const std::string* attr(const std::vector<xml::XmlAttribute>& attrs, std::string_view name) {
    for (const auto& a : attrs)
        if (a.qname == name) return &a.value;
    return nullptr;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

// Consumes events up to the end tag matching the start just read and
// returns the [begin, end) span of its content.
std::pair<std::size_t, std::size_t> skip_subtree(xml::XmlReader& r) {
    const std::size_t begin = r.inner_offset();
    const std::size_t depth = r.depth();
    for (;;) {
        const auto ev = r.next();
        if (ev == xml::XmlReader::Event::EndElement && r.depth() == depth - 1) return {begin, r.inner_offset()};
        if (ev == xml::XmlReader::Event::EndDocument) throw xml::XmlParseError({xml::XmlError::Kind::Syntax, r.offset(), "unexpected end"});
    }
}

}  // namespace

DbInsertDocument build_db_insert(std::vector<std::pair<oai::MetadataRecord, NormalizedRecord>> pairs,
                                 std::string collection_id, std::string attempt_id) {
    DbInsertDocument doc{std::move(collection_id), std::move(attempt_id), {}};
    doc.entries.reserve(pairs.size());
    for (auto& [original, normalized] : pairs) {
        if (original.header.identifier != normalized.source_identifier)
            throw IdentifierMismatch("normalized record for '" + normalized.source_identifier +
                                     "' paired with original '" + original.header.identifier + "'");
        doc.entries.push_back({std::move(original), std::move(normalized)});
    }
    return doc;
}

DbInsertDocument normalize_batch(const std::vector<oai::MetadataRecord>& records, std::string collection_id,
                                 std::string attempt_id, const TransformConfig& config) {
    std::vector<std::pair<oai::MetadataRecord, NormalizedRecord>> pairs;
    pairs.reserve(records.size());
    for (const auto& r : records) {
        NormalizedRecord n = r.header.deleted ? NormalizedRecord{r.header.identifier, {}, {}} : safe_transform(r, config);
        pairs.emplace_back(r, std::move(n));
    }
    return build_db_insert(std::move(pairs), std::move(collection_id), std::move(attempt_id));
}

std::string serialize_db_insert(const DbInsertDocument& doc) {
    xml::XmlWriter w;
    w.declaration();
    w.open("dbInsert", {{"xmlns", std::string(kDbInsertNs)},
                        {"collection", doc.collection_id},
                        {"attempt", doc.attempt_id},
                        {"count", std::to_string(doc.entries.size())}});
    for (const auto& e : doc.entries) {
        const auto& h = e.original.header;
        w.open("entry", {{"identifier", h.identifier},
                         {"datestamp", format_datestamp(h.datestamp)},
                         {"deleted", h.deleted ? "true" : "false"},
                         {"sets", join(h.set_specs)}});
        w.open("original", {{"format", e.original.format_prefix}});
        if (!h.deleted) w.raw(e.original.raw_xml);
        w.close();
        w.open("normalized", {{"rules", join(e.normalized.transform_log)}});
        if (!h.deleted) w.raw(oai::serialize_dc_payload(oai::kNsdlDc, e.normalized.elements));
        w.close();
        w.close();
    }
    w.close();
    return w.take();
}

Expected<DbInsertDocument, MalformedDocument> stream_db_insert(std::string_view text,
                                                                const std::function<void(DbInsertEntry&&)>& on_entry) {
    using Event = xml::XmlReader::Event;
    DbInsertDocument header;
    // Originals are cut from larger responses and may use prefixes bound there.
    xml::XmlReader r(text, {.strict_namespaces = false});
    try {
        if (r.next() != Event::StartElement || r.local_name() != "dbInsert" || r.ns() != kDbInsertNs)
            return unexpected(MalformedDocument{r.offset(), "root element is not dbInsert"});
        if (const auto* c = attr(r.attributes(), "collection")) header.collection_id = *c;
        if (const auto* a = attr(r.attributes(), "attempt")) header.attempt_id = *a;
        for (;;) {
            const auto ev = r.next();
            if (ev == Event::EndElement) break;
            if (ev == Event::Text) {
                if (!blank(r.text())) return unexpected(MalformedDocument{r.offset(), "character data inside dbInsert"});
                continue;
            }
            if (ev != Event::StartElement || r.local_name() != "entry")
                return unexpected(MalformedDocument{r.offset(), "expected <entry>"});
            const std::size_t entry_at = r.offset();
            DbInsertEntry entry;
            auto& h = entry.original.header;
            const auto* id = attr(r.attributes(), "identifier");
            const auto* ds = attr(r.attributes(), "datestamp");
            if (!id || !ds) return unexpected(MalformedDocument{entry_at, "entry lacks identifier or datestamp"});
            h.identifier = *id;
            auto stamp = oai::parse_datestamp(*ds);
            if (!stamp) return unexpected(MalformedDocument{entry_at, "bad datestamp '" + *ds + "'"});
            h.datestamp = *stamp;
            if (const auto* d = attr(r.attributes(), "deleted")) h.deleted = *d == "true";
            if (const auto* s = attr(r.attributes(), "sets")) h.set_specs = split(*s);
            entry.normalized.source_identifier = h.identifier;

            bool seen_original = false, seen_normalized = false;
            for (;;) {
                const auto inner = r.next();
                if (inner == Event::EndElement) break;
                if (inner == Event::Text) continue;
                if (inner != Event::StartElement) return unexpected(MalformedDocument{r.offset(), "truncated entry"});
                if (r.local_name() == "original") {
                    if (const auto* f = attr(r.attributes(), "format")) entry.original.format_prefix = *f;
                    const auto [b, e] = skip_subtree(r);
                    entry.original.raw_xml = std::string(text.substr(b, e - b));
                    seen_original = true;
                } else if (r.local_name() == "normalized") {
                    if (const auto* rules = attr(r.attributes(), "rules")) entry.normalized.transform_log = split(*rules);
                    const auto [b, e] = skip_subtree(r);
                    const std::string_view body = text.substr(b, e - b);
                    if (!blank(body)) {
                        auto payload = xml::parse(body);
                        if (!payload)
                            return unexpected(MalformedDocument{b + payload.error().offset, payload.error().message});
                        auto elements = oai::read_dc_payload(*payload, oai::kNsdlDc, oai::DcProfile::standard());
                        if (!elements)
                            return unexpected(MalformedDocument{b + elements.error().offset.value_or(0), elements.error().message});
                        entry.normalized.elements = std::move(*elements);
                    }
                    seen_normalized = true;
                } else {
                    return unexpected(MalformedDocument{r.offset(), "unexpected <" + r.qname() + "> in entry"});
                }
            }
            if (!seen_original || !seen_normalized)
                return unexpected(MalformedDocument{entry_at, "entry for '" + h.identifier + "' is incomplete"});
            on_entry(std::move(entry));
        }
        if (r.next() != Event::EndDocument) return unexpected(MalformedDocument{r.offset(), "content after root"});
    } catch (const xml::XmlParseError& e) {
        return unexpected(MalformedDocument{e.error().offset, e.error().message});
    }
    return header;
}

Expected<DbInsertDocument, MalformedDocument> parse_db_insert(std::string_view text) {
    std::vector<DbInsertEntry> entries;
    auto doc = stream_db_insert(text, [&](DbInsertEntry&& e) { entries.push_back(std::move(e)); });
    if (doc) doc->entries = std::move(entries);
    return doc;
}

}  // namespace harvestkit::ingest
