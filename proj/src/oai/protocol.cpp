#include "harvestkit/oai/protocol.hpp"

#include <algorithm>
#include <charconv>

namespace harvestkit::oai {

using xml::XmlElement;
using Kind = ResponseError::Kind;

bool ResponseError::has_code(ProtocolErrorCode c) const {
    return std::any_of(protocol_errors.begin(), protocol_errors.end(), [c](const auto& e) { return e.code == c; });
}

std::string_view to_string(ResponseError::Kind k) {
    switch (k) {
        case Kind::WellFormedness: return "WellFormednessError";
        case Kind::Schema: return "SchemaViolation";
        case Kind::ProtocolMisuse: return "ProtocolMisuse";
        case Kind::ServerError: return "ProtocolError";
    }
    return "SchemaViolation";
}

bool is_dc_format(std::string_view format_prefix) { return format_prefix == kOaiDc || format_prefix == kNsdlDc; }

namespace {

ResponseError error(Kind kind, std::string message, std::optional<std::size_t> offset = std::nullopt) {
    return ResponseError{kind, std::move(message), offset, false, {}, {}};
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

Expected<XmlElement, ResponseError> parse_document(std::string_view body, bool strict_namespaces = true) {
    auto doc = xml::parse(body, xml::XmlOptions{strict_namespaces});
    if (!doc) {
        const auto& e = doc.error();
        ResponseError r = error(Kind::WellFormedness, std::string(xml::to_string(e.kind)) + ": " + e.message, e.offset);
        r.encoding = e.kind == xml::XmlError::Kind::Encoding;
        return unexpected(std::move(r));
    }
    return std::move(doc.value());
}

struct Envelope {
    XmlElement root;
    Instant response_date{};
    std::size_t body_index = 0;

    const XmlElement& body() const { return root.children[body_index]; }
};

Expected<Envelope, ResponseError> open_envelope(std::string_view text, std::string_view verb) {
    auto parsed = parse_document(text);
    if (!parsed) return unexpected(std::move(parsed.error()));
    Envelope env{std::move(parsed.value())};
    const auto& root = env.root;
    if (root.local != "OAI-PMH" || root.ns != kOaiNs)
        return unexpected(error(Kind::Schema, "root element is <" + root.qname + ">, not OAI-PMH", root.begin));
    if (!blank(root.text)) return unexpected(error(Kind::Schema, "character data directly inside <OAI-PMH>", root.begin));

    const XmlElement* date = root.child("responseDate");
    if (!date) return unexpected(error(Kind::ProtocolMisuse, "missing <responseDate>", root.begin));
    auto when = parse_datestamp(trim(date->text));
    if (!when) return unexpected(error(Kind::Schema, "responseDate is not a UTC datestamp", date->begin));
    env.response_date = *when;
    if (!root.child("request")) return unexpected(error(Kind::ProtocolMisuse, "missing <request>", root.begin));

    std::vector<ProtocolError> errors;
    std::optional<std::size_t> body_index;
    for (std::size_t i = 0; i < root.children.size(); ++i) {
        const auto& c = root.children[i];
        if (c.ns != kOaiNs) return unexpected(error(Kind::Schema, "foreign element <" + c.qname + "> in response", c.begin));
        if (c.local == "responseDate" || c.local == "request") {
            if (i > 1) return unexpected(error(Kind::Schema, "<" + c.local + "> out of order", c.begin));
            continue;
        }
        if (c.local == "error") {
            const std::string* code_text = c.attribute("code");
            if (!code_text) return unexpected(error(Kind::ProtocolMisuse, "<error> without code", c.begin));
            auto code = parse_error_code(*code_text);
            if (!code)
                return unexpected(error(Kind::ProtocolMisuse, "unknown error code '" + *code_text + "'", c.begin));
            errors.push_back(ProtocolError{*code, trim(c.text)});
            continue;
        }
        if (c.local == verb && !body_index) {
            body_index = i;
            continue;
        }
        return unexpected(error(Kind::Schema, "unexpected element <" + c.qname + "> in response", c.begin));
    }
    if (!errors.empty()) {
        if (body_index)
            return unexpected(error(Kind::ProtocolMisuse, "response carries both errors and a verb body", root.begin));
        ResponseError r = error(Kind::ServerError, "server returned " + std::string(to_string(errors.front().code)));
        r.protocol_errors = std::move(errors);
        r.response_date = env.response_date;
        return unexpected(std::move(r));
    }
    if (!body_index)
        return unexpected(error(Kind::ProtocolMisuse, "missing <" + std::string(verb) + "> element", root.begin));
    env.body_index = *body_index;
    return env;
}

Expected<std::optional<ResumptionToken>, ResponseError> read_token(const XmlElement& list) {
    const XmlElement* t = list.child("resumptionToken");
    if (!t) return std::optional<ResumptionToken>{};
    if (t->has_element_children()) return unexpected(error(Kind::Schema, "markup inside <resumptionToken>", t->begin));
    ResumptionToken token;
    token.token = trim(t->text);
    auto number = [&](std::string_view name, std::optional<std::size_t>& out) -> bool {
        const std::string* v = t->attribute(name);
        if (!v) return true;
        std::size_t n = 0;
        auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
        if (ec != std::errc{} || p != v->data() + v->size() || v->empty()) return false;
        out = n;
        return true;
    };
    if (!number("completeListSize", token.complete_list_size) || !number("cursor", token.cursor))
        return unexpected(error(Kind::Schema, "non-numeric resumptionToken attribute", t->begin));
    if (const std::string* exp = t->attribute("expirationDate")) {
        auto when = parse_datestamp(*exp);
        if (!when) return unexpected(error(Kind::Schema, "resumptionToken expirationDate is not a UTC datestamp", t->begin));
        token.expiration = *when;
    }
    return std::optional<ResumptionToken>{std::move(token)};
}

Expected<RecordHeader, ResponseError> read_header(const XmlElement& h) {
    RecordHeader header;
    if (const std::string* status = h.attribute("status")) {
        if (*status != "deleted")
            return unexpected(error(Kind::Schema, "header status must be 'deleted', got '" + *status + "'", h.begin));
        header.deleted = true;
    }
    const XmlElement* id = nullptr;
    const XmlElement* date = nullptr;
    for (const auto& c : h.children) {
        if (c.has_element_children()) return unexpected(error(Kind::Schema, "markup inside <" + c.qname + ">", c.begin));
        if (c.local == "identifier" && !id) {
            id = &c;
        } else if (c.local == "datestamp" && !date) {
            date = &c;
        } else if (c.local == "setSpec") {
            header.set_specs.push_back(trim(c.text));
        } else {
            return unexpected(error(Kind::Schema, "unexpected <" + c.qname + "> in header", c.begin));
        }
    }
    if (!id) return unexpected(error(Kind::ProtocolMisuse, "header without <identifier>", h.begin));
    if (!date) return unexpected(error(Kind::ProtocolMisuse, "header without <datestamp>", h.begin));
    header.identifier = trim(id->text);
    if (header.identifier.empty()) return unexpected(error(Kind::Schema, "empty record identifier", id->begin));
    const std::string stamp = trim(date->text);
    auto when = parse_datestamp(stamp);
    if (!when) {
        return unexpected(error(Kind::Schema,
                                "datestamp '" + stamp + "' of " + header.identifier + ": " +
                                    std::string(to_string(when.error().kind)) + " at position " +
                                    std::to_string(when.error().position),
                                date->begin));
    }
    header.datestamp = *when;
    return header;
}

std::string strip_prefix(std::string_view qualified) {
    const auto colon = qualified.find(':');
    return std::string(colon == std::string_view::npos ? qualified : qualified.substr(colon + 1));
}

}  // namespace

Expected<std::vector<DcElement>, ResponseError> read_dc_payload(const XmlElement& payload, std::string_view format,
                                                                const DcProfile& profile) {
    const bool qualified = format == kNsdlDc;
    if (qualified ? (payload.local != "nsdl_dc" || payload.ns != kNsdlDcNs)
                  : (payload.local != "dc" || payload.ns != kOaiDcNs))
        return unexpected(error(Kind::Schema, "payload root <" + payload.qname + "> does not match format " +
                                                  std::string(format), payload.begin));
    if (!blank(payload.text))
        return unexpected(error(Kind::Schema, "character data directly inside <" + payload.qname + ">", payload.begin));
    std::vector<DcElement> out;
    out.reserve(payload.children.size());
    for (const auto& c : payload.children) {
        if (c.has_element_children())
            return unexpected(error(Kind::Schema, "element nesting inside <" + c.qname + ">", c.children.front().begin));
        DcElement e;
        if (c.ns == kDcNs) {
            if (!is_dc_element_name(c.local))
                return unexpected(error(Kind::Schema, "<" + c.qname + "> is not a Dublin Core element", c.begin));
            e.name = c.local;
        } else if (qualified && c.ns == kDctermsNs) {
            auto refined = profile.refinements.find(c.local);
            if (refined != profile.refinements.end()) {
                e.name = refined->second;
                e.qualifier = c.local;
            } else if (profile.allows_element(c.local)) {
                e.name = c.local;
            } else {
                return unexpected(error(Kind::Schema, "<" + c.qname + "> is not in the application profile", c.begin));
            }
        } else {
            return unexpected(error(Kind::Schema, "<" + c.qname + "> is outside the Dublin Core namespaces", c.begin));
        }
        for (const auto& a : c.attributes) {
            if (a.ns == kXsiNs && a.local == "type") {
                if (!qualified)
                    return unexpected(error(Kind::Schema, "xsi:type is not allowed in oai_dc", c.begin));
                e.scheme = strip_prefix(a.value);
            } else if (a.local == "lang" && a.qname == "xml:lang") {
                e.language = a.value;
            } else {
                return unexpected(error(Kind::Schema, "unexpected attribute " + a.qname + " on <" + c.qname + ">", c.begin));
            }
        }
        e.value = c.text;
        out.push_back(std::move(e));
    }
    return out;
}

Expected<MetadataRecord, ResponseError> read_record(const XmlElement& rec, std::string_view source,
                                                    std::string_view format_prefix, const DcProfile& profile) {
    const XmlElement* h = nullptr;
    const XmlElement* metadata = nullptr;
    for (const auto& c : rec.children) {
        if (c.local == "header" && !h) h = &c;
        else if (c.local == "metadata" && !metadata) metadata = &c;
        else if (c.local == "about") continue;
        else return unexpected(error(Kind::Schema, "unexpected <" + c.qname + "> in record", c.begin));
    }
    if (!h) return unexpected(error(Kind::ProtocolMisuse, "record without <header>", rec.begin));
    auto header = read_header(*h);
    if (!header) return unexpected(std::move(header.error()));

    MetadataRecord record;
    record.header = std::move(header.value());
    record.format_prefix = std::string(format_prefix);
    if (record.header.deleted) {
        if (metadata)
            return unexpected(error(Kind::Schema, "deleted record " + record.header.identifier + " carries metadata",
                                    metadata->begin));
        return record;
    }
    if (!metadata)
        return unexpected(error(Kind::ProtocolMisuse, "record " + record.header.identifier + " without <metadata>", rec.begin));
    if (metadata->children.size() != 1 || !blank(metadata->text))
        return unexpected(error(Kind::Schema, "<metadata> of " + record.header.identifier + " must hold exactly one element",
                                metadata->begin));
    const XmlElement& payload = metadata->children.front();
    record.raw_xml = std::string(source.substr(payload.begin, payload.end - payload.begin));
    if (format_prefix.empty()) {
        if (payload.ns == kOaiDcNs) format_prefix = kOaiDc;
        else if (payload.ns == kNsdlDcNs) format_prefix = kNsdlDc;
        record.format_prefix = std::string(format_prefix);
    }
    if (is_dc_format(format_prefix)) {
        auto elements = read_dc_payload(payload, format_prefix, profile);
        if (!elements) return unexpected(std::move(elements.error()));
        record.elements = std::move(elements.value());
    }
    return record;
}

namespace {

std::string request_prefix(const XmlElement& root) {
    const XmlElement* req = root.child("request");
    const std::string* p = req ? req->attribute("metadataPrefix") : nullptr;
    return p ? *p : std::string{};
}

}  // namespace

Expected<ListRecordsPage, ResponseError> parse_list_response(std::string_view body, std::string_view format_hint,
                                                             const DcProfile& profile) {
    auto env = open_envelope(body, "ListRecords");
    if (!env) return unexpected(std::move(env.error()));
    ListRecordsPage page;
    page.response_date = env->response_date;
    // Resumed requests echo only the token, so the caller's hint fills in.
    std::string prefix = request_prefix(env->root);
    if (prefix.empty()) prefix = std::string(format_hint);
    const XmlElement& list = env->body();
    for (const auto& c : list.children) {
        if (c.local == "record") {
            auto rec = read_record(c, body, prefix, profile);
            if (!rec) return unexpected(std::move(rec.error()));
            page.records.push_back(std::move(rec.value()));
        } else if (c.local != "resumptionToken") {
            return unexpected(error(Kind::Schema, "unexpected <" + c.qname + "> in ListRecords", c.begin));
        }
    }
    auto token = read_token(list);
    if (!token) return unexpected(std::move(token.error()));
    page.token = std::move(token.value());
    if (page.records.empty() && !page.token)
        return unexpected(error(Kind::ProtocolMisuse, "empty ListRecords (noRecordsMatch expected)", list.begin));
    return page;
}

Expected<ListIdentifiersPage, ResponseError> parse_list_identifiers(std::string_view body) {
    auto env = open_envelope(body, "ListIdentifiers");
    if (!env) return unexpected(std::move(env.error()));
    ListIdentifiersPage page;
    page.response_date = env->response_date;
    const XmlElement& list = env->body();
    for (const auto& c : list.children) {
        if (c.local == "header") {
            auto h = read_header(c);
            if (!h) return unexpected(std::move(h.error()));
            page.headers.push_back(std::move(h.value()));
        } else if (c.local != "resumptionToken") {
            return unexpected(error(Kind::Schema, "unexpected <" + c.qname + "> in ListIdentifiers", c.begin));
        }
    }
    auto token = read_token(list);
    if (!token) return unexpected(std::move(token.error()));
    page.token = std::move(token.value());
    return page;
}

Expected<IdentifyInfo, ResponseError> parse_identify(std::string_view body) {
    auto env = open_envelope(body, "Identify");
    if (!env) return unexpected(std::move(env.error()));
    const XmlElement& id = env->body();
    IdentifyInfo info;
    info.response_date = env->response_date;
    auto required = [&](std::string_view name) -> const XmlElement* { return id.child(name); };
    for (std::string_view name :
         {"repositoryName", "baseURL", "protocolVersion", "earliestDatestamp", "deletedRecord", "granularity", "adminEmail"})
        if (!required(name))
            return unexpected(error(Kind::ProtocolMisuse, "Identify response missing <" + std::string(name) + ">", id.begin));
    info.repository_name = trim(required("repositoryName")->text);
    info.base_url = trim(required("baseURL")->text);
    info.protocol_version = trim(required("protocolVersion")->text);
    if (info.repository_name.empty())
        return unexpected(error(Kind::ProtocolMisuse, "empty <repositoryName>", required("repositoryName")->begin));
    if (info.protocol_version != "2.0")
        return unexpected(error(Kind::ProtocolMisuse, "protocolVersion must be 2.0", required("protocolVersion")->begin));

    const std::string gran = trim(required("granularity")->text);
    if (gran == "YYYY-MM-DD") info.granularity = Granularity::Day;
    else if (gran == "YYYY-MM-DDThh:mm:ssZ") info.granularity = Granularity::Second;
    else return unexpected(error(Kind::ProtocolMisuse, "invalid granularity '" + gran + "'", required("granularity")->begin));

    auto policy = parse_deleted_policy(trim(required("deletedRecord")->text));
    if (!policy)
        return unexpected(error(Kind::ProtocolMisuse, "invalid deletedRecord value", required("deletedRecord")->begin));
    info.deleted_policy = *policy;

    info.earliest_datestamp_text = trim(required("earliestDatestamp")->text);
    auto earliest = parse_request_date(info.earliest_datestamp_text);
    if (!earliest || (earliest->granularity != info.granularity))
        return unexpected(error(Kind::Schema, "earliestDatestamp does not match the declared granularity",
                                required("earliestDatestamp")->begin));
    info.earliest_datestamp = earliest->instant;
    for (const auto* e : id.children_named("adminEmail")) info.admin_emails.push_back(trim(e->text));
    info.description_count = id.children_named("description").size();
    return info;
}

Expected<MetadataRecord, ResponseError> parse_get_record(std::string_view body, std::string_view format_hint,
                                                         const DcProfile& profile) {
    auto env = open_envelope(body, "GetRecord");
    if (!env) return unexpected(std::move(env.error()));
    const XmlElement& gr = env->body();
    const XmlElement* rec = gr.child("record");
    if (!rec || gr.children.size() != 1)
        return unexpected(error(Kind::Schema, "GetRecord must hold exactly one <record>", gr.begin));
    std::string prefix = request_prefix(env->root);
    if (prefix.empty()) prefix = std::string(format_hint);
    return read_record(*rec, body, prefix, profile);
}

Expected<std::vector<MetadataFormat>, ResponseError> parse_list_metadata_formats(std::string_view body) {
    auto env = open_envelope(body, "ListMetadataFormats");
    if (!env) return unexpected(std::move(env.error()));
    std::vector<MetadataFormat> out;
    for (const auto& c : env->body().children) {
        if (c.local != "metadataFormat")
            return unexpected(error(Kind::Schema, "unexpected <" + c.qname + "> in ListMetadataFormats", c.begin));
        const XmlElement* prefix = c.child("metadataPrefix");
        const XmlElement* schema = c.child("schema");
        const XmlElement* ns = c.child("metadataNamespace");
        if (!prefix || !schema || !ns)
            return unexpected(error(Kind::ProtocolMisuse, "incomplete <metadataFormat>", c.begin));
        out.push_back({trim(prefix->text), trim(schema->text), trim(ns->text)});
    }
    return out;
}

Expected<ListSetsPage, ResponseError> parse_list_sets(std::string_view body) {
    auto env = open_envelope(body, "ListSets");
    if (!env) return unexpected(std::move(env.error()));
    ListSetsPage page;
    page.response_date = env->response_date;
    for (const auto& c : env->body().children) {
        if (c.local == "set") {
            const XmlElement* spec = c.child("setSpec");
            const XmlElement* name = c.child("setName");
            if (!spec || !name) return unexpected(error(Kind::ProtocolMisuse, "incomplete <set>", c.begin));
            page.sets.push_back({trim(spec->text), trim(name->text)});
        } else if (c.local != "resumptionToken") {
            return unexpected(error(Kind::Schema, "unexpected <" + c.qname + "> in ListSets", c.begin));
        }
    }
    auto token = read_token(env->body());
    if (!token) return unexpected(std::move(token.error()));
    page.token = std::move(token.value());
    return page;
}

Expected<MetadataRecord, ResponseError> parse_record(std::string_view bytes, const DcProfile& profile) {
    auto doc = parse_document(bytes);
    if (!doc) return unexpected(std::move(doc.error()));
    const XmlElement& rec = doc.value();
    if (rec.local != "record" || rec.ns != kOaiNs)
        return unexpected(error(Kind::Schema, "expected a <record> element", rec.begin));
    const std::string* prefix = rec.attribute("metadataPrefix");
    return read_record(rec, bytes, prefix ? *prefix : std::string_view{}, profile);
}

std::string serialize_dc_payload(std::string_view format_prefix, const std::vector<DcElement>& elements) {
    xml::XmlWriter w;
    const bool qualified = format_prefix == kNsdlDc;
    if (qualified) {
        w.open("nsdl_dc:nsdl_dc", {{"xmlns:nsdl_dc", std::string(kNsdlDcNs)},
                                   {"xmlns:dc", std::string(kDcNs)},
                                   {"xmlns:dct", std::string(kDctermsNs)},
                                   {"xmlns:xsi", std::string(kXsiNs)},
                                   {"schemaVersion", "1.02.020"},
                                   {"xsi:schemaLocation", std::string(kNsdlDcNs) + " " + std::string(kNsdlDcSchema)}});
    } else {
        w.open("oai_dc:dc", {{"xmlns:oai_dc", std::string(kOaiDcNs)},
                             {"xmlns:dc", std::string(kDcNs)},
                             {"xmlns:xsi", std::string(kXsiNs)},
                             {"xsi:schemaLocation", std::string(kOaiDcNs) + " " + std::string(kOaiDcSchema)}});
    }
    for (const auto& e : elements) {
        xml::XmlWriter::Attrs attrs;
        std::string tag;
        if (qualified && !e.qualifier.empty()) tag = "dct:" + e.qualifier;
        else if (qualified && !is_dc_element_name(e.name)) tag = "dct:" + e.name;
        else tag = "dc:" + e.name;
        if (qualified && !e.scheme.empty()) attrs.emplace_back("xsi:type", "dct:" + e.scheme);
        if (!e.language.empty()) attrs.emplace_back("xml:lang", e.language);
        w.element(tag, e.value, attrs);
    }
    w.close();
    return w.take();
}

void write_header(xml::XmlWriter& w, const RecordHeader& header) {
    if (header.deleted) w.open("header", {{"status", "deleted"}});
    else w.open("header");
    w.element("identifier", header.identifier);
    w.element("datestamp", format_datestamp(header.datestamp));
    for (const auto& s : header.set_specs) w.element("setSpec", s);
    w.close();
}

void write_record(xml::XmlWriter& w, const RecordHeader& header, std::string_view payload) {
    w.open("record");
    write_header(w, header);
    if (!header.deleted) {
        w.open("metadata");
        w.raw(payload);
        w.close();
    }
    w.close();
}

void write_token(xml::XmlWriter& w, const ResumptionToken& token) {
    xml::XmlWriter::Attrs attrs;
    if (token.expiration) attrs.emplace_back("expirationDate", format_datestamp(*token.expiration));
    if (token.complete_list_size) attrs.emplace_back("completeListSize", std::to_string(*token.complete_list_size));
    if (token.cursor) attrs.emplace_back("cursor", std::to_string(*token.cursor));
    w.element("resumptionToken", token.token, attrs);
}

std::string serialize_record(const MetadataRecord& record) {
    xml::XmlWriter w;
    w.open("record", {{"xmlns", std::string(kOaiNs)}, {"metadataPrefix", record.format_prefix}});
    write_header(w, record.header);
    if (!record.header.deleted) {
        w.open("metadata");
        if (is_dc_format(record.format_prefix)) w.raw(serialize_dc_payload(record.format_prefix, record.elements));
        else w.raw(record.raw_xml);
        w.close();
    }
    w.close();
    return w.take();
}

namespace {

void open_root(xml::XmlWriter& w, Instant response_date, std::string_view base_url, const RequestArgs& request) {
    w.declaration();
    w.open("OAI-PMH", {{"xmlns", std::string(kOaiNs)},
                       {"xmlns:xsi", std::string(kXsiNs)},
                       {"xsi:schemaLocation", std::string(kOaiNs) + " " + std::string(kOaiSchema)}});
    w.element("responseDate", format_datestamp(response_date));
    w.element("request", base_url, request);
}

}  // namespace

std::string make_response(Instant response_date, std::string_view base_url, const RequestArgs& request,
                          std::string_view verb, std::string_view body) {
    xml::XmlWriter w;
    open_root(w, response_date, base_url, request);
    w.open(verb).raw(body).close();
    w.close();
    return w.take();
}

std::string make_error_response(Instant response_date, std::string_view base_url, const RequestArgs& request,
                                const std::vector<ProtocolError>& errors) {
    xml::XmlWriter w;
    open_root(w, response_date, base_url, request);
    for (const auto& e : errors) w.element("error", e.message, {{"code", std::string(to_string(e.code))}});
    w.close();
    return w.take();
}

}  // namespace harvestkit::oai
