#include "harvestkit/xml.hpp"

#include <algorithm>
#include <cctype>

#include "harvestkit/utf8.hpp"

namespace harvestkit::xml {

namespace {

constexpr std::string_view kXmlNs = "http://www.w3.org/XML/1998/namespace";
constexpr std::string_view kXmlnsNs = "http://www.w3.org/2000/xmlns/";

bool is_ws(char c) noexcept { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool is_name_start(unsigned char c) noexcept {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c == ':' || c >= 0x80;
}

bool is_name_char(unsigned char c) noexcept {
    return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

bool is_legal_char(char32_t cp) noexcept {
    return cp == 0x9 || cp == 0xA || cp == 0xD || (cp >= 0x20 && cp <= 0xD7FF) || (cp >= 0xE000 && cp <= 0xFFFD) ||
           (cp >= 0x10000 && cp <= 0x10FFFF);
}

}  // namespace

std::string_view to_string(XmlError::Kind k) {
    switch (k) {
        case XmlError::Kind::Encoding: return "encoding";
        case XmlError::Kind::Syntax: return "syntax";
        case XmlError::Kind::Reference: return "reference";
        case XmlError::Kind::Namespace: return "namespace";
        case XmlError::Kind::Limit: return "limit";
    }
    return "syntax";
}

const XmlAttribute* XmlElement::find_attribute(std::string_view local_name, std::string_view ns_uri) const {
    for (const auto& a : attributes)
        if (a.local == local_name && a.ns == ns_uri) return &a;
    return nullptr;
}

const std::string* XmlElement::attribute(std::string_view local_name) const {
    const auto* a = find_attribute(local_name);
    return a ? &a->value : nullptr;
}

const XmlElement* XmlElement::child(std::string_view local_name) const {
    for (const auto& c : children)
        if (c.local == local_name) return &c;
    return nullptr;
}

std::vector<const XmlElement*> XmlElement::children_named(std::string_view local_name) const {
    std::vector<const XmlElement*> out;
    for (const auto& c : children)
        if (c.local == local_name) out.push_back(&c);
    return out;
}

XmlReader::XmlReader(std::string_view doc, XmlOptions options) : doc_(doc), options_(options) {
    if (auto bad = utf8::find_invalid(doc_))
        fail(XmlError::Kind::Encoding, *bad, "invalid UTF-8 byte sequence");
    std::size_t i = 0;
    while (i < doc_.size()) {
        const std::size_t at = i;
        const char32_t cp = utf8::decode_at(doc_, i);
        if (!is_legal_char(cp)) fail(XmlError::Kind::Syntax, at, "character not allowed in XML");
    }
}

void XmlReader::fail(XmlError::Kind kind, std::size_t at, std::string message) const {
    throw XmlParseError(XmlError{kind, at, std::move(message)});
}

bool XmlReader::starts_with(std::string_view s) const noexcept { return doc_.substr(pos_).starts_with(s); }

void XmlReader::skip_ws() noexcept {
    while (pos_ < doc_.size() && is_ws(doc_[pos_])) ++pos_;
}

std::string XmlReader::read_name() {
    const std::size_t start = pos_;
    if (pos_ >= doc_.size() || !is_name_start(static_cast<unsigned char>(doc_[pos_])))
        fail(XmlError::Kind::Syntax, pos_, "expected a name");
    ++pos_;
    while (pos_ < doc_.size() && is_name_char(static_cast<unsigned char>(doc_[pos_]))) ++pos_;
    return std::string(doc_.substr(start, pos_ - start));
}

void XmlReader::read_reference(std::string& out) {
    const std::size_t start = pos_;
    ++pos_;  // '&'
    if (pos_ < doc_.size() && doc_[pos_] == '#') {
        ++pos_;
        bool hex = false;
        if (pos_ < doc_.size() && doc_[pos_] == 'x') {
            hex = true;
            ++pos_;
        }
        char32_t cp = 0;
        std::size_t digits = 0;
        while (pos_ < doc_.size() && doc_[pos_] != ';') {
            const char c = doc_[pos_];
            int v;
            if (c >= '0' && c <= '9') v = c - '0';
            else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
            else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
            else fail(XmlError::Kind::Reference, start, "malformed character reference");
            cp = cp * (hex ? 16 : 10) + static_cast<char32_t>(v);
            if (cp > 0x10FFFF) fail(XmlError::Kind::Reference, start, "character reference out of range");
            ++digits;
            ++pos_;
        }
        if (pos_ >= doc_.size() || digits == 0) fail(XmlError::Kind::Reference, start, "malformed character reference");
        ++pos_;
        if (!is_legal_char(cp)) fail(XmlError::Kind::Reference, start, "character reference to illegal character");
        utf8::append(out, cp);
        return;
    }
    std::size_t end = pos_;
    while (end < doc_.size() && is_name_char(static_cast<unsigned char>(doc_[end]))) ++end;
    if (end >= doc_.size() || doc_[end] != ';' || end == pos_)
        fail(XmlError::Kind::Reference, start, "unescaped '&'");
    const std::string_view name = doc_.substr(pos_, end - pos_);
    if (name == "lt") out += '<';
    else if (name == "gt") out += '>';
    else if (name == "amp") out += '&';
    else if (name == "apos") out += '\'';
    else if (name == "quot") out += '"';
    else fail(XmlError::Kind::Reference, start, "undefined entity '" + std::string(name) + "'");
    pos_ = end + 1;
}

void XmlReader::skip_comment() {
    const std::size_t start = pos_;
    pos_ += 4;
    const auto end = doc_.find("--", pos_);
    if (end == std::string_view::npos) fail(XmlError::Kind::Syntax, start, "unterminated comment");
    if (end + 2 >= doc_.size() || doc_[end + 2] != '>') fail(XmlError::Kind::Syntax, end, "'--' inside comment");
    pos_ = end + 3;
}

void XmlReader::skip_pi() {
    const std::size_t start = pos_;
    pos_ += 2;
    std::string target = read_name();
    std::string lower = target;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "xml") fail(XmlError::Kind::Syntax, start, "XML declaration not at start of document");
    const auto end = doc_.find("?>", pos_);
    if (end == std::string_view::npos) fail(XmlError::Kind::Syntax, start, "unterminated processing instruction");
    pos_ = end + 2;
}

void XmlReader::skip_doctype() {
    const std::size_t start = pos_;
    pos_ += 9;
    char quote = 0;
    while (pos_ < doc_.size()) {
        const char c = doc_[pos_];
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '[') {
            fail(XmlError::Kind::Limit, pos_, "internal DTD subset not supported");
        } else if (c == '>') {
            ++pos_;
            return;
        }
        ++pos_;
    }
    fail(XmlError::Kind::Syntax, start, "unterminated DOCTYPE");
}

void XmlReader::read_declaration() {
    const std::size_t start = pos_;
    const auto end = doc_.find("?>", pos_);
    if (end == std::string_view::npos) fail(XmlError::Kind::Syntax, start, "unterminated XML declaration");
    const std::string_view decl = doc_.substr(pos_, end - pos_);
    if (decl.find("version") == std::string_view::npos)
        fail(XmlError::Kind::Syntax, start, "XML declaration without version");
    if (auto enc = decl.find("encoding"); enc != std::string_view::npos) {
        auto q = decl.find_first_of("\"'", enc);
        if (q == std::string_view::npos) fail(XmlError::Kind::Syntax, start + enc, "malformed encoding declaration");
        const auto qe = decl.find(decl[q], q + 1);
        if (qe == std::string_view::npos) fail(XmlError::Kind::Syntax, start + enc, "malformed encoding declaration");
        std::string name(decl.substr(q + 1, qe - q - 1));
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        if (name != "utf-8" && name != "utf8")
            fail(XmlError::Kind::Encoding, start + enc, "unsupported document encoding '" + name + "'");
    }
    pos_ = end + 2;
}

void XmlReader::skip_misc() {
    bool seen_doctype = false;
    for (;;) {
        skip_ws();
        if (starts_with("<!--")) {
            skip_comment();
        } else if (starts_with("<?")) {
            skip_pi();
        } else if (!seen_root_ && !seen_doctype && starts_with("<!DOCTYPE")) {
            skip_doctype();
            seen_doctype = true;
        } else {
            return;
        }
    }
}

std::string XmlReader::resolve(std::string_view prefix, std::size_t at, bool is_attribute) const {
    if (prefix == "xml") return std::string(kXmlNs);
    if (prefix == "xmlns") return std::string(kXmlnsNs);
    if (prefix.empty() && is_attribute) return {};
    for (auto it = ns_scope_.rbegin(); it != ns_scope_.rend(); ++it)
        if (it->first == prefix) return it->second;
    if (prefix.empty()) return {};
    if (options_.strict_namespaces)
        fail(XmlError::Kind::Namespace, at, "unbound namespace prefix '" + std::string(prefix) + "'");
    return {};
}

namespace {

void split_qname(const std::string& qname, std::string& prefix, std::string& local) {
    const auto colon = qname.find(':');
    if (colon == std::string::npos) {
        prefix.clear();
        local = qname;
    } else {
        prefix = qname.substr(0, colon);
        local = qname.substr(colon + 1);
    }
}

}  // namespace

void XmlReader::read_start_tag() {
    offset_ = pos_;
    ++pos_;
    qname_ = read_name();
    attrs_.clear();
    std::vector<std::size_t> attr_offsets;
    for (;;) {
        const std::size_t before = pos_;
        skip_ws();
        if (pos_ >= doc_.size()) fail(XmlError::Kind::Syntax, offset_, "unterminated start tag");
        if (doc_[pos_] == '>' || starts_with("/>")) break;
        if (pos_ == before) fail(XmlError::Kind::Syntax, pos_, "expected whitespace before attribute");
        const std::size_t attr_at = pos_;
        XmlAttribute a;
        a.qname = read_name();
        skip_ws();
        if (pos_ >= doc_.size() || doc_[pos_] != '=') fail(XmlError::Kind::Syntax, pos_, "expected '='");
        ++pos_;
        skip_ws();
        if (pos_ >= doc_.size() || (doc_[pos_] != '"' && doc_[pos_] != '\''))
            fail(XmlError::Kind::Syntax, pos_, "expected quoted attribute value");
        const char quote = doc_[pos_++];
        for (;;) {
            if (pos_ >= doc_.size()) fail(XmlError::Kind::Syntax, attr_at, "unterminated attribute value");
            const char c = doc_[pos_];
            if (c == quote) {
                ++pos_;
                break;
            }
            if (c == '<') fail(XmlError::Kind::Syntax, pos_, "'<' in attribute value");
            if (c == '&') {
                read_reference(a.value);
                continue;
            }
            if (c == '\r' && pos_ + 1 < doc_.size() && doc_[pos_ + 1] == '\n') ++pos_;
            a.value += is_ws(c) ? ' ' : c;
            ++pos_;
        }
        for (const auto& prev : attrs_)
            if (prev.qname == a.qname) fail(XmlError::Kind::Syntax, attr_at, "duplicate attribute '" + a.qname + "'");
        attrs_.push_back(std::move(a));
        attr_offsets.push_back(attr_at);
    }
    bool empty = false;
    if (doc_[pos_] == '/') {
        empty = true;
        pos_ += 2;
    } else {
        ++pos_;
    }
    inner_offset_ = pos_;

    if (stack_.size() >= options_.max_depth) fail(XmlError::Kind::Limit, offset_, "element nesting too deep");

    const std::size_t scope_size = ns_scope_.size();
    for (std::size_t i = 0; i < attrs_.size(); ++i) {
        const auto& a = attrs_[i];
        if (a.qname == "xmlns") {
            ns_scope_.emplace_back("", a.value);
        } else if (a.qname.starts_with("xmlns:")) {
            if (a.value.empty() && options_.strict_namespaces)
                fail(XmlError::Kind::Namespace, attr_offsets[i], "empty namespace binding for prefixed name");
            ns_scope_.emplace_back(a.qname.substr(6), a.value);
        }
    }
    split_qname(qname_, prefix_, local_);
    if (options_.strict_namespaces && (local_.empty() || local_.find(':') != std::string::npos))
        fail(XmlError::Kind::Namespace, offset_, "malformed qualified name '" + qname_ + "'");
    ns_ = resolve(prefix_, offset_, false);
    for (std::size_t i = 0; i < attrs_.size(); ++i) {
        auto& a = attrs_[i];
        std::string prefix;
        split_qname(a.qname, prefix, a.local);
        if (a.qname == "xmlns") {
            a.ns = std::string(kXmlnsNs);
            continue;
        }
        a.ns = resolve(prefix, attr_offsets[i], true);
    }

    stack_.push_back(Open{qname_, scope_size});
    seen_root_ = true;
    pending_empty_end_ = empty;
}

void XmlReader::read_end_tag() {
    inner_offset_ = pos_;
    const std::size_t start = pos_;
    pos_ += 2;
    const std::string name = read_name();
    skip_ws();
    if (pos_ >= doc_.size() || doc_[pos_] != '>') fail(XmlError::Kind::Syntax, pos_, "expected '>'");
    ++pos_;
    if (stack_.empty() || stack_.back().qname != name)
        fail(XmlError::Kind::Syntax, start,
             "mismatched end tag </" + name + ">" + (stack_.empty() ? "" : ", expected </" + stack_.back().qname + ">"));
    offset_ = pos_;
    qname_ = name;
    split_qname(qname_, prefix_, local_);
    ns_scope_.resize(stack_.back().ns_scope_size);
    stack_.pop_back();
    if (stack_.empty()) finished_root_ = true;
}

void XmlReader::read_cdata() {
    const std::size_t start = pos_;
    pos_ += 9;
    const auto end = doc_.find("]]>", pos_);
    if (end == std::string_view::npos) fail(XmlError::Kind::Syntax, start, "unterminated CDATA section");
    for (std::size_t i = pos_; i < end; ++i) {
        if (doc_[i] == '\r') {
            text_ += '\n';
            if (i + 1 < end && doc_[i + 1] == '\n') ++i;
        } else {
            text_ += doc_[i];
        }
    }
    pos_ = end + 3;
}

void XmlReader::read_text() {
    text_.clear();
    offset_ = pos_;
    while (pos_ < doc_.size()) {
        const char c = doc_[pos_];
        if (c == '<') {
            if (starts_with("<![CDATA[")) {
                read_cdata();
                continue;
            }
            break;
        }
        if (c == '&') {
            read_reference(text_);
            continue;
        }
        if (c == ']' && starts_with("]]>")) fail(XmlError::Kind::Syntax, pos_, "']]>' in character data");
        if (c == '\r') {
            text_ += '\n';
            if (pos_ + 1 < doc_.size() && doc_[pos_ + 1] == '\n') ++pos_;
            ++pos_;
            continue;
        }
        text_ += c;
        ++pos_;
    }
}

XmlReader::Event XmlReader::next() {
    if (pending_empty_end_) {
        pending_empty_end_ = false;
        offset_ = inner_offset_;
        ns_scope_.resize(stack_.back().ns_scope_size);
        stack_.pop_back();
        if (stack_.empty()) finished_root_ = true;
        return Event::EndElement;
    }
    for (;;) {
        if (stack_.empty()) {
            if (finished_root_) {
                skip_misc();
                if (pos_ != doc_.size()) fail(XmlError::Kind::Syntax, pos_, "content after the root element");
                return Event::EndDocument;
            }
            if (pos_ == 0) {
                if (starts_with("\xEF\xBB\xBF")) pos_ = 3;
                if (starts_with("<?xml") && pos_ + 5 < doc_.size() && is_ws(doc_[pos_ + 5])) read_declaration();
            }
            skip_misc();
            if (pos_ >= doc_.size()) fail(XmlError::Kind::Syntax, pos_, "no root element");
            if (doc_[pos_] != '<' || starts_with("<!") || starts_with("</"))
                fail(XmlError::Kind::Syntax, pos_, "expected the root element");
            read_start_tag();
            return Event::StartElement;
        }
        if (pos_ >= doc_.size())
            fail(XmlError::Kind::Syntax, pos_, "unexpected end of document inside <" + stack_.back().qname + ">");
        if (doc_[pos_] == '<') {
            if (starts_with("</")) {
                read_end_tag();
                return Event::EndElement;
            }
            if (starts_with("<!--")) {
                skip_comment();
                continue;
            }
            if (starts_with("<![CDATA[")) {
                read_text();
                return Event::Text;
            }
            if (starts_with("<?")) {
                skip_pi();
                continue;
            }
            if (starts_with("<!")) fail(XmlError::Kind::Syntax, pos_, "markup declaration inside element");
            read_start_tag();
            return Event::StartElement;
        }
        read_text();
        return Event::Text;
    }
}

Expected<XmlElement, XmlError> parse(std::string_view doc, XmlOptions options) {
    try {
        XmlReader reader(doc, options);
        std::vector<XmlElement> stack;
        XmlElement root;
        for (;;) {
            switch (reader.next()) {
                case XmlReader::Event::StartElement: {
                    XmlElement e;
                    e.qname = reader.qname();
                    e.prefix = reader.prefix();
                    e.local = reader.local_name();
                    e.ns = reader.ns();
                    e.attributes = reader.attributes();
                    e.begin = reader.offset();
                    e.content_begin = reader.inner_offset();
                    stack.push_back(std::move(e));
                    break;
                }
                case XmlReader::Event::EndElement: {
                    XmlElement e = std::move(stack.back());
                    stack.pop_back();
                    e.end = reader.offset();
                    e.content_end = reader.inner_offset();
                    if (stack.empty()) root = std::move(e);
                    else stack.back().children.push_back(std::move(e));
                    break;
                }
                case XmlReader::Event::Text:
                    stack.back().text += reader.text();
                    break;
                case XmlReader::Event::EndDocument:
                    return root;
            }
        }
    } catch (const XmlParseError& e) {
        return unexpected(e.error());
    }
}

std::string escape_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '\r': out += "&#13;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string escape_attribute(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\t': out += "&#9;"; break;
            case '\n': out += "&#10;"; break;
            case '\r': out += "&#13;"; break;
            default: out += c;
        }
    }
    return out;
}

void XmlWriter::declaration() { out_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"; }

void XmlWriter::write_start(std::string_view qname, const Attrs& attrs) {
    out_ += '<';
    out_ += qname;
    for (const auto& [k, v] : attrs) {
        out_ += ' ';
        out_ += k;
        out_ += "=\"";
        out_ += escape_attribute(v);
        out_ += '"';
    }
}

XmlWriter& XmlWriter::open(std::string_view qname, const Attrs& attrs) {
    write_start(qname, attrs);
    out_ += '>';
    open_.emplace_back(qname);
    return *this;
}

XmlWriter& XmlWriter::close() {
    out_ += "</";
    out_ += open_.back();
    out_ += '>';
    open_.pop_back();
    return *this;
}

XmlWriter& XmlWriter::text(std::string_view s) {
    out_ += escape_text(s);
    return *this;
}

XmlWriter& XmlWriter::raw(std::string_view s) {
    out_ += s;
    return *this;
}

XmlWriter& XmlWriter::element(std::string_view qname, std::string_view text, const Attrs& attrs) {
    write_start(qname, attrs);
    out_ += '>';
    out_ += escape_text(text);
    out_ += "</";
    out_ += qname;
    out_ += '>';
    return *this;
}

XmlWriter& XmlWriter::empty(std::string_view qname, const Attrs& attrs) {
    write_start(qname, attrs);
    out_ += "/>";
    return *this;
}

}  // namespace harvestkit::xml
