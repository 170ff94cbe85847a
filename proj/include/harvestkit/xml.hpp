#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "harvestkit/expected.hpp"

namespace harvestkit::xml {

struct XmlError {
    enum class Kind {
        Encoding,   // ill-formed UTF-8
        Syntax,     // not well-formed
        Reference,  // bad or unescaped entity/character reference
        Namespace,  // unbound prefix
        Limit,      // depth limit, DTD internal subset
    };
    Kind kind = Kind::Syntax;
    std::size_t offset = 0;
    std::string message;
};

std::string_view to_string(XmlError::Kind k);

class XmlParseError : public std::runtime_error {
public:
    explicit XmlParseError(XmlError e) : std::runtime_error(e.message), error_(std::move(e)) {}
    const XmlError& error() const noexcept { return error_; }

private:
    XmlError error_;
};

struct XmlOptions {
    /// When false, unbound prefixes resolve to the empty namespace instead of
    /// failing. Used for record fragments cut out of a larger document.
    bool strict_namespaces = true;
    std::size_t max_depth = 256;
};

struct XmlAttribute {
    std::string qname;
    std::string local;
    std::string ns;
    std::string value;
};

struct XmlElement {
    std::string qname;
    std::string prefix;
    std::string local;
    std::string ns;
    std::vector<XmlAttribute> attributes;
    std::vector<XmlElement> children;
    /// Concatenated character data that sits directly inside this element.
    std::string text;
    /// [begin, end) byte span of the whole element in the source document.
    std::size_t begin = 0;
    std::size_t end = 0;
    /// [content_begin, content_end) span between the start and end tags.
    std::size_t content_begin = 0;
    std::size_t content_end = 0;

    const XmlAttribute* find_attribute(std::string_view local_name, std::string_view ns_uri = {}) const;
    const std::string* attribute(std::string_view local_name) const;
    const XmlElement* child(std::string_view local_name) const;
    std::vector<const XmlElement*> children_named(std::string_view local_name) const;
    bool has_element_children() const noexcept { return !children.empty(); }
};

/// Pull parser over a complete in-memory document. Each call to next()
/// yields one event; malformed input raises XmlParseError with the byte
/// offset of the defect.
class XmlReader {
public:
    enum class Event { StartElement, EndElement, Text, EndDocument };

    explicit XmlReader(std::string_view doc, XmlOptions options = {});

    Event next();

    // Valid after StartElement.
    const std::string& qname() const noexcept { return qname_; }
    const std::string& prefix() const noexcept { return prefix_; }
    const std::string& local_name() const noexcept { return local_; }
    const std::string& ns() const noexcept { return ns_; }
    const std::vector<XmlAttribute>& attributes() const noexcept { return attrs_; }
    /// StartElement: offset of '<'. EndElement: offset one past '>'.
    std::size_t offset() const noexcept { return offset_; }
    /// StartElement: offset one past the start tag's '>'. EndElement: offset of '<' of the end tag.
    std::size_t inner_offset() const noexcept { return inner_offset_; }
    // Valid after Text.
    const std::string& text() const noexcept { return text_; }
    std::size_t depth() const noexcept { return stack_.size(); }
    std::string_view source() const noexcept { return doc_; }

private:
    struct Open {
        std::string qname;
        std::size_t ns_scope_size;
    };

    [[noreturn]] void fail(XmlError::Kind kind, std::size_t at, std::string message) const;
    bool starts_with(std::string_view s) const noexcept;
    void skip_ws() noexcept;
    std::string read_name();
    void read_reference(std::string& out);
    void skip_comment();
    void skip_pi();
    void skip_doctype();
    void read_declaration();
    void read_start_tag();
    void read_end_tag();
    void read_text();
    void read_cdata();
    void skip_misc();
    std::string resolve(std::string_view prefix, std::size_t at, bool is_attribute) const;

    std::string_view doc_;
    XmlOptions options_;
    std::size_t pos_ = 0;
    bool seen_root_ = false;
    bool finished_root_ = false;
    bool pending_empty_end_ = false;
    std::vector<Open> stack_;
    std::vector<std::pair<std::string, std::string>> ns_scope_;

    std::string qname_, prefix_, local_, ns_;
    std::vector<XmlAttribute> attrs_;
    std::size_t offset_ = 0;
    std::size_t inner_offset_ = 0;
    std::string text_;
};

/// Parses a whole document into a tree of elements.
Expected<XmlElement, XmlError> parse(std::string_view doc, XmlOptions options = {});

std::string escape_text(std::string_view s);
std::string escape_attribute(std::string_view s);

/// Compact XML serializer. Tag names and attribute names are written as
/// given; text and attribute values are escaped.
class XmlWriter {
public:
    using Attrs = std::vector<std::pair<std::string, std::string>>;

    void declaration();
    XmlWriter& open(std::string_view qname, const Attrs& attrs = {});
    XmlWriter& close();
    XmlWriter& text(std::string_view s);
    XmlWriter& raw(std::string_view s);
    XmlWriter& element(std::string_view qname, std::string_view text, const Attrs& attrs = {});
    XmlWriter& empty(std::string_view qname, const Attrs& attrs = {});

    const std::string& str() const noexcept { return out_; }
    std::string take() { return std::move(out_); }

private:
    void write_start(std::string_view qname, const Attrs& attrs);

    std::string out_;
    std::vector<std::string> open_;
};

}  // namespace harvestkit::xml
