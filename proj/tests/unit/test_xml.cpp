#include <gtest/gtest.h>

#include "harvestkit/xml.hpp"

using namespace harvestkit;
using xml::XmlError;

namespace {

XmlError parse_error(std::string_view doc, xml::XmlOptions opts = {}) {
    auto r = xml::parse(doc, opts);
    EXPECT_FALSE(r.has_value()) << doc;
    return r ? XmlError{} : r.error();
}

}  // namespace

TEST(Xml, ParsesTreeWithNamespacesAndSpans) {
    const std::string doc =
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<r xmlns=\"urn:a\" xmlns:b=\"urn:b\"><b:x k=\"1 &amp; 2\">t&lt;&#233;&#x41;</b:x><y/></r>";
    auto root = xml::parse(doc);
    ASSERT_TRUE(root.has_value()) << root.error().message;
    EXPECT_EQ(root->ns, "urn:a");
    ASSERT_EQ(root->children.size(), 2u);
    const auto& x = root->children[0];
    EXPECT_EQ(x.local, "x");
    EXPECT_EQ(x.ns, "urn:b");
    EXPECT_EQ(x.text, "t<\xC3\xA9"
                      "A");
    EXPECT_EQ(*x.attribute("k"), "1 & 2");
    EXPECT_EQ(doc.substr(x.begin, x.end - x.begin), "<b:x k=\"1 &amp; 2\">t&lt;&#233;&#x41;</b:x>");
    EXPECT_EQ(doc.substr(x.content_begin, x.content_end - x.content_begin), "t&lt;&#233;&#x41;");
    EXPECT_EQ(root->children[1].ns, "urn:a");
    EXPECT_EQ(root->child("y"), &root->children[1]);
}

TEST(Xml, CdataCommentsAndProcessingInstructions) {
    auto root = xml::parse("<!-- c --><a><?pi x?><![CDATA[<&>]]><!-- in --></a>");
    ASSERT_TRUE(root.has_value());
    EXPECT_EQ(root->text, "<&>");
}

TEST(Xml, RejectsIllFormedUtf8WithOffset) {
    auto e = parse_error("<a>ok\xC0\x80</a>");
    EXPECT_EQ(e.kind, XmlError::Kind::Encoding);
    EXPECT_EQ(e.offset, 5u);
}

TEST(Xml, RejectsUnescapedAmpersand) {
    auto e = parse_error("<a>http://x/?a=1&b=2</a>");
    EXPECT_EQ(e.kind, XmlError::Kind::Reference);
    EXPECT_EQ(e.offset, 16u);
}

TEST(Xml, RejectsStructuralDefects) {
    EXPECT_EQ(parse_error("<a><b></a>").kind, XmlError::Kind::Syntax);
    EXPECT_EQ(parse_error("<a>").kind, XmlError::Kind::Syntax);
    EXPECT_EQ(parse_error("<a/><b/>").kind, XmlError::Kind::Syntax);
    EXPECT_EQ(parse_error("<a x='1' x='2'/>").kind, XmlError::Kind::Syntax);
    EXPECT_EQ(parse_error("<a>&bogus;</a>").kind, XmlError::Kind::Reference);
    EXPECT_EQ(parse_error("<a>&#0;</a>").kind, XmlError::Kind::Reference);
    EXPECT_EQ(parse_error("<a>\x01</a>").kind, XmlError::Kind::Syntax);
    EXPECT_EQ(parse_error("<p:a/>").kind, XmlError::Kind::Namespace);
    EXPECT_EQ(parse_error("<!DOCTYPE a [<!ENTITY e 'x'>]><a/>").kind, XmlError::Kind::Limit);
    EXPECT_EQ(parse_error("<?xml version=\"1.0\" encoding=\"ISO-8859-1\"?><a/>").kind, XmlError::Kind::Encoding);
}

TEST(Xml, LenientNamespacesForFragments) {
    auto root = xml::parse("<p:a><q:b/></p:a>", {.strict_namespaces = false});
    ASSERT_TRUE(root.has_value());
    EXPECT_EQ(root->local, "a");
    EXPECT_EQ(root->ns, "");
}

TEST(Xml, DepthLimit) {
    std::string deep;
    for (int i = 0; i < 300; ++i) deep += "<a>";
    for (int i = 0; i < 300; ++i) deep += "</a>";
    EXPECT_EQ(parse_error(deep).kind, XmlError::Kind::Limit);
}

TEST(Xml, WriterEscapesAndRoundTrips) {
    xml::XmlWriter w;
    w.open("r", {{"xmlns", "urn:x"}, {"q", "a\"<b"}}).element("t", "1 < 2 & 3 > \"x\"").empty("e").close();
    auto root = xml::parse(w.str());
    ASSERT_TRUE(root.has_value()) << w.str();
    EXPECT_EQ(*root->attribute("q"), "a\"<b");
    EXPECT_EQ(root->child("t")->text, "1 < 2 & 3 > \"x\"");
    EXPECT_EQ(xml::escape_text("a&b<c>"), "a&amp;b&lt;c&gt;");
}

TEST(Xml, PullReaderReportsEventsAndOffsets) {
    const std::string doc = "<a><b x=\"1\">hi</b></a>";
    xml::XmlReader r(doc);
    EXPECT_EQ(r.next(), xml::XmlReader::Event::StartElement);
    EXPECT_EQ(r.local_name(), "a");
    EXPECT_EQ(r.next(), xml::XmlReader::Event::StartElement);
    EXPECT_EQ(r.offset(), 3u);
    EXPECT_EQ(r.inner_offset(), 12u);
    EXPECT_EQ(r.attributes().at(0).value, "1");
    EXPECT_EQ(r.next(), xml::XmlReader::Event::Text);
    EXPECT_EQ(r.text(), "hi");
    EXPECT_EQ(r.next(), xml::XmlReader::Event::EndElement);
    EXPECT_EQ(r.inner_offset(), 14u);
    EXPECT_EQ(r.offset(), 18u);
    EXPECT_EQ(r.next(), xml::XmlReader::Event::EndElement);
    EXPECT_EQ(r.next(), xml::XmlReader::Event::EndDocument);
}
