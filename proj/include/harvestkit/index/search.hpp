#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace harvestkit::index {

struct IndexDocument {
    std::string doc_id;
    /// field name -> text; "title" is weighted above the rest.
    std::map<std::string, std::string> fields;
    /// Resource entity (resource-centric) or canonical URL (metadata-centric).
    std::optional<std::string> resource;
    /// Repository identifiers the document stands for.
    std::vector<std::string> records;

    bool operator==(const IndexDocument&) const = default;
};

/// Lowercased alphanumeric runs; bytes >= 0x80 count as word characters so
/// UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct Hit {
    std::string doc_id;
    double score = 0;

    bool operator==(const Hit&) const = default;
};

/// In-memory inverted index with conjunctive term matching and
/// term-frequency scoring.
class SearchIndex {
public:
    static constexpr double kTitleWeight = 3.0;

    /// Adds or replaces by doc_id.
    void put(IndexDocument doc);
    bool remove(std::string_view doc_id);

    /// Documents containing every query term, best score first, ties by doc_id.
    std::vector<Hit> search(std::string_view query) const;

    const IndexDocument* find(std::string_view doc_id) const;
    std::size_t size() const noexcept { return docs_.size(); }
    const std::map<std::string, IndexDocument, std::less<>>& documents() const noexcept { return docs_; }

private:
    std::map<std::string, IndexDocument, std::less<>> docs_;
    // term -> doc_id -> weighted frequency
    std::map<std::string, std::map<std::string, double>, std::less<>> postings_;
};

}  // namespace harvestkit::index
