#include "harvestkit/index/search.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace harvestkit::index {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

void SearchIndex::put(IndexDocument doc) {
    remove(doc.doc_id);
    for (const auto& [field, text] : doc.fields) {
        const double w = field == "title" ? kTitleWeight : 1.0;
        for (auto& t : tokenize(text)) postings_[t][doc.doc_id] += w;
    }
    auto id = doc.doc_id;
    docs_.emplace(std::move(id), std::move(doc));
}

bool SearchIndex::remove(std::string_view doc_id) {
    auto it = docs_.find(doc_id);
    if (it == docs_.end()) return false;
    std::set<std::string> terms;
    for (const auto& [field, text] : it->second.fields)
        for (auto& t : tokenize(text)) terms.insert(std::move(t));
    for (const auto& t : terms) {
        auto p = postings_.find(t);
        if (p == postings_.end()) continue;
        p->second.erase(it->first);
        if (p->second.empty()) postings_.erase(p);
    }
    docs_.erase(it);
    return true;
}

std::vector<Hit> SearchIndex::search(std::string_view query) const {
    auto terms = tokenize(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    if (terms.empty()) return {};

    std::vector<const std::map<std::string, double>*> lists;
    for (const auto& t : terms) {
        auto p = postings_.find(t);
        if (p == postings_.end()) return {};
        lists.push_back(&p->second);
    }
    std::sort(lists.begin(), lists.end(), [](auto* a, auto* b) { return a->size() < b->size(); });

    std::vector<Hit> hits;
    for (const auto& [doc, tf] : *lists.front()) {
        double score = tf;
        bool all = true;
        for (std::size_t i = 1; i < lists.size() && all; ++i) {
            auto f = lists[i]->find(doc);
            if (f == lists[i]->end()) all = false;
            else score += f->second;
        }
        if (all) hits.push_back({doc, score});
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    return hits;
}

const IndexDocument* SearchIndex::find(std::string_view doc_id) const {
    auto it = docs_.find(doc_id);
    return it == docs_.end() ? nullptr : &it->second;
}

}  // namespace harvestkit::index
