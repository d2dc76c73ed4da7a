// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/bm25.hpp"

#include "pspt/error.hpp"
#include "pspt/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pspt {

Bm25Index::Bm25Index(const std::vector<std::pair<std::string, std::string>>& docs, Bm25Params params)
    : params_(params) {
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto& [id, text] : docs) {
        if (!seen.insert(id).second) continue;
        ids_.push_back(id);
        std::unordered_map<std::string, std::size_t> tf;
        const auto words = split_words(text);
        for (const auto& w : words) ++tf[w];
        for (const auto& [w, n] : tf) ++df_[w];
        length_.push_back(words.size());
        total += words.size();
        tf_.push_back(std::move(tf));
    }
    avgdl_ = ids_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(ids_.size());
}

double Bm25Index::score(const std::vector<std::string>& query_terms, std::size_t doc) const {
    const double n_docs = static_cast<double>(ids_.size());
    const double norm = avgdl_ > 0.0 ? static_cast<double>(length_[doc]) / avgdl_ : 0.0;
    double s = 0.0;
    for (const auto& t : query_terms) {
        auto it = tf_[doc].find(t);
        if (it == tf_[doc].end()) continue;
        const double n_t = static_cast<double>(df_.at(t));
        const double idf = std::log(1.0 + (n_docs - n_t + 0.5) / (n_t + 0.5));
        const double tf = static_cast<double>(it->second);
        s += idf * tf * (params_.k1 + 1.0) / (tf + params_.k1 * (1.0 - params_.b + params_.b * norm));
    }
    return s;
}

std::vector<RunEntry> Bm25Index::search(const std::string& query, std::size_t k) const {
    if (ids_.empty()) fail(ErrorKind::Data, "BM25 index is empty");
    if (k == 0) fail(ErrorKind::Configuration, "BM25 depth k must be at least 1");
    const auto words = split_words(query);
    std::vector<std::string> terms;
    std::set<std::string> uniq;
    for (const auto& w : words) {
        if (uniq.insert(w).second) terms.push_back(w);
    }
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t d = 0; d < ids_.size(); ++d) scored.emplace_back(score(terms, d), d);
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return ids_[a.second] < ids_[b.second];
    });
    std::vector<RunEntry> out;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
        out.push_back({ids_[scored[i].second], i + 1, scored[i].first});
    }
    return out;
}

RetrievalRun bm25_run(const QaDataset& dataset, std::size_t k, bool corpus_mode, Bm25Params params,
                      const std::string& tag) {
    RetrievalRun run;
    run.tag = tag;
    if (corpus_mode) {
        std::vector<std::pair<std::string, std::string>> docs;
        for (const auto& r : dataset.records()) {
            for (const auto& p : r.passages) docs.emplace_back(p.passage_id, p.text);
        }
        Bm25Index index(docs, params);
        for (const auto& r : dataset.records()) run.queries.push_back({r.question_id, index.search(r.question_text, k)});
    } else {
        for (const auto& r : dataset.records()) {
            std::vector<std::pair<std::string, std::string>> docs;
            for (const auto& p : r.passages) docs.emplace_back(p.passage_id, p.text);
            Bm25Index index(docs, params);
            run.queries.push_back({r.question_id, index.search(r.question_text, k)});
        }
    }
    return run;
}

} // namespace pspt
