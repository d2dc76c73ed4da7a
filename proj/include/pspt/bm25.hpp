// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Okapi BM25 lexical retriever used to produce first-stage candidate lists.

#pragma once

#include "pspt/dataset.hpp"
#include "pspt/run_file.hpp"

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace pspt {

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

class Bm25Index {
public:
    /// (passage_id, text) pairs; duplicate ids keep their first text.
    Bm25Index(const std::vector<std::pair<std::string, std::string>>& docs, Bm25Params params = {});

    std::size_t size() const { return ids_.size(); }

    /// Sum over distinct query terms of
    ///   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
    /// with idf(t) = ln(1 + (N - n_t + 0.5) / (n_t + 0.5)).
    double score(const std::vector<std::string>& query_terms, std::size_t doc) const;

    /// Top k by score, ties by passage id. An empty index is a Data error.
    std::vector<RunEntry> search(const std::string& query, std::size_t k) const;

private:
    Bm25Params params_;
    std::vector<std::string> ids_;
    std::vector<std::unordered_map<std::string, std::size_t>> tf_;
    std::vector<std::size_t> length_;
    std::unordered_map<std::string, std::size_t> df_;
    double avgdl_ = 0.0;
};

/// Per-question pools by default; `corpus_mode` searches every passage of
/// the dataset for every question.
RetrievalRun bm25_run(const QaDataset& dataset, std::size_t k, bool corpus_mode = false, Bm25Params params = {},
                      const std::string& tag = "bm25");

} // namespace pspt
