// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Retrieval runs and their TREC / JSON-lines interchange formats.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pspt {

struct RunEntry {
    std::string passage_id;
    std::size_t rank = 0; // 1-based
    double score = 0.0;
};

struct QueryRanking {
    std::string query_id;
    std::vector<RunEntry> entries; // by rank
};

struct RetrievalRun {
    std::string tag;
    std::vector<QueryRanking> queries;

    const QueryRanking* find(const std::string& query_id) const;
    /// Ranks contiguous from 1 and ids unique per query, else Input error.
    void validate() const;
};

/// Lines `query_id Q0 passage_id rank score tag`, or JSON objects with the
/// keys query_id, passage_id, rank, score, tag. Entries are grouped by tag
/// (in order of first appearance), then by query, then sorted by rank.
std::vector<RetrievalRun> parse_runs(std::istream& in, const std::string& source = "<stream>");
std::vector<RetrievalRun> load_runs(const std::string& path);

/// Exactly one run in the file, else Input error.
RetrievalRun load_run(const std::string& path);

/// TREC format; scores use the shortest round-trip representation.
void write_run(std::ostream& out, const RetrievalRun& run);
void save_run(const std::string& path, const RetrievalRun& run);

std::string format_double(double v);

} // namespace pspt
