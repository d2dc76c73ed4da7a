// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace pspt {

struct Passage {
    std::string passage_id;
    std::string text;
    bool relevant = false;
};

struct QaRecord {
    std::string question_id;
    std::string question_text;
    std::vector<Passage> passages;

    const Passage* find_passage(const std::string& passage_id) const;
    std::size_t relevant_count() const;
};

class QaDataset {
public:
    QaDataset() = default;
    explicit QaDataset(std::vector<QaRecord> records);

    const std::vector<QaRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    const QaRecord* find(const std::string& question_id) const;

    /// Every question and passage text, for vocabulary building.
    std::vector<std::string> texts() const;

private:
    std::vector<QaRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// JSON-lines, one question per line:
///   {"question_id", "question_text", "passages": [{"passage_id", "text", "relevant"}]}
/// Blank lines are skipped. Malformed lines raise a Data error with the line
/// number; an input without any record is also a Data error.
QaDataset parse_dataset(std::istream& in, const std::string& source = "<stream>");
QaDataset load_dataset(const std::string& path);

void write_dataset(std::ostream& out, const QaDataset& dataset);
void save_dataset(const std::string& path, const QaDataset& dataset);

} // namespace pspt
