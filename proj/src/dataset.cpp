// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/dataset.hpp"

#include "pspt/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace pspt {

using nlohmann::json;

const Passage* QaRecord::find_passage(const std::string& passage_id) const {
    for (const auto& p : passages) {
        if (p.passage_id == passage_id) return &p;
    }
    return nullptr;
}

std::size_t QaRecord::relevant_count() const {
    std::size_t n = 0;
    for (const auto& p : passages) n += p.relevant ? 1 : 0;
    return n;
}

QaDataset::QaDataset(std::vector<QaRecord> records) : records_(std::move(records)) {
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (!index_.emplace(records_[i].question_id, i).second) {
            fail(ErrorKind::Data, "duplicate question_id '" + records_[i].question_id + "'");
        }
    }
}

const QaRecord* QaDataset::find(const std::string& question_id) const {
    auto it = index_.find(question_id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

std::vector<std::string> QaDataset::texts() const {
    std::vector<std::string> out;
    for (const auto& r : records_) {
        out.push_back(r.question_text);
        for (const auto& p : r.passages) out.push_back(p.text);
    }
    return out;
}

namespace {

std::string field_string(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(ErrorKind::Data, where + ": missing field '" + key + "'");
    if (!it->is_string()) fail(ErrorKind::Data, where + ": field '" + key + "' must be a string");
    return it->get<std::string>();
}

QaRecord parse_record(const std::string& line, const std::string& where) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Data, where + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) fail(ErrorKind::Data, where + ": expected a JSON object");
    QaRecord rec;
    rec.question_id = field_string(j, "question_id", where);
    rec.question_text = field_string(j, "question_text", where);
    auto it = j.find("passages");
    if (it == j.end()) fail(ErrorKind::Data, where + ": missing field 'passages'");
    if (!it->is_array() || it->empty()) fail(ErrorKind::Data, where + ": 'passages' must be a non-empty array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& pj = (*it)[i];
        const std::string pw = where + ", passage " + std::to_string(i);
        if (!pj.is_object()) fail(ErrorKind::Data, pw + ": expected a JSON object");
        Passage p;
        p.passage_id = field_string(pj, "passage_id", pw);
        p.text = field_string(pj, "text", pw);
        auto rel = pj.find("relevant");
        if (rel == pj.end()) fail(ErrorKind::Data, pw + ": missing field 'relevant'");
        if (!rel->is_boolean()) fail(ErrorKind::Data, pw + ": field 'relevant' must be a boolean");
        p.relevant = rel->get<bool>();
        if (!seen.insert(p.passage_id).second) {
            fail(ErrorKind::Data, where + ": duplicate passage_id '" + p.passage_id + "'");
        }
        rec.passages.push_back(std::move(p));
    }
    return rec;
}

} // namespace

QaDataset parse_dataset(std::istream& in, const std::string& source) {
    std::vector<QaRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        records.push_back(parse_record(line, source + ":" + std::to_string(line_no)));
    }
    if (records.empty()) fail(ErrorKind::Data, source + ": dataset has no records");
    return QaDataset(std::move(records));
}

QaDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open dataset '" + path + "'");
    return parse_dataset(in, path);
}

void write_dataset(std::ostream& out, const QaDataset& dataset) {
    for (const auto& r : dataset.records()) {
        json passages = json::array();
        for (const auto& p : r.passages) {
            passages.push_back({{"passage_id", p.passage_id}, {"text", p.text}, {"relevant", p.relevant}});
        }
        json j = {{"question_id", r.question_id}, {"question_text", r.question_text}, {"passages", passages}};
        out << j.dump() << '\n';
    }
}

void save_dataset(const std::string& path, const QaDataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write dataset '" + path + "'");
    write_dataset(out, dataset);
    if (!out) fail(ErrorKind::Io, "failed writing dataset '" + path + "'");
}

} // namespace pspt
