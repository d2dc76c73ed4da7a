// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/run_file.hpp"

#include "pspt/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pspt {

const QueryRanking* RetrievalRun::find(const std::string& query_id) const {
    for (const auto& q : queries) {
        if (q.query_id == query_id) return &q;
    }
    return nullptr;
}

void RetrievalRun::validate() const {
    std::set<std::string> qids;
    for (const auto& q : queries) {
        if (!qids.insert(q.query_id).second) {
            fail(ErrorKind::Input, "run '" + tag + "': query '" + q.query_id + "' appears twice");
        }
        std::set<std::string> ids;
        for (std::size_t i = 0; i < q.entries.size(); ++i) {
            if (q.entries[i].rank != i + 1) {
                fail(ErrorKind::Input, "run '" + tag + "', query '" + q.query_id + "': ranks are not contiguous from 1");
            }
            if (!ids.insert(q.entries[i].passage_id).second) {
                fail(ErrorKind::Input, "run '" + tag + "', query '" + q.query_id + "': duplicate passage id '" +
                                           q.entries[i].passage_id + "'");
            }
        }
    }
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

struct Row {
    std::string qid, pid, tag;
    std::size_t rank;
    double score;
};

Row parse_trec(const std::string& line, const std::string& where) {
    std::istringstream ss(line);
    std::vector<std::string> cols;
    std::string c;
    while (ss >> c) cols.push_back(c);
    if (cols.size() != 6) {
        fail(ErrorKind::Input, where + ": expected 6 columns (query_id Q0 passage_id rank score tag), got " +
                                   std::to_string(cols.size()));
    }
    Row r;
    r.qid = cols[0];
    r.pid = cols[2];
    r.tag = cols[5];
    const auto& rk = cols[3];
    long long rank = 0;
    auto [p1, e1] = std::from_chars(rk.data(), rk.data() + rk.size(), rank);
    if (e1 != std::errc() || p1 != rk.data() + rk.size() || rank < 1) {
        fail(ErrorKind::Input, where + ": rank '" + rk + "' is not a positive integer");
    }
    r.rank = static_cast<std::size_t>(rank);
    const auto& sc = cols[4];
    auto [p2, e2] = std::from_chars(sc.data(), sc.data() + sc.size(), r.score);
    if (e2 != std::errc() || p2 != sc.data() + sc.size()) {
        fail(ErrorKind::Input, where + ": score '" + sc + "' is not a number");
    }
    return r;
}

Row parse_json_row(const std::string& line, const std::string& where) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Input, where + ": invalid JSON (" + e.what() + ")");
    }
    auto str = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string()) fail(ErrorKind::Input, where + ": missing string '" + key + "'");
        return j[key].get<std::string>();
    };
    Row r;
    r.qid = str("query_id");
    r.pid = str("passage_id");
    r.tag = j.contains("tag") ? str("tag") : std::string("run");
    if (!j.contains("rank") || !j["rank"].is_number_integer() || j["rank"].get<long long>() < 1) {
        fail(ErrorKind::Input, where + ": 'rank' must be a positive integer");
    }
    r.rank = j["rank"].get<std::size_t>();
    if (!j.contains("score") || !j["score"].is_number()) fail(ErrorKind::Input, where + ": 'score' must be a number");
    r.score = j["score"].get<double>();
    return r;
}

} // namespace

std::vector<RetrievalRun> parse_runs(std::istream& in, const std::string& source) {
    std::vector<std::string> tag_order;
    std::map<std::string, std::vector<std::string>> query_order;
    std::map<std::string, std::map<std::string, std::vector<RunEntry>>> grouped;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const std::string where = source + ":" + std::to_string(line_no);
        Row r = line[first] == '{' ? parse_json_row(line, where) : parse_trec(line, where);
        if (!grouped.count(r.tag)) tag_order.push_back(r.tag);
        auto& per_query = grouped[r.tag];
        if (!per_query.count(r.qid)) query_order[r.tag].push_back(r.qid);
        per_query[r.qid].push_back({r.pid, r.rank, r.score});
    }
    if (tag_order.empty()) fail(ErrorKind::Input, source + ": run file has no entries");
    std::vector<RetrievalRun> runs;
    for (const auto& tag : tag_order) {
        RetrievalRun run;
        run.tag = tag;
        for (const auto& qid : query_order[tag]) {
            auto entries = grouped[tag][qid];
            std::stable_sort(entries.begin(), entries.end(),
                             [](const RunEntry& a, const RunEntry& b) { return a.rank < b.rank; });
            run.queries.push_back({qid, std::move(entries)});
        }
        run.validate();
        runs.push_back(std::move(run));
    }
    return runs;
}

std::vector<RetrievalRun> load_runs(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open run file '" + path + "'");
    return parse_runs(in, path);
}

RetrievalRun load_run(const std::string& path) {
    auto runs = load_runs(path);
    if (runs.size() != 1) {
        fail(ErrorKind::Input, "run file '" + path + "' holds " + std::to_string(runs.size()) + " tags, expected 1");
    }
    return std::move(runs.front());
}

void write_run(std::ostream& out, const RetrievalRun& run) {
    for (const auto& q : run.queries) {
        for (const auto& e : q.entries) {
            out << q.query_id << " Q0 " << e.passage_id << ' ' << e.rank << ' ' << format_double(e.score) << ' '
                << run.tag << '\n';
        }
    }
}

void save_run(const std::string& path, const RetrievalRun& run) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write run file '" + path + "'");
    write_run(out, run);
    if (!out) fail(ErrorKind::Io, "failed writing run file '" + path + "'");
}

} // namespace pspt
