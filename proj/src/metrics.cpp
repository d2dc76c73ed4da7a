// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/metrics.hpp"

#include "pspt/error.hpp"
#include "pspt/log.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace pspt {

double recall_at_k(const std::vector<std::string>& ranking, const std::set<std::string>& relevant, std::size_t k,
                   bool capped) {
    if (relevant.empty()) fail(ErrorKind::Contract, "recall is undefined without relevant passages");
    std::size_t found = 0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) found += relevant.count(ranking[i]);
    const std::size_t denom = capped ? std::min(relevant.size(), k) : relevant.size();
    return denom == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(denom);
}

int hit_at_k(const std::vector<std::string>& ranking, const std::set<std::string>& relevant, std::size_t k) {
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        if (relevant.count(ranking[i])) return 1;
    }
    return 0;
}

double paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::Input, "paired t-test needs equal lengths, got " + std::to_string(a.size()) + " and " +
                                   std::to_string(b.size()));
    }
    const std::size_t n = a.size();
    if (n < 2) fail(ErrorKind::Contract, "paired t-test needs at least two pairs");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) return mean == 0.0 ? 1.0 : 0.0;
    const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
    boost::math::students_t dist(static_cast<double>(n - 1));
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

MetricReport evaluate(const std::vector<RetrievalRun>& runs, const QaDataset& dataset, const EvalOptions& options) {
    if (runs.empty()) fail(ErrorKind::Input, "no runs to evaluate");
    if (options.ks.empty()) fail(ErrorKind::Configuration, "no cutoffs k to evaluate");
    for (std::size_t k : options.ks) {
        if (k == 0) fail(ErrorKind::Configuration, "cutoff k must be at least 1");
    }
    std::unordered_map<std::string, bool> global_passages;
    for (const auto& r : dataset.records()) {
        for (const auto& p : r.passages) global_passages.emplace(p.passage_id, true);
    }
    std::set<std::string> tags;
    std::set<std::string> qids;
    for (const auto& run : runs) {
        if (!tags.insert(run.tag).second) fail(ErrorKind::Input, "run tag '" + run.tag + "' given twice");
        run.validate();
        for (const auto& q : run.queries) {
            if (!dataset.find(q.query_id)) {
                fail(ErrorKind::Input, "run '" + run.tag + "' references unknown query id '" + q.query_id + "'");
            }
            for (const auto& e : q.entries) {
                if (!global_passages.count(e.passage_id)) {
                    fail(ErrorKind::Input, "run '" + run.tag + "' references unknown passage id '" + e.passage_id +
                                               "' for query '" + q.query_id + "'");
                }
            }
            qids.insert(q.query_id);
        }
    }

    MetricReport rep;
    rep.ks = options.ks;
    std::sort(rep.ks.begin(), rep.ks.end());
    rep.ks.erase(std::unique(rep.ks.begin(), rep.ks.end()), rep.ks.end());
    std::vector<std::set<std::string>> relevant;
    for (const auto& qid : qids) {
        std::set<std::string> rel;
        for (const auto& p : dataset.find(qid)->passages) {
            if (p.relevant) rel.insert(p.passage_id);
        }
        if (rel.empty()) {
            rep.excluded_ids.push_back(qid);
            continue;
        }
        rep.query_ids.push_back(qid);
        relevant.push_back(std::move(rel));
    }
    if (!rep.excluded_ids.empty()) {
        log_info(std::to_string(rep.excluded_ids.size()) + " queries without relevant passages excluded from metrics");
    }

    for (const auto& run : runs) {
        RunMetrics m;
        m.tag = run.tag;
        for (std::size_t qi = 0; qi < rep.query_ids.size(); ++qi) {
            std::vector<std::string> ranking;
            if (const auto* q = run.find(rep.query_ids[qi])) {
                for (const auto& e : q->entries) ranking.push_back(e.passage_id);
            }
            for (std::size_t k : rep.ks) {
                m.recall_per_query[k].push_back(recall_at_k(ranking, relevant[qi], k, options.capped_recall));
                m.hit_per_query[k].push_back(hit_at_k(ranking, relevant[qi], k));
            }
        }
        for (std::size_t k : rep.ks) {
            auto mean = [&](const std::vector<double>& v) {
                double s = 0.0;
                for (double x : v) s += x;
                return v.empty() ? 0.0 : s / static_cast<double>(v.size());
            };
            m.recall[k] = mean(m.recall_per_query[k]);
            m.hit[k] = mean(m.hit_per_query[k]);
        }
        rep.runs.push_back(std::move(m));
    }

    rep.baseline_tag = options.baseline_tag.empty() ? runs.front().tag : options.baseline_tag;
    if (!tags.count(rep.baseline_tag)) fail(ErrorKind::Input, "baseline tag '" + rep.baseline_tag + "' not among runs");
    if (rep.runs.size() > 1 && rep.query_ids.size() >= 2) {
        const RunMetrics* base = nullptr;
        for (const auto& m : rep.runs) {
            if (m.tag == rep.baseline_tag) base = &m;
        }
        for (const auto& m : rep.runs) {
            if (m.tag == rep.baseline_tag) continue;
            PValues pv;
            for (std::size_t k : rep.ks) {
                pv.recall[k] = paired_t_test(m.recall_per_query.at(k), base->recall_per_query.at(k));
                pv.hit[k] = paired_t_test(m.hit_per_query.at(k), base->hit_per_query.at(k));
            }
            rep.p_values[m.tag] = std::move(pv);
        }
    }
    return rep;
}

std::string report_json(const MetricReport& rep) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["queries_evaluated"] = rep.query_ids.size();
    j["queries_excluded"] = rep.excluded_ids.size();
    j["excluded_query_ids"] = rep.excluded_ids;
    j["ks"] = rep.ks;
    j["baseline"] = rep.baseline_tag;
    ordered_json runs = ordered_json::array();
    for (const auto& m : rep.runs) {
        ordered_json r;
        r["tag"] = m.tag;
        for (std::size_t k : rep.ks) {
            r["R@" + std::to_string(k)] = m.recall.at(k);
            r["H@" + std::to_string(k)] = m.hit.at(k);
        }
        auto it = rep.p_values.find(m.tag);
        if (it != rep.p_values.end()) {
            ordered_json p;
            for (std::size_t k : rep.ks) {
                p["R@" + std::to_string(k)] = it->second.recall.at(k);
                p["H@" + std::to_string(k)] = it->second.hit.at(k);
            }
            r["p_values"] = p;
        }
        runs.push_back(r);
    }
    j["runs"] = runs;
    return j.dump(2);
}

std::string report_table(const MetricReport& rep) {
    std::size_t width = 8;
    for (const auto& m : rep.runs) width = std::max(width, m.tag.size() + 2);
    std::ostringstream os;
    char cell[32];
    os << std::string(width, ' ');
    for (std::size_t k : rep.ks) {
        std::snprintf(cell, sizeof cell, "%9s%9s", ("R@" + std::to_string(k)).c_str(), ("H@" + std::to_string(k)).c_str());
        os << cell;
    }
    os << '\n';
    for (const auto& m : rep.runs) {
        os << m.tag << std::string(width - m.tag.size(), ' ');
        auto it = rep.p_values.find(m.tag);
        for (std::size_t k : rep.ks) {
            const bool sr = it != rep.p_values.end() && it->second.recall.at(k) < 0.05;
            const bool sh = it != rep.p_values.end() && it->second.hit.at(k) < 0.05;
            std::snprintf(cell, sizeof cell, "%8.2f%c%8.2f%c", 100.0 * m.recall.at(k), sr ? '*' : ' ',
                          100.0 * m.hit.at(k), sh ? '*' : ' ');
            os << cell;
        }
        os << '\n';
    }
    os << "queries: " << rep.query_ids.size() << " evaluated, " << rep.excluded_ids.size()
       << " excluded (no relevant passage)";
    if (!rep.p_values.empty()) os << "; * p < 0.05 vs " << rep.baseline_tag;
    os << '\n';
    return os.str();
}

} // namespace pspt
