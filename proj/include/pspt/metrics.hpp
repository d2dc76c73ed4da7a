// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Ranking metrics, the paired t-test and the multi-run evaluation report.

#pragma once

#include "pspt/dataset.hpp"
#include "pspt/run_file.hpp"

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace pspt {

/// |relevant ∩ top-k| / |relevant|, or / min(|relevant|, k) when `capped`.
/// An empty relevant set is a Contract error (the value is undefined).
double recall_at_k(const std::vector<std::string>& ranking, const std::set<std::string>& relevant, std::size_t k,
                   bool capped = false);

/// 1 when any relevant passage is in the top k.
int hit_at_k(const std::vector<std::string>& ranking, const std::set<std::string>& relevant, std::size_t k);

/// Two-sided paired t-test on a - b with n - 1 degrees of freedom.
/// Zero variance gives 1 when the mean difference is 0 and 0 otherwise.
/// Unequal lengths are an Input error; fewer than two pairs a Contract error.
double paired_t_test(std::span<const double> a, std::span<const double> b);

struct EvalOptions {
    std::vector<std::size_t> ks{1, 5, 10, 20};
    bool capped_recall = false;
    std::string baseline_tag; // empty: the first run
};

struct RunMetrics {
    std::string tag;
    std::map<std::size_t, double> recall; // macro means
    std::map<std::size_t, double> hit;
    std::map<std::size_t, std::vector<double>> recall_per_query; // aligned with MetricReport::query_ids
    std::map<std::size_t, std::vector<double>> hit_per_query;
};

struct PValues {
    std::map<std::size_t, double> recall;
    std::map<std::size_t, double> hit;
};

struct MetricReport {
    std::vector<std::size_t> ks;
    std::vector<std::string> query_ids;     // evaluated, sorted
    std::vector<std::string> excluded_ids;  // no judged-relevant passage
    std::vector<RunMetrics> runs;
    std::string baseline_tag;
    std::map<std::string, PValues> p_values; // per non-baseline tag
};

/// Evaluates every query appearing in any run. A query a run does not list
/// counts as an empty ranking for that run. Unknown query or passage ids are
/// Input errors. p-values against the baseline need at least two queries.
MetricReport evaluate(const std::vector<RetrievalRun>& runs, const QaDataset& dataset, const EvalOptions& options = {});

std::string report_json(const MetricReport& report);
/// Plain-text table: one row per run, R@k and H@k columns in percent, with
/// a * marking p < 0.05 against the baseline.
std::string report_table(const MetricReport& report);

} // namespace pspt
