// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "t_oracle.hpp"

#include "pspt/bm25.hpp"
#include "pspt/error.hpp"
#include "pspt/metrics.hpp"
#include "pspt/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <algorithm>
#include <map>
#include <set>
#include <sstream>

using namespace pspt;

namespace {

QaDataset parse(const std::string& text) {
    std::istringstream in(text);
    return parse_dataset(in, "fixture");
}

const char* kThree =
    R"({"question_id":"q1","question_text":"a","passages":[{"passage_id":"d1","text":"x","relevant":true},{"passage_id":"d2","text":"y","relevant":false},{"passage_id":"d3","text":"z","relevant":true}]})"
    "\n"
    R"({"question_id":"q2","question_text":"b","passages":[{"passage_id":"e1","text":"x","relevant":false},{"passage_id":"e2","text":"y","relevant":true}]})"
    "\n"
    R"({"question_id":"q3","question_text":"c","passages":[{"passage_id":"f1","text":"x","relevant":false}]})"
    "\n";

RetrievalRun make_run(const std::string& tag, std::vector<std::pair<std::string, std::vector<std::string>>> q) {
    RetrievalRun run;
    run.tag = tag;
    for (auto& [qid, ids] : q) {
        QueryRanking r{qid, {}};
        for (std::size_t i = 0; i < ids.size(); ++i) r.entries.push_back({ids[i], i + 1, -double(i)});
        run.queries.push_back(r);
    }
    return run;
}

} // namespace

TEST_CASE("dataset loading") {
    CHECK_THROWS_AS(parse(""), Error);
    CHECK(parse(R"({"question_id":"q","question_text":"t","passages":[{"passage_id":"p","text":"x","relevant":true}]})")
              .size() == 1);
    try {
        parse(std::string(kThree) +
              R"({"question_id":"q9","question_text":"t","passages":[{"passage_id":"p","text":"x","relevant":true},{"passage_id":"p","text":"y","relevant":false}]})");
        FAIL("expected data error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Data);
        CHECK(std::string(e.what()).find("'p'") != std::string::npos);
        CHECK(std::string(e.what()).find(":4") != std::string::npos);
    }
    try {
        parse("\n" R"({"question_id":"q","passages":[]})");
        FAIL("expected data error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("fixture:2") != std::string::npos);
        CHECK(std::string(e.what()).find("question_text") != std::string::npos);
    }
    auto ds = parse(kThree);
    std::ostringstream out;
    write_dataset(out, ds);
    auto again = parse(out.str());
    REQUIRE(again.size() == 3);
    CHECK(again.find("q1")->passages[2].passage_id == "d3");
    CHECK(again.find("q1")->relevant_count() == 2);
}

TEST_CASE("bm25 scores against hand computation") {
    std::vector<std::pair<std::string, std::string>> docs{
        {"p1", "the cat sat on the mat"},
        {"p2", "the dog sat"},
        {"p3", "cats and dogs"},
        {"p4", "a cat a cat a cat"},
        {"p5", "nothing here at all today"},
    };
    Bm25Index index(docs);
    // N=5, avgdl = (6+3+3+6+5)/5 = 4.6; k1=0.9, b=0.4
    auto idf = [](double n) { return std::log(1 + (5 - n + 0.5) / (n + 0.5)); };
    auto term = [&](double tf, double dl, double n) {
        return idf(n) * tf * 1.9 / (tf + 0.9 * (0.6 + 0.4 * dl / 4.6));
    };
    // query "cat sat cat": unique terms cat (df 2), sat (df 2)
    const double p1 = term(1, 6, 2) + term(1, 6, 2);
    const double p2 = term(1, 3, 2);
    const double p4 = term(3, 6, 2);
    auto res = index.search("Cat sat cat", 5);
    REQUIRE(res.size() == 5);
    std::map<std::string, double> got;
    for (auto& e : res) got[e.passage_id] = e.score;
    CHECK(std::abs(got["p1"] - p1) < 1e-6);
    CHECK(std::abs(got["p2"] - p2) < 1e-6);
    CHECK(std::abs(got["p4"] - p4) < 1e-6);
    CHECK(got["p3"] == 0.0);
    CHECK(res[0].passage_id == "p1");
    CHECK(res[3].passage_id == "p3"); // zero scores in id order
    CHECK(res[4].passage_id == "p5");

    auto none = index.search("zebra", 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(none[i].passage_id == "p" + std::to_string(i + 1));
    using Docs = std::vector<std::pair<std::string, std::string>>;
    Bm25Index single(Docs{{"only", "text"}});
    CHECK(single.search("other", 3).front().passage_id == "only");
    Bm25Index empty(Docs{});
    CHECK_THROWS_AS(empty.search("x", 1), Error);
}

TEST_CASE("bm25 run over dataset pools") {
    auto ds = parse(kThree);
    auto run = bm25_run(ds, 2);
    REQUIRE(run.queries.size() == 3);
    CHECK(run.queries[0].entries.size() == 2);
    CHECK(run.queries[2].entries.size() == 1);
    auto global = bm25_run(ds, 10, true);
    CHECK(global.queries[0].entries.size() == 6);
}

TEST_CASE("recall and hit definitions") {
    std::vector<std::string> top{"d2", "d1", "d5"};
    CHECK(recall_at_k(top, {"d1", "d3"}, 3) == 0.5);
    CHECK(recall_at_k(top, {"d1", "d2"}, 3) == 1.0);
    CHECK(hit_at_k(top, {"d1", "d3"}, 3) == 1);
    CHECK(hit_at_k(top, {"d9"}, 3) == 0);
    CHECK(recall_at_k(top, {"d1", "d2", "d5", "d7"}, 2, true) == 1.0);
    CHECK_THROWS_AS(recall_at_k(top, {}, 3), Error);
}

TEST_CASE("metrics agree with brute-force enumeration") {
    Rng rng(17);
    for (int c = 0; c < 1000; ++c) {
        const std::size_t pool = 1 + rng.below(15);
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < pool; ++i) ids.push_back("p" + std::to_string(i));
        rng.shuffle(ids);
        std::set<std::string> rel;
        for (std::size_t i = 0; i < pool; ++i) {
            if (rng.uniform() < 0.3) rel.insert("p" + std::to_string(i));
        }
        if (rel.empty()) rel.insert("p0");
        const std::size_t n_rank = rng.below(pool + 1);
        std::vector<std::string> ranking(ids.begin(), ids.begin() + n_rank);
        double prev_r = 0, prev_h = 0;
        for (std::size_t k = 1; k <= pool + 2; ++k) {
            std::size_t inter = 0;
            for (const auto& r : rel) {
                for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) inter += ranking[i] == r;
            }
            const double r = recall_at_k(ranking, rel, k);
            const int h = hit_at_k(ranking, rel, k);
            REQUIRE(r == static_cast<double>(inter) / rel.size());
            REQUIRE(h == (inter > 0 ? 1 : 0));
            REQUIRE(r >= prev_r);
            REQUIRE(h >= prev_h);
            REQUIRE(r <= 1.0);
            prev_r = r;
            prev_h = h;
        }
    }
}

TEST_CASE("paired t-test") {
    std::vector<double> a{1, 2, 3, 4}, b{1, 2, 3, 4};
    CHECK(paired_t_test(a, b) == 1.0);
    std::vector<double> c{2, 3, 4, 5};
    CHECK(paired_t_test(c, a) == 0.0);
    std::vector<double> shorter{1, 2, 3};
    try {
        paired_t_test(a, shorter);
        FAIL("expected input error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Input);
    }
    Rng rng(3);
    std::vector<double> x(20), y(20);
    for (int f = 0; f < 20; ++f) {
        for (std::size_t i = 0; i < 20; ++i) {
            x[i] = rng.normal();
            y[i] = x[i] + 0.3 * rng.normal() + 0.1 * f / 20.0;
        }
        CHECK(std::abs(paired_t_test(x, y) - oracle::paired_p(x, y)) < 1e-4);
    }
}

TEST_CASE("evaluate on a three-query fixture") {
    auto ds = parse(kThree);
    auto good = make_run("good", {{"q1", {"d1", "d3", "d2"}}, {"q2", {"e2", "e1"}}, {"q3", {"f1"}}});
    auto bad = make_run("bad", {{"q1", {"d2", "d1", "d3"}}, {"q2", {"e1", "e2"}}});
    EvalOptions opts;
    opts.ks = {1, 2};
    auto rep = evaluate({bad, good}, ds, opts);
    CHECK(rep.query_ids == std::vector<std::string>{"q1", "q2"});
    CHECK(rep.excluded_ids == std::vector<std::string>{"q3"});
    CHECK(rep.baseline_tag == "bad");
    const auto& b = rep.runs[0];
    const auto& g = rep.runs[1];
    CHECK(g.recall.at(1) == doctest::Approx((0.5 + 1.0) / 2));
    CHECK(g.hit.at(1) == 1.0);
    CHECK(b.recall.at(1) == 0.0);
    CHECK(b.recall.at(2) == doctest::Approx((0.5 + 1.0) / 2));
    CHECK(b.hit.at(2) == 1.0);
    CHECK(rep.p_values.count("good") == 1);

    auto twin = good;
    twin.tag = "twin";
    auto same = evaluate({good, twin}, ds, opts);
    CHECK(same.p_values.at("twin").recall.at(1) == 1.0);
    CHECK(same.p_values.at("twin").hit.at(2) == 1.0);

    auto reversed = good;
    std::reverse(reversed.queries.begin(), reversed.queries.end());
    auto rr = evaluate({reversed}, ds, opts);
    CHECK(rr.runs[0].recall.at(1) == g.recall.at(1));
    CHECK(rr.p_values.empty());

    auto unknown = make_run("u", {{"q1", {"zz"}}});
    try {
        evaluate({unknown}, ds, opts);
        FAIL("expected input error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Input);
        CHECK(std::string(e.what()).find("zz") != std::string::npos);
    }
    CHECK_THROWS_AS(evaluate({make_run("u", {{"q7", {"d1"}}})}, ds, opts), Error);

    auto json = nlohmann::json::parse(report_json(rep));
    CHECK(json["runs"][1]["R@1"].get<double>() == doctest::Approx(0.75));
    CHECK(json["queries_excluded"].get<int>() == 1);
    const std::string table = report_table(rep);
    CHECK(table.find("good") != std::string::npos);
    CHECK(table.find("75.00") != std::string::npos);
}

TEST_CASE("run files") {
    auto run = make_run("bm25", {{"q1", {"d1", "d3"}}, {"q2", {"e2"}}});
    run.queries[0].entries[1].score = 0.1 + 0.2;
    std::ostringstream out;
    write_run(out, run);
    CHECK(out.str() == "q1 Q0 d1 1 -0 bm25\nq1 Q0 d3 2 0.30000000000000004 bm25\nq2 Q0 e2 1 -0 bm25\n");
    std::istringstream in(out.str());
    auto back = parse_runs(in);
    REQUIRE(back.size() == 1);
    CHECK(back[0].queries[0].entries[1].score == 0.1 + 0.2);

    std::istringstream js(R"({"query_id":"q1","passage_id":"d2","rank":2,"score":1.5,"tag":"x"})"
                          "\n"
                          R"({"query_id":"q1","passage_id":"d1","rank":1,"score":2,"tag":"x"})");
    auto jr = parse_runs(js);
    CHECK(jr[0].queries[0].entries[0].passage_id == "d1");

    std::istringstream gap("q1 Q0 d1 1 0 t\nq1 Q0 d2 3 0 t\n");
    CHECK_THROWS_AS(parse_runs(gap), Error);
    std::istringstream dup("q1 Q0 d1 1 0 t\nq1 Q0 d1 2 0 t\n");
    CHECK_THROWS_AS(parse_runs(dup), Error);
    std::istringstream cols("q1 Q0 d1 1 0\n");
    try {
        parse_runs(cols, "r.txt");
        FAIL("expected input error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("r.txt:1") != std::string::npos);
    }
    std::istringstream two("q1 Q0 d1 1 0 a\nq1 Q0 d1 1 0 b\n");
    CHECK(parse_runs(two).size() == 2);
}
