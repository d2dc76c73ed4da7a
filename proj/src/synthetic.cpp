// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/synthetic.hpp"

#include "pspt/adapter.hpp"
#include "pspt/error.hpp"
#include "pspt/rng.hpp"
#include "pspt/vocab.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace pspt {

namespace {

using Words = std::vector<std::string>;

const Words kFunctionWords{"what", "is", "the", "of", "a", "in", "and", "to", "was", "by"};
const char* const kSyllables[] = {"ba", "ko", "mi", "tu", "re", "sa", "lo", "ne",
                                  "vi", "da", "pu", "ge", "fo", "ri", "zu", "ha"};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
    return v[rng.below(v.size())];
}

// k distinct elements in draw order.
template <typename T>
std::vector<T> sample(Rng& rng, std::vector<T> v, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) std::swap(v[i], v[i + rng.below(v.size() - i)]);
    v.resize(k);
    return v;
}

std::string join(const Words& w) {
    std::string out;
    for (const auto& s : w) {
        if (!out.empty()) out += ' ';
        out += s;
    }
    return out;
}

struct Topic {
    std::size_t k_class;
    std::size_t d_class;
    Words passage;
};

class World {
public:
    World(const SyntheticConfig& c, Rng& rng) : c_(c), rng_(rng) {
        std::set<std::string> seen;
        Words words;
        const std::size_t need = c.k_classes * c.k_class_size + c.d_classes * c.d_class_size + c.neutral_words;
        while (words.size() < need) {
            std::string w;
            for (int i = 0; i < 3; ++i) w += kSyllables[rng.below(16)];
            if (seen.insert(w).second) words.push_back(w);
        }
        std::size_t at = 0;
        auto take = [&](std::size_t n) {
            Words out(words.begin() + at, words.begin() + at + n);
            at += n;
            return out;
        };
        for (std::size_t i = 0; i < c.k_classes; ++i) k_.push_back(take(c.k_class_size));
        for (std::size_t i = 0; i < c.d_classes; ++i) d_.push_back(take(c.d_class_size));
        neutral_ = take(c.neutral_words);
        for (const auto& k : k_) all_k_.insert(all_k_.end(), k.begin(), k.end());
        for (const auto& d : d_) all_d_.insert(all_d_.end(), d.begin(), d.end());
    }

    Words passage(std::size_t ck, std::size_t cd) {
        Words p = sample(rng_, k_[ck], 4);
        for (auto& w : sample(rng_, d_[cd], 5)) p.push_back(w);
        for (int i = 0; i < 4; ++i) p.push_back(pick(rng_, kFunctionWords));
        rng_.shuffle(p);
        return p;
    }

    static Words question(const Words& ks, const Words& ds) {
        Words q{"what"};
        q.insert(q.end(), ks.begin(), ks.end());
        q.push_back("of");
        q.insert(q.end(), ds.begin(), ds.end());
        return q;
    }

    Words style_x(std::size_t ck) {
        Words ds;
        for (int i = 0; i < 4; ++i) ds.push_back(pick(rng_, all_d_));
        return question({pick(rng_, k_[ck]), pick(rng_, k_[ck])}, ds);
    }

    Words style_y(std::size_t cd) {
        Words ks{pick(rng_, all_k_), pick(rng_, all_k_)};
        Words ds;
        for (int i = 0; i < 4; ++i) ds.push_back(pick(rng_, d_[cd]));
        return question(ks, ds);
    }

    std::string corpus_line() {
        const std::size_t ck = rng_.below(c_.k_classes);
        const std::size_t cd = rng_.below(c_.d_classes);
        const Words p = passage(ck, cd);
        const double mode = rng_.uniform();
        Words prefix_pool = neutral_;
        for (const auto& w : split_words(kDefaultHardPrompt)) prefix_pool.push_back(w);
        Words pre;
        const std::size_t n_pre = 1 + rng_.below(5);
        for (std::size_t i = 0; i < n_pre; ++i) pre.push_back(pick(rng_, prefix_pool));
        Words q;
        if (mode < 0.4) {
            pre.insert(pre.begin() + rng_.below(pre.size() + 1), "alpha");
            q = style_x(ck);
        } else if (mode < 0.8) {
            pre.insert(pre.begin() + rng_.below(pre.size() + 1), "beta");
            q = style_y(cd);
        } else {
            q = rng_.uniform() < 0.5 ? style_x(ck) : style_y(cd);
        }
        return join(pre) + " " + join(p) + " " + kSeparatorText + " " + join(q);
    }

    std::vector<Topic> topics;

    // Question for topic i: one K word from the passage, one K word of the
    // same class absent from it, descriptors from a foreign class shared with
    // the confusers in the pool.
    QaRecord record(std::size_t i) {
        const Topic& t = topics[i];
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < topics.size(); ++j) {
            if (j != i && topics[j].k_class != t.k_class) others.push_back(j);
        }
        std::vector<std::size_t> classes;
        for (std::size_t c = 0; c < c_.d_classes; ++c) {
            if (c != t.d_class) classes.push_back(c);
        }
        const std::size_t foreign = pick(rng_, classes);
        std::vector<std::size_t> cand, rest;
        for (std::size_t j : others) (topics[j].d_class == foreign ? cand : rest).push_back(j);
        const std::size_t n_conf = c_.min_confusers + rng_.below(c_.max_confusers - c_.min_confusers + 1);
        if (cand.size() < n_conf || rest.size() + n_conf < c_.pool_size - 1) {
            fail(ErrorKind::Configuration, "too few topics to fill a pool of " + std::to_string(c_.pool_size));
        }
        const auto conf = sample(rng_, cand, n_conf);
        Words in_passage, absent;
        for (const auto& w : t.passage) {
            if (std::find(k_[t.k_class].begin(), k_[t.k_class].end(), w) != k_[t.k_class].end()) {
                in_passage.push_back(w);
            }
        }
        for (const auto& w : k_[t.k_class]) {
            if (std::find(t.passage.begin(), t.passage.end(), w) == t.passage.end()) absent.push_back(w);
        }
        Words ks{pick(rng_, in_passage), pick(rng_, absent)};
        rng_.shuffle(ks);
        const Words q = question(ks, sample(rng_, d_[foreign], 4));

        QaRecord r;
        r.question_id = id("q", i);
        r.question_text = join(q);
        r.passages.push_back({id("p", i), join(t.passage), true});
        std::vector<std::size_t> pool = conf;
        for (auto j : sample(rng_, rest, c_.pool_size - 1 - n_conf)) pool.push_back(j);
        for (auto j : pool) r.passages.push_back({id("p", j), join(topics[j].passage), false});
        return r;
    }

    static std::string id(const char* prefix, std::size_t i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
        return buf;
    }

private:
    const SyntheticConfig& c_;
    Rng& rng_;
    std::vector<Words> k_, d_;
    Words all_k_, all_d_, neutral_;
};

} // namespace

void SyntheticConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) fail(ErrorKind::Configuration, "synthetic: " + what);
    };
    require(k_classes >= 2 && d_classes >= 2, "need at least two K classes and two D classes");
    require(k_class_size >= 5, "k_class_size must be at least 5");
    require(d_class_size >= 5, "d_class_size must be at least 5");
    require(k_classes * k_class_size + d_classes * d_class_size + neutral_words <= 3000,
            "too many words for the syllable inventory");
    require(train_questions + test_questions <= topics, "more questions than topics");
    require(test_questions >= 1 && train_questions >= 1, "need train and test questions");
    require(pool_size >= 2, "pool_size must be at least 2");
    require(min_confusers <= max_confusers && max_confusers < pool_size, "confuser range does not fit the pool");
}

SyntheticWorld generate_world(const SyntheticConfig& config) {
    config.validate();
    Rng rng(config.seed);
    World world(config, rng);
    for (std::size_t i = 0; i < config.topics; ++i) {
        const std::size_t ck = rng.below(config.k_classes);
        const std::size_t cd = rng.below(config.d_classes);
        world.topics.push_back({ck, cd, world.passage(ck, cd)});
    }
    std::vector<QaRecord> train, test;
    for (std::size_t i = 0; i < config.train_questions; ++i) train.push_back(world.record(i));
    for (std::size_t i = 0; i < config.test_questions; ++i) {
        test.push_back(world.record(config.train_questions + i));
    }
    SyntheticWorld out;
    out.train = QaDataset(std::move(train));
    out.test = QaDataset(std::move(test));
    for (std::size_t i = 0; i < config.corpus_sequences; ++i) out.corpus.push_back(world.corpus_line());
    return out;
}

} // namespace pspt
