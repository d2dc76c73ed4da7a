// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded toy retrieval world for end-to-end runs.
//
// Words fall into K classes (topic words) and D classes (descriptor words).
// A passage mixes words of one K class and one D class. Questions read
// "what K K of D D D D". The pretraining corpus pairs passages with two
// question styles: style X draws K from the passage's K class, style Y draws
// D from the passage's D class. A cue word in the prefix ("alpha" or "beta")
// tells the model which style follows; a fifth of the sequences carry no cue.
//
// Evaluation questions are style X with descriptors from a foreign D class,
// and each pool holds confusers that share that class. A hard prompt gives
// the model no cue, so the untrained scorer is pulled toward the confusers;
// a tuned prompt can learn to act as the "alpha" cue.

#pragma once

#include "pspt/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pspt {

struct SyntheticConfig {
    std::size_t k_classes = 12;
    std::size_t k_class_size = 8;
    std::size_t d_classes = 6;
    std::size_t d_class_size = 8;
    std::size_t neutral_words = 20;
    std::size_t topics = 600;
    std::size_t train_questions = 400;
    std::size_t test_questions = 100;
    std::size_t pool_size = 20;
    std::size_t min_confusers = 2;
    std::size_t max_confusers = 8;
    std::size_t corpus_sequences = 20000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticWorld {
    QaDataset train;
    QaDataset test;
    std::vector<std::string> corpus; // one pretraining sequence per entry
};

SyntheticWorld generate_world(const SyntheticConfig& config);

} // namespace pspt
