// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#include "pspt/vocab.hpp"

#include "pspt/error.hpp"

#include <algorithm>
#include <map>

namespace pspt {

namespace {

const char* const kSpecials[kNumSpecialTokens] = {"<pad>", "<unk>", "<bos>", "<eos>"};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_punct(unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

} // namespace

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
    };
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_space(c)) {
            flush();
        } else if (is_punct(c)) {
            flush();
            out.emplace_back(1, ch);
        } else if (c >= 'A' && c <= 'Z') {
            current.push_back(static_cast<char>(c - 'A' + 'a'));
        } else {
            current.push_back(ch);
        }
    }
    flush();
    return out;
}

Vocabulary::Vocabulary() {
    for (const char* s : kSpecials) add(s);
}

void Vocabulary::add(std::string token) {
    if (index_.count(token)) return;
    index_.emplace(token, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, std::size_t cap,
                             const std::vector<std::string>& required) {
    Vocabulary vocab;
    for (const auto& tok : required) vocab.add(tok);
    if (vocab.size() > cap) {
        fail(ErrorKind::Configuration, "vocabulary cap " + std::to_string(cap) + " is smaller than the " +
                                           std::to_string(vocab.size()) + " reserved and required tokens");
    }
    std::map<std::string, std::size_t> counts;
    for (const auto& text : texts) {
        for (auto& w : split_words(text)) ++counts[w];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (auto& [word, count] : ranked) {
        if (vocab.size() >= cap) break;
        vocab.add(word);
    }
    return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < kNumSpecialTokens) {
        fail(ErrorKind::CheckpointFormat, "vocabulary has fewer than the 4 reserved tokens");
    }
    for (std::size_t i = 0; i < kNumSpecialTokens; ++i) {
        if (tokens[i] != kSpecials[i]) {
            fail(ErrorKind::CheckpointFormat, "vocabulary entry " + std::to_string(i) + " must be " + kSpecials[i]);
        }
    }
    Vocabulary vocab;
    for (std::size_t i = kNumSpecialTokens; i < tokens.size(); ++i) {
        if (vocab.index_.count(tokens[i])) {
            fail(ErrorKind::CheckpointFormat, "vocabulary token '" + tokens[i] + "' appears twice");
        }
        vocab.add(std::move(tokens[i]));
    }
    return vocab;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        fail(ErrorKind::Vocabulary, "token id " + std::to_string(id) + " outside vocabulary of size " +
                                        std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

TokenId Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
}

TokenIds Vocabulary::tokenize(std::string_view text) const {
    TokenIds ids;
    for (const auto& w : split_words(text)) ids.push_back(id(w));
    return ids;
}

std::string Vocabulary::detokenize(const TokenIds& ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(' ');
        out += token(ids[i]);
    }
    return out;
}

} // namespace pspt
