// Copyright (c) 2026, The PSPT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pspt {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kBosId = 2;
inline constexpr TokenId kEosId = 3;
inline constexpr std::size_t kNumSpecialTokens = 4;

/// Lowercases ASCII letters and splits on whitespace; every ASCII punctuation
/// character becomes a token of its own. Bytes >= 0x80 are kept inside words.
std::vector<std::string> split_words(std::string_view text);

/// Token strings <-> contiguous ids. Ids 0..3 are PAD, UNK, BOS, EOS.
class Vocabulary {
public:
    Vocabulary();

    /// Builds from raw texts: specials, then `required` tokens in order, then
    /// the remaining words by descending frequency (ties lexicographic),
    /// stopping at `cap` entries in total.
    static Vocabulary build(const std::vector<std::string>& texts, std::size_t cap,
                            const std::vector<std::string>& required = {});

    /// Rebuilds from a stored token list; entries 0..3 must be the specials.
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(TokenId id) const;
    bool contains(std::string_view token) const;
    /// Id of a single already-split token; UNK when absent.
    TokenId id(std::string_view token) const;

    TokenIds tokenize(std::string_view text) const;
    std::string detokenize(const TokenIds& ids) const;

private:
    void add(std::string token);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

} // namespace pspt
