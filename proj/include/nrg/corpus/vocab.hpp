#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nrg/tokens.hpp"

namespace nrg::corpus {

using Words = std::vector<std::string>;

// Ids 0-3 are PAD, BOS, EOS, UNK; content ids follow in descending corpus
// frequency (ties by spelling), so the frequency rank of id i is i - 3.
class Vocab {
 public:
  // `limit` caps the number of content words kept (0 keeps all).
  static Vocab build(const std::vector<Words>& sentences, std::size_t limit = 0);

  std::size_t size() const { return words_.size(); }
  std::size_t content_size() const { return words_.size() - kNumSpecial; }
  bool contains(std::string_view word) const;
  TokenId id(std::string_view word) const;  // kUnk when absent
  const std::string& word(TokenId id) const;
  std::uint64_t frequency(TokenId id) const;  // 0 for specials
  // 1-based frequency rank of a content id; 0 for specials.
  std::size_t rank(TokenId id) const { return id < kNumSpecial ? 0 : id - kNumSpecial + 1; }

  TokenSeq encode(const Words& words) const;
  Words decode(const TokenSeq& ids) const;
  std::string join(const TokenSeq& ids) const;

  // One "word TAB count" line per content word, in id order.
  std::string serialize() const;
  static Vocab deserialize(std::string_view text);

  bool operator==(const Vocab& other) const { return words_ == other.words_ && counts_ == other.counts_; }

 private:
  void index();

  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Splits on ASCII whitespace.
Words split_words(std::string_view text);

// Lowercases and drops ASCII punctuation before splitting.
Words normalize_words(std::string_view text);

}  // namespace nrg::corpus
