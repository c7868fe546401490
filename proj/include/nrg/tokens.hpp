#pragma once

#include <cstddef>
#include <vector>

namespace nrg {

using TokenId = std::size_t;
using TokenSeq = std::vector<TokenId>;

// Reserved ids shared by every vocabulary.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumSpecial = 4;

struct Pair {
  TokenSeq query;
  TokenSeq reply;

  bool operator==(const Pair&) const = default;
};

}  // namespace nrg
