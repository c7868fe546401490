#pragma once

#include <random>
#include <span>
#include <vector>

#include "nrg/tokens.hpp"

namespace nrg::losses {

// Draws negative replies uniformly from the response multiset: a reply seen
// five times is five times as likely as a singleton. A draw equal to the
// positive, or already drawn for the same triplet, is redrawn.
class NegativeSampler {
 public:
  // Throws InvalidArgument unless the pool holds at least k + 1 distinct replies.
  NegativeSampler(std::span<const TokenSeq> responses, std::size_t k);

  // Indices into the response pool; k distinct replies, none equal to `positive`.
  std::vector<std::size_t> sample_indices(const TokenSeq& positive, std::mt19937_64& rng) const;
  std::vector<TokenSeq> sample(const TokenSeq& positive, std::mt19937_64& rng) const;

  std::size_t k() const { return k_; }
  std::size_t distinct() const { return distinct_; }

 private:
  std::span<const TokenSeq> pool_;
  std::size_t k_;
  std::size_t distinct_;
};

// One-shot convenience over NegativeSampler.
std::vector<TokenSeq> sample_negatives(std::span<const TokenSeq> responses, const TokenSeq& positive, std::size_t k,
                                       std::mt19937_64& rng);

// Per-triplet generator derived from (seed, epoch, index) so draws do not
// depend on iteration order.
std::mt19937_64 triplet_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index);

}  // namespace nrg::losses
