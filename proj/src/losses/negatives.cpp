#include "nrg/losses/negatives.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "nrg/error.hpp"

namespace nrg::losses {

NegativeSampler::NegativeSampler(std::span<const TokenSeq> responses, std::size_t k)
    : pool_(responses), k_(k) {
  if (k == 0) throw InvalidArgument("negative sampling: k must be at least 1");
  std::set<TokenSeq> unique(responses.begin(), responses.end());
  distinct_ = unique.size();
  if (distinct_ < k + 1) {
    throw InvalidArgument("negative sampling: corpus has " + std::to_string(distinct_) +
                          " distinct responses, need at least " + std::to_string(k + 1));
  }
}

std::vector<std::size_t> NegativeSampler::sample_indices(const TokenSeq& positive, std::mt19937_64& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
  std::vector<std::size_t> out;
  out.reserve(k_);
  while (out.size() < k_) {
    const std::size_t i = pick(rng);
    const TokenSeq& cand = pool_[i];
    if (cand == positive) continue;
    const bool seen = std::any_of(out.begin(), out.end(), [&](std::size_t j) { return pool_[j] == cand; });
    if (!seen) out.push_back(i);
  }
  return out;
}

std::vector<TokenSeq> NegativeSampler::sample(const TokenSeq& positive, std::mt19937_64& rng) const {
  std::vector<TokenSeq> out;
  for (std::size_t i : sample_indices(positive, rng)) out.push_back(pool_[i]);
  return out;
}

std::vector<TokenSeq> sample_negatives(std::span<const TokenSeq> responses, const TokenSeq& positive, std::size_t k,
                                       std::mt19937_64& rng) {
  return NegativeSampler(responses, k).sample(positive, rng);
}

std::mt19937_64 triplet_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32), 0x6e656773u};
  return std::mt19937_64(seq);
}

}  // namespace nrg::losses
