#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nrg/tokens.hpp"

namespace nrg::lemma {

using WordSet = std::set<TokenId>;
WordSet word_set(const TokenSeq& y);

// Finite joint distribution over (query, reply) given by occurrence counts.
// Queries are indices; replies are token sequences. Probabilities come from
// exact counting, with the event "S" read as "the reply's word set is a
// subset of S".
class LemmaUniverse {
 public:
  explicit LemmaUniverse(std::size_t queries) : queries_(queries) {}

  // Returns the reply index; the same sequence always maps to one index.
  std::size_t add_reply(const TokenSeq& y, bool universal = false);
  void add(std::size_t x, std::size_t y, std::uint64_t count = 1);

  std::size_t query_count() const { return queries_; }
  std::size_t reply_count() const { return replies_.size(); }
  const TokenSeq& reply(std::size_t y) const { return replies_.at(y); }
  bool universal(std::size_t y) const { return universal_.at(y); }
  std::uint64_t f(std::size_t x, std::size_t y) const;
  std::uint64_t f_reply(std::size_t y) const;
  std::uint64_t total() const { return total_; }
  std::size_t distinct_queries(std::size_t y) const { return f_.at(y).size(); }
  const std::map<std::size_t, std::uint64_t>& queries_of(std::size_t y) const { return f_.at(y); }

  // Set when built by chain_universe: every reply is also a query with K replies.
  std::size_t chain_k() const { return chain_k_; }
  void mark_chain(std::size_t k) { chain_k_ = k; }

  std::vector<std::size_t> candidates(const WordSet& S) const;

  double p_y(std::size_t y) const;
  double p_x_given_y(std::size_t x, std::size_t y) const;
  double p_S(const WordSet& S) const;
  double p_x_and_S(std::size_t x, const WordSet& S) const;
  double p_y_given_S(std::size_t y, const WordSet& S) const;
  double p_x_given_S(std::size_t x, const WordSet& S) const;
  // Joint and conditional events spelled out for Lemma 1.
  double p_S_given_y(const WordSet& S, std::size_t y) const;
  double p_y_and_S(std::size_t y, const WordSet& S) const;
  double p_x_y_S(std::size_t x, std::size_t y, const WordSet& S) const;
  double p_x_y(std::size_t x, std::size_t y) const;

 private:
  std::size_t queries_;
  std::vector<TokenSeq> replies_;
  std::vector<bool> universal_;
  std::vector<std::map<std::size_t, std::uint64_t>> f_;
  std::vector<std::uint64_t> reply_totals_;
  std::map<TokenSeq, std::size_t> index_;
  std::uint64_t total_ = 0;
  std::size_t chain_k_ = 0;
};

struct RandomUniverseSpec {
  std::size_t queries = 200;
  std::size_t vocab = 12;        // content words, ids 4 ... 4 + vocab - 1
  std::size_t top_t = 4;         // the first top_t ids are top-ranked
  std::size_t universal = 2;     // m planted universal replies
  std::size_t attach = 50;       // M distinct queries per universal reply
  std::size_t others = 40;       // non-universal replies, frequency 1 each
};

// Universal replies use only top-ranked words and attach uniformly to
// `attach` distinct queries; every other reply contains at least one
// lower-ranked word and occurs once.
LemmaUniverse random_universe(const RandomUniverseSpec& spec, std::mt19937_64& rng);

// n utterances u_0 ... u_{n-1}; u_i is answered by u_{i+1} ... u_{i+k}
// (indices mod n), so every reply has exactly k distinct queries.
LemmaUniverse chain_universe(std::size_t n, std::size_t k, std::mt19937_64& rng);

}  // namespace nrg::lemma
