#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>

#include "nrg/lemma/universe.hpp"

namespace nrg::lemma {

struct Lemma1Result {
  bool set_given_reply = false;  // p(S(y)|y) = 1
  bool joint_is_marginal = false;  // p(S(y), y) = p(y)
  bool triple_is_pair = false;     // p(x, y, S(y)) = p(x, y) for every x
  bool passed() const { return set_given_reply && joint_is_marginal && triple_is_pair; }
};
Lemma1Result verify_lemma1(const LemmaUniverse& u, std::size_t y);

struct Lemma2Result {
  double epsilon1 = 0.0;  // max over x of p(x|y_ur)
  std::size_t M = 0;      // distinct queries
  bool uniform = false;   // every attached query has the same count
  bool matches_one_over_M = false;  // uniform implies epsilon1 == 1/M
};
Lemma2Result verify_lemma2(const LemmaUniverse& u, std::size_t y_ur);

// Sum over universal m of M*m / (M*m + (n - m)) with non-universal
// frequency 1.
double lemma3_closed_form(double M, double m, double n);
// The printed final bound M / (M - 3); exceeds 1 for every M > 3.
double lemma3_printed_bound(double M);

struct Lemma3Result {
  double universal_sum = 0.0;  // sum of p(y_ur|S)
  double max_other = 0.0;      // max of p(y_o|S), 0 without others
  std::size_t m = 0;
  std::size_t n = 0;
  // Filled when all universal candidates share one frequency M and all
  // others have frequency 1.
  bool closed_form_applies = false;
  double M = 0.0;
  double closed_form = 0.0;
};
// Throws InvalidArgument when no reply fits inside S.
Lemma3Result verify_lemma3(const LemmaUniverse& u, const WordSet& S);

struct Lemma4Result {
  std::size_t distinct_queries = 0;
  std::size_t K = 0;
  bool passed = false;  // distinct queries == K and p(x|y) == 1/K for each
};
// Throws InvalidArgument unless the universe was chain-built.
Lemma4Result verify_lemma4(const LemmaUniverse& u, std::size_t y);

struct TopShareResult {
  double analytic = 0.0;      // the binomial-sum expression for m/n
  double bound = 0.0;         // ln(t + 1) / 20
  bool bound_exceeds_quarter = false;
  double monte_carlo = 0.0;   // sampling estimate of the same expression
  double all_top_subsequences = 0.0;  // share of sub-multisets made only of top-t words
  double top_t_mass = 0.0;    // exact q = sum of the t largest probabilities
  std::size_t vocab = 0;
};
// Smallest t with ln(t + 1) / 20 > 0.25.
std::size_t top_share_quarter_threshold();
// Tokens follow p(w_i) proportional to 1 / i over the largest vocabulary
// whose normalizer stays <= 1 / C.
TopShareResult verify_top_share(std::size_t T, std::size_t t, double C, std::size_t samples, std::mt19937_64& rng);

struct MixtureReport {
  double exact = 0.0;  // log p(y|S(y), x) by counting
  // The six successive right-hand sides of the rewriting chain.
  std::array<double, 6> chain{};
  double chain_max_deviation = 0.0;
  double mixture = 0.0;  // sum_i p(x|y_i) p(y_i|S)
  double part_reply = 0.0;
  double part_universal = 0.0;
  double part_other = 0.0;
  double partition_deviation = 0.0;
  double epsilon1 = 0.0;  // the universal part
  double epsilon2 = 0.0;  // the other part
  std::size_t K = 0;      // distinct queries of y
  double proxy_step1 = 0.0;  // log p(y|S) + log p(x|y) / (p(x|y) p(y|S) + eps)
  double proxy_step2 = 0.0;  // log p(y|S) / (p(y|S) + eps / K)
  double proxy_gap = 0.0;    // exact - proxy_step2 (reported, not asserted)
};
// Needs f(x, y) > 0. Throws InvalidArgument when more than `budget` replies
// would have to be enumerated.
MixtureReport verify_mixture_proxy(const LemmaUniverse& u, std::size_t x, std::size_t y, std::size_t budget = 1000);

// Per-lemma pass/fail with the computed quantities.
std::string lemma_report(const LemmaUniverse& u, std::uint64_t seed);

}  // namespace nrg::lemma
