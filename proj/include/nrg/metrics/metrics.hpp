#pragma once

#include <span>
#include <string>
#include <vector>

#include "nrg/model/params.hpp"
#include "nrg/tokens.hpp"

namespace nrg::metrics {

struct PerplexityResult {
  double ppl = 0.0;
  double total_nll = 0.0;
  std::size_t tokens = 0;  // reply tokens plus one EOS per pair
};

// exp(total NLL over reply tokens incl. EOS / token count).
PerplexityResult perplexity(const model::ModelParams& params, std::span<const Pair> dataset);

// Distinct n-grams / total n-grams over all responses; 0 when no response
// has n tokens.
double distinct_n(std::span<const TokenSeq> responses, std::size_t n);

// Recall forms: overlap divided by the reference length. An empty candidate
// scores 0; an empty reference throws InvalidArgument.
double rouge_1(const TokenSeq& candidate, const TokenSeq& reference);
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference);
std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

// Best score over several references.
double rouge_1(const TokenSeq& candidate, std::span<const TokenSeq> references);
double rouge_l(const TokenSeq& candidate, std::span<const TokenSeq> references);

struct MetricReport {
  double ppl = 0.0;
  double distinct1 = 0.0;
  double distinct2 = 0.0;
  double rouge1 = 0.0;
  double rougeL = 0.0;
  std::size_t ppl_tokens = 0;
  std::size_t queries = 0;
  std::size_t response_tokens = 0;
  std::size_t unigram_types = 0;
  std::size_t bigram_types = 0;
  std::string rouge_form = "recall";
  std::string distinct_scope = "top1";

  std::string to_text() const;
  std::string to_json() const;
};

// ROUGE is averaged over queries; `responses` are the outputs Distinct-n
// counts (top-1 per query by default, or every beam output).
MetricReport build_report(const PerplexityResult& ppl, std::span<const TokenSeq> top1,
                          std::span<const std::vector<TokenSeq>> references, std::span<const TokenSeq> responses,
                          bool all_outputs = false);

}  // namespace nrg::metrics
