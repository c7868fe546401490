#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "nrg/model/seq2seq.hpp"
#include "nrg/tokens.hpp"

namespace nrg::losses {

struct Triplet {
  TokenSeq query;
  TokenSeq positive;
  std::vector<TokenSeq> negatives;
};

// kPaperLiteral: hinge on  log p(y|x) - avg log p(y-|x) - gamma.
// kStandard:     hinge on  avg log p(y-|x) - log p(y|x) + gamma.
enum class HingeMode { kPaperLiteral, kStandard };

std::string_view to_string(HingeMode mode);
// Accepts "paper" / "paper-literal" and "standard" / "standard-hinge".
HingeMode parse_hinge_mode(std::string_view text);

struct RankingConfig {
  double lambda = 0.1;
  double gamma = 0.18;
  HingeMode mode = HingeMode::kPaperLiteral;
  // Divide each sequence log-probability by its scored length (EOS included)
  // before it enters the margin. Cross-entropy stays unnormalized.
  bool per_token_margin = false;
};

struct LossBreakdown {
  double ce = 0.0;               // -log p(y|x)
  double pos_logprob = 0.0;      // log p(y|x), as used in the margin
  double neg_logprob_avg = 0.0;  // mean over negatives; 0 when lambda == 0 (not evaluated)
  double margin_term = 0.0;      // max{0, hinge argument}
  bool margin_active = false;
  double total = 0.0;            // ce + lambda * margin_term
  HingeMode mode = HingeMode::kPaperLiteral;
};

enum class MarginBranch { kInactive, kActive };

// Which sub-gradient applies. Paper-literal: active iff pos - neg > gamma
// (a difference of exactly gamma is inactive). Standard: active iff
// neg - pos + gamma > 0.
MarginBranch margin_branch(double pos_logprob, double neg_logprob_avg, double gamma, HingeMode mode);

// max{0, hinge argument} for the given mode.
double margin_term(double pos_logprob, double neg_logprob_avg, double gamma, HingeMode mode);

// -log p(y|x).
double cross_entropy_nll(const TokenSeq& query, const TokenSeq& reply, const model::ModelParams& params);

struct BatchLoss {
  tensor::Var objective;  // mean of per-triplet totals, shape [1]
  std::vector<LossBreakdown> rows;
};

// Records the regularized objective for a batch of triplets on the tape the
// parameters are bound to. The query encoding is shared by each triplet's
// positive and negatives. Negatives are evaluated in a canonical order, so
// permuting a triplet's negatives does not change any value. With
// lambda == 0 negatives are not evaluated and the objective is the mean NLL.
BatchLoss ranking_loss_batch(const model::BoundParams& params, std::span<const Triplet> triplets,
                             const RankingConfig& config);

// Value-only evaluation of one triplet.
LossBreakdown ranking_loss(const Triplet& triplet, const model::ModelParams& params, const RankingConfig& config);

}  // namespace nrg::losses
