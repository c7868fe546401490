#include "nrg/losses/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nrg/error.hpp"

namespace nrg::losses {

namespace t = nrg::tensor;
using model::BoundParams;
using model::ModelParams;
using tensor::Tensor;
using tensor::Var;

std::string_view to_string(HingeMode mode) {
  return mode == HingeMode::kPaperLiteral ? "paper" : "standard";
}

HingeMode parse_hinge_mode(std::string_view text) {
  if (text == "paper" || text == "paper-literal") return HingeMode::kPaperLiteral;
  if (text == "standard" || text == "standard-hinge") return HingeMode::kStandard;
  throw InvalidArgument("unknown hinge mode '" + std::string(text) + "' (expected paper|standard)");
}

namespace {

double hinge_argument(double pos_logprob, double neg_logprob_avg, double gamma, HingeMode mode) {
  return mode == HingeMode::kPaperLiteral ? (pos_logprob - neg_logprob_avg) - gamma
                                          : (neg_logprob_avg - pos_logprob) + gamma;
}

}  // namespace

MarginBranch margin_branch(double pos_logprob, double neg_logprob_avg, double gamma, HingeMode mode) {
  return hinge_argument(pos_logprob, neg_logprob_avg, gamma, mode) > 0.0 ? MarginBranch::kActive
                                                                          : MarginBranch::kInactive;
}

double margin_term(double pos_logprob, double neg_logprob_avg, double gamma, HingeMode mode) {
  return std::max(0.0, hinge_argument(pos_logprob, neg_logprob_avg, gamma, mode));
}

double cross_entropy_nll(const TokenSeq& query, const TokenSeq& reply, const ModelParams& params) {
  return -model::sequence_log_prob(query, reply, params);
}

namespace {

void validate(const Triplet& tr, bool need_negatives) {
  if (!need_negatives) return;
  if (tr.negatives.empty()) throw InvalidArgument("triplet has no negatives");
  for (const auto& neg : tr.negatives) {
    if (neg == tr.positive) throw InvalidArgument("triplet negative equals its positive reply");
  }
}

// Rethrows a numeric failure with the name of the loss component that produced it.
template <typename F>
auto guarded(const char* subterm, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(std::string("ranking loss: non-finite ") + subterm + " (" + e.what() + ")");
  }
}

Var per_token(Var lp, t::Tape& tape, const std::vector<TokenSeq>& seqs) {
  Tensor inv = Tensor::matrix(seqs.size(), 1);
  for (std::size_t i = 0; i < seqs.size(); ++i) inv[i] = 1.0 / static_cast<double>(model::with_eos(seqs[i]).size());
  return t::mul(lp, tape.constant(std::move(inv)));
}

using model::Tape;

}  // namespace

BatchLoss ranking_loss_batch(const BoundParams& p, std::span<const Triplet> triplets, const RankingConfig& config) {
  if (triplets.empty()) throw InvalidArgument("ranking loss: empty batch");
  if (!std::isfinite(config.lambda) || !std::isfinite(config.gamma) || config.lambda < 0.0 || config.gamma < 0.0) {
    throw InvalidArgument("ranking loss: lambda and gamma must be finite and non-negative");
  }
  const bool regularized = config.lambda != 0.0;
  for (const auto& tr : triplets) validate(tr, regularized);

  Tape& tape = *p.tgt_embed.tape();
  const std::size_t rows = triplets.size();
  std::vector<TokenSeq> queries, positives;
  for (const auto& tr : triplets) {
    queries.push_back(tr.query);
    positives.push_back(tr.positive);
  }

  model::EncodedBatch enc = model::encode_batch(p, queries);
  Var pos = guarded("positive log-probability", [&] { return model::sequence_log_probs(p, enc, positives); });
  Var ce = t::scale(pos, -1.0);

  BatchLoss out;
  out.rows.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto& b = out.rows[r];
    b.mode = config.mode;
    b.pos_logprob = pos.value()[r];
    b.ce = ce.value()[r];
  }

  Var totals = ce;
  if (regularized) {
    std::vector<std::size_t> owner;
    std::vector<TokenSeq> negs;
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<TokenSeq> sorted = triplets[r].negatives;
      std::sort(sorted.begin(), sorted.end());
      for (auto& n : sorted) {
        owner.push_back(r);
        negs.push_back(std::move(n));
      }
    }
    Tensor averaging = Tensor::matrix(rows, negs.size());
    for (std::size_t j = 0; j < negs.size(); ++j) {
      averaging.at(owner[j], j) = 1.0 / static_cast<double>(triplets[owner[j]].negatives.size());
    }

    model::EncodedBatch neg_enc = model::select_rows(enc, owner);
    Var neg = guarded("negative log-probability", [&] { return model::sequence_log_probs(p, neg_enc, negs); });
    Var pos_m = pos;
    if (config.per_token_margin) {
      pos_m = per_token(pos, tape, positives);
      neg = per_token(neg, tape, negs);
    }
    Var neg_avg = t::matmul(tape.constant(std::move(averaging)), neg);
    Var arg = config.mode == HingeMode::kPaperLiteral ? t::shift(t::sub(pos_m, neg_avg), -config.gamma)
                                                      : t::shift(t::sub(neg_avg, pos_m), config.gamma);
    Var hinge = guarded("margin term", [&] { return t::relu(arg); });
    totals = t::add(ce, t::scale(hinge, config.lambda));
    for (std::size_t r = 0; r < rows; ++r) {
      auto& b = out.rows[r];
      b.pos_logprob = pos_m.value()[r];
      b.neg_logprob_avg = neg_avg.value()[r];
      b.margin_term = hinge.value()[r];
      b.margin_active = margin_branch(b.pos_logprob, b.neg_logprob_avg, config.gamma, config.mode) ==
                        MarginBranch::kActive;
    }
  }
  for (std::size_t r = 0; r < rows; ++r) out.rows[r].total = totals.value()[r];
  out.objective = guarded("objective", [&] { return t::scale(t::sum(totals), 1.0 / static_cast<double>(rows)); });
  return out;
}

LossBreakdown ranking_loss(const Triplet& triplet, const ModelParams& params, const RankingConfig& config) {
  Tape tape;
  BoundParams p = model::bind_frozen(tape, params);
  return ranking_loss_batch(p, std::span<const Triplet>(&triplet, 1), config).rows.front();
}

}  // namespace nrg::losses
