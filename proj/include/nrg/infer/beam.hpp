#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nrg/model/seq2seq.hpp"
#include "nrg/tokens.hpp"

namespace nrg::infer {

struct Hypothesis {
  TokenSeq tokens;          // emitted tokens, without the closing EOS
  double log_prob = 0.0;    // sum of the chosen step log-probabilities
  double score = 0.0;       // value the list is sorted by
  bool finished = false;    // closed by EOS; false means cut off at max_len
  model::DecoderState state;

  // Emitted sequence including EOS when finished; used for tie-breaking.
  TokenSeq emitted() const;
};

enum class ScoreKind { kRaw, kLengthNormalized, kMmi };
std::string_view to_string(ScoreKind kind);

struct NBestList {
  std::vector<Hypothesis> hyps;  // score descending
  ScoreKind kind = ScoreKind::kRaw;
};

// Score descending, then emitted token ids ascending.
bool ranks_before(const Hypothesis& a, const Hypothesis& b);
void sort_nbest(NBestList& list);

// Beam search from BOS. PAD and BOS are never emitted. Hypotheses closed by
// EOS are retired; the search stops once no live hypothesis can beat the
// beam-th finished one. Returns up to `beam` finished hypotheses, padded with
// unfinished ones of length max_len (finished = false) if fewer finished.
NBestList beam_search(const TokenSeq& query, const model::ModelParams& params, std::size_t beam, std::size_t max_len);

// score = log_prob / (tokens + 1), EOS counted.
NBestList length_normalized(NBestList list);

struct MmiWeights {
  double lambda = 0.5;  // weight of log p(x|y)
  double gamma_len = 0.1;  // bonus per emitted token
};

double mmi_score(double forward_lp, double backward_lp, std::size_t length, const MmiWeights& weights);

// Rescores with log p(y|x) + lambda * log p(x|y) + gamma_len * |y| under a
// backward (reply -> query) model and re-sorts. log_prob is left untouched.
// An empty reply is scored by the backward model as the one-token query
// [EOS]; replies longer than the backward model's query limit are truncated.
// Throws InvalidArgument if the two models' vocabularies do not mirror each
// other or the list is empty.
NBestList mmi_rerank(NBestList list, const TokenSeq& query, const model::ModelParams& forward,
                     const model::ModelParams& backward, const MmiWeights& weights);

}  // namespace nrg::infer
