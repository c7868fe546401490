#include "nrg/infer/beam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nrg/error.hpp"

namespace nrg::infer {

namespace t = tensor;
using model::BoundParams;
using t::Tensor;

TokenSeq Hypothesis::emitted() const {
  TokenSeq out = tokens;
  if (finished) out.push_back(kEos);
  return out;
}

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kRaw: return "raw";
    case ScoreKind::kLengthNormalized: return "length-normalized";
    case ScoreKind::kMmi: return "mmi";
  }
  return "?";
}

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.emitted() < b.emitted();
}

void sort_nbest(NBestList& list) { std::stable_sort(list.hyps.begin(), list.hyps.end(), ranks_before); }

namespace {

Tensor stack_rows(const std::vector<Hypothesis>& live, bool cell) {
  const std::size_t h = live.front().state.h.size();
  Tensor out = Tensor::matrix(live.size(), h);
  for (std::size_t r = 0; r < live.size(); ++r) {
    const auto& src = cell ? live[r].state.c : live[r].state.h;
    std::copy(src.begin(), src.end(), out.data() + r * h);
  }
  return out;
}

struct Candidate {
  std::size_t parent;
  TokenId token;
  double log_prob;
};

}  // namespace

NBestList beam_search(const TokenSeq& query, const model::ModelParams& params, std::size_t beam, std::size_t max_len) {
  if (beam == 0) throw InvalidArgument("beam search: beam must be >= 1");
  if (max_len == 0) throw InvalidArgument("beam search: max_len must be >= 1");
  const std::size_t vocab = params.dims.tgt_vocab;
  const std::size_t hidden = params.dims.hidden;

  t::Tape tape;
  BoundParams p = model::bind_frozen(tape, params);
  const TokenSeq qs[] = {query};
  model::EncodedBatch enc = model::encode_batch(p, qs);

  std::vector<Hypothesis> live(1);
  live[0].state.h.assign(enc.h.value().data(), enc.h.value().data() + hidden);
  live[0].state.c.assign(enc.c.value().data(), enc.c.value().data() + hidden);
  std::vector<Hypothesis> finished;

  auto kth_finished = [&] {
    std::vector<double> s;
    for (const auto& f : finished) s.push_back(f.log_prob);
    std::nth_element(s.begin(), s.begin() + (beam - 1), s.end(), std::greater<>());
    return s[beam - 1];
  };

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    if (finished.size() >= beam) {
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.log_prob);
      if (best_live <= kth_finished()) break;
    }
    const std::size_t rows = live.size();
    std::vector<TokenId> prev(rows);
    for (std::size_t r = 0; r < rows; ++r) prev[r] = live[r].tokens.empty() ? kBos : live[r].tokens.back();
    model::EncodedBatch rep = model::select_rows(enc, std::vector<std::size_t>(rows, 0));
    t::Var h = tape.constant(stack_rows(live, false));
    t::Var c = tape.constant(stack_rows(live, true));
    model::AttentionOut att = model::attend(p, rep, h);
    model::StepOut out = model::decoder_step(p, prev, h, c, att.context);
    const Tensor& lp = out.log_probs.value();

    std::vector<Candidate> cands;
    cands.reserve(rows * vocab);
    for (std::size_t r = 0; r < rows; ++r) {
      for (TokenId tok = 0; tok < vocab; ++tok) {
        if (tok == kPad || tok == kBos) continue;
        cands.push_back({r, tok, live[r].log_prob + lp.at(r, tok)});
      }
    }
    const std::size_t keep = std::min(beam, cands.size());
    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      const TokenSeq& pa = live[a.parent].tokens;
      const TokenSeq& pb = live[b.parent].tokens;
      if (pa != pb) return pa < pb;
      if (a.token != b.token) return a.token < b.token;
      return a.parent < b.parent;
    };
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), better);

    const Tensor& nh = out.h.value();
    const Tensor& nc = out.c.value();
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& cd = cands[i];
      Hypothesis hyp;
      hyp.tokens = live[cd.parent].tokens;
      hyp.log_prob = cd.log_prob;
      hyp.score = cd.log_prob;
      hyp.state.h.assign(nh.data() + cd.parent * hidden, nh.data() + (cd.parent + 1) * hidden);
      hyp.state.c.assign(nc.data() + cd.parent * hidden, nc.data() + (cd.parent + 1) * hidden);
      hyp.state.step = step + 1;
      if (cd.token == kEos) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
      } else {
        hyp.tokens.push_back(cd.token);
        next.push_back(std::move(hyp));
      }
    }
    live = std::move(next);
  }

  NBestList list;
  list.hyps = std::move(finished);
  sort_nbest(list);
  if (list.hyps.size() > beam) list.hyps.resize(beam);
  if (list.hyps.size() < beam) {
    NBestList rest;
    rest.hyps = std::move(live);
    sort_nbest(rest);
    for (auto& h : rest.hyps) {
      if (list.hyps.size() == beam) break;
      list.hyps.push_back(std::move(h));
    }
  }
  return list;
}

NBestList length_normalized(NBestList list) {
  for (auto& h : list.hyps) h.score = h.log_prob / static_cast<double>(h.tokens.size() + 1);
  list.kind = ScoreKind::kLengthNormalized;
  sort_nbest(list);
  return list;
}

double mmi_score(double forward_lp, double backward_lp, std::size_t length, const MmiWeights& weights) {
  return forward_lp + weights.lambda * backward_lp + weights.gamma_len * static_cast<double>(length);
}

NBestList mmi_rerank(NBestList list, const TokenSeq& query, const model::ModelParams& forward,
                     const model::ModelParams& backward, const MmiWeights& weights) {
  if (list.hyps.empty()) throw InvalidArgument("mmi rerank: empty n-best list");
  if (backward.dims.src_vocab != forward.dims.tgt_vocab || backward.dims.tgt_vocab != forward.dims.src_vocab) {
    throw InvalidArgument("mmi rerank: backward model vocabulary (" + std::to_string(backward.dims.src_vocab) + " -> " +
                          std::to_string(backward.dims.tgt_vocab) + ") does not mirror the forward model (" +
                          std::to_string(forward.dims.src_vocab) + " -> " + std::to_string(forward.dims.tgt_vocab) +
                          ")");
  }
  if (!std::isfinite(weights.lambda) || !std::isfinite(weights.gamma_len)) {
    throw InvalidArgument("mmi rerank: weights must be finite");
  }
  for (auto& h : list.hyps) {
    double backward_lp = 0.0;
    if (weights.lambda != 0.0) {
      TokenSeq as_query = h.tokens.empty() ? TokenSeq{kEos} : h.tokens;
      if (as_query.size() > backward.dims.max_query_len) as_query.resize(backward.dims.max_query_len);
      backward_lp = model::sequence_log_prob(as_query, query, backward);
    }
    h.score = mmi_score(h.log_prob, backward_lp, h.tokens.size(), weights);
  }
  list.kind = ScoreKind::kMmi;
  sort_nbest(list);
  return list;
}

}  // namespace nrg::infer
