#include "nrg/model/seq2seq.hpp"

#include <algorithm>
#include <string>

#include "nrg/error.hpp"

namespace nrg::model {

namespace t = nrg::tensor;

namespace {

// exp() of this underflows to exactly 0, so padded positions get zero weight.
constexpr double kMaskedScore = -1e9;

template <typename P, typename Bind>
BoundParams bind_with(const ModelDims& dims, P& params, Bind bind) {
  BoundParams b;
  b.dims = dims;
  b.src_embed = bind(params.src_embed);
  b.tgt_embed = bind(params.tgt_embed);
  b.enc_w = bind(params.enc_w);
  b.enc_b = bind(params.enc_b);
  b.dec_w = bind(params.dec_w);
  b.dec_b = bind(params.dec_b);
  b.att_w = bind(params.att_w);
  b.att_u = bind(params.att_u);
  b.att_v = bind(params.att_v);
  b.out_w = bind(params.out_w);
  b.out_b = bind(params.out_b);
  return b;
}

struct Lstm {
  Var h, c;
};

Lstm lstm_cell(Var input, Var c_prev, Var w, Var b, std::size_t hidden) {
  Var gates = t::add(t::matmul(input, w), b);
  Var i = t::sigmoid(t::slice_cols(gates, 0, hidden));
  Var f = t::sigmoid(t::slice_cols(gates, hidden, hidden));
  Var g = t::tanh(t::slice_cols(gates, 2 * hidden, hidden));
  Var o = t::sigmoid(t::slice_cols(gates, 3 * hidden, hidden));
  Var c = t::add(t::mul(f, c_prev), t::mul(i, g));
  Var h = t::mul(o, t::tanh(c));
  return {h, c};
}

// keep * fresh + (1 - keep) * stale, row-wise.
Var blend(Tape& tape, Var fresh, Var stale, const std::vector<double>& keep) {
  Tensor on = Tensor::matrix(keep.size(), 1);
  Tensor off = Tensor::matrix(keep.size(), 1);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    on[r] = keep[r];
    off[r] = 1.0 - keep[r];
  }
  return t::add(t::mul(fresh, tape.constant(std::move(on))), t::mul(stale, tape.constant(std::move(off))));
}

void check_ids(const TokenSeq& seq, std::size_t vocab, const char* what) {
  for (TokenId id : seq) {
    if (id >= vocab) {
      throw InvalidArgument(std::string(what) + " token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(vocab));
    }
  }
}

std::vector<double> row_values(const Tensor& t, std::size_t row = 0) {
  return {t.data() + row * t.cols(), t.data() + (row + 1) * t.cols()};
}

Tensor row_tensor(std::span<const double> v) { return Tensor({1, v.size()}, std::vector<double>(v.begin(), v.end())); }

}  // namespace

BoundParams bind_trainable(Tape& tape, ModelParams& params) {
  return bind_with(params.dims, params, [&](Tensor& x) { return tape.param(x); });
}

BoundParams bind_frozen(Tape& tape, const ModelParams& params) {
  return bind_with(params.dims, params, [&](const Tensor& x) { return tape.input(x); });
}

EncodedBatch encode_batch(const BoundParams& p, std::span<const TokenSeq> queries) {
  if (queries.empty()) throw InvalidArgument("encode: empty batch");
  Tape& tape = *p.src_embed.tape();
  std::size_t longest = 0;
  for (const auto& q : queries) {
    if (q.empty()) throw InvalidArgument("encode: empty query");
    if (q.size() > p.dims.max_query_len) {
      throw InvalidArgument("encode: query of " + std::to_string(q.size()) + " tokens exceeds limit " +
                            std::to_string(p.dims.max_query_len));
    }
    check_ids(q, p.dims.src_vocab, "query");
    longest = std::max(longest, q.size());
  }

  const std::size_t rows = queries.size(), hidden = p.dims.hidden;
  EncodedBatch enc;
  enc.rows = rows;
  enc.h = tape.constant(Tensor::matrix(rows, hidden));
  enc.c = tape.constant(Tensor::matrix(rows, hidden));
  Tensor mask = Tensor::matrix(rows, longest);

  for (std::size_t pos = 0; pos < longest; ++pos) {
    std::vector<std::size_t> ids(rows);
    std::vector<double> keep(rows);
    bool all_real = true;
    for (std::size_t r = 0; r < rows; ++r) {
      const bool real = pos < queries[r].size();
      ids[r] = real ? queries[r][pos] : kPad;
      keep[r] = real ? 1.0 : 0.0;
      if (!real) {
        all_real = false;
        mask.at(r, pos) = kMaskedScore;
      }
    }
    Var x = t::embed(p.src_embed, std::move(ids));
    Lstm next = lstm_cell(t::concat({x, enc.h}), enc.c, p.enc_w, p.enc_b, hidden);
    if (all_real) {
      enc.h = next.h;
      enc.c = next.c;
    } else {
      enc.h = blend(tape, next.h, enc.h, keep);
      enc.c = blend(tape, next.c, enc.c, keep);
    }
    enc.annotations.push_back(enc.h);
    enc.projected.push_back(t::matmul(enc.h, p.att_u));
  }
  enc.score_mask = tape.constant(std::move(mask));
  return enc;
}

EncodedBatch select_rows(const EncodedBatch& enc, const std::vector<std::size_t>& source_rows) {
  EncodedBatch out;
  out.rows = source_rows.size();
  for (std::size_t i = 0; i < enc.annotations.size(); ++i) {
    out.annotations.push_back(t::embed(enc.annotations[i], source_rows));
    out.projected.push_back(t::embed(enc.projected[i], source_rows));
  }
  out.score_mask = t::embed(enc.score_mask, source_rows);
  out.h = t::embed(enc.h, source_rows);
  out.c = t::embed(enc.c, source_rows);
  return out;
}

AttentionOut attend(const BoundParams& p, const EncodedBatch& enc, Var h) {
  if (enc.annotations.empty()) throw InvalidArgument("attention: no annotations");
  Var query = t::matmul(h, p.att_w);
  std::vector<Var> scores;
  scores.reserve(enc.annotations.size());
  for (const Var& proj : enc.projected) scores.push_back(t::matmul(t::tanh(t::add(query, proj)), p.att_v));
  Var weights = t::softmax(t::add(t::concat(scores), enc.score_mask));
  Var context;
  for (std::size_t j = 0; j < enc.annotations.size(); ++j) {
    Var term = t::mul(enc.annotations[j], t::slice_cols(weights, j, 1));
    context = j == 0 ? term : t::add(context, term);
  }
  return {context, weights};
}

StepOut decoder_step(const BoundParams& p, const std::vector<TokenId>& prev, Var h, Var c, Var context) {
  for (TokenId id : prev) {
    if (id >= p.dims.tgt_vocab) {
      throw InvalidArgument("decode: token id " + std::to_string(id) + " outside target vocabulary of " +
                            std::to_string(p.dims.tgt_vocab));
    }
  }
  Var x = t::embed(p.tgt_embed, prev);
  Lstm next = lstm_cell(t::concat({x, context, h}), c, p.dec_w, p.dec_b, p.dims.hidden);
  Var logits = t::add(t::matmul(next.h, p.out_w), p.out_b);
  return {t::log_softmax(logits), next.h, next.c};
}

TokenSeq with_eos(const TokenSeq& y) {
  TokenSeq out = y;
  if (out.empty() || out.back() != kEos) out.push_back(kEos);
  return out;
}

Var sequence_log_probs(const BoundParams& p, const EncodedBatch& enc, std::span<const TokenSeq> replies) {
  if (replies.size() != enc.rows) {
    throw ShapeError("sequence_log_probs: " + std::to_string(replies.size()) + " replies for " +
                     std::to_string(enc.rows) + " encoded rows");
  }
  Tape& tape = *p.tgt_embed.tape();
  std::vector<TokenSeq> targets;
  targets.reserve(replies.size());
  std::size_t longest = 0;
  for (const auto& y : replies) {
    if (y.empty()) throw InvalidArgument("sequence_log_prob: empty reply");
    TokenSeq ty = with_eos(y);
    if (ty.size() - 1 > p.dims.max_reply_len) {
      throw InvalidArgument("sequence_log_prob: reply of " + std::to_string(ty.size() - 1) +
                            " tokens exceeds limit " + std::to_string(p.dims.max_reply_len));
    }
    check_ids(ty, p.dims.tgt_vocab, "reply");
    longest = std::max(longest, ty.size());
    targets.push_back(std::move(ty));
  }

  const std::size_t rows = enc.rows;
  Var h = enc.h, c = enc.c, total;
  for (std::size_t pos = 0; pos < longest; ++pos) {
    std::vector<TokenId> prev(rows), gold(rows);
    std::vector<double> keep(rows);
    bool all_real = true;
    for (std::size_t r = 0; r < rows; ++r) {
      const bool real = pos < targets[r].size();
      prev[r] = pos == 0 ? kBos : (real ? targets[r][pos - 1] : kPad);
      gold[r] = real ? targets[r][pos] : kPad;
      keep[r] = real ? 1.0 : 0.0;
      all_real = all_real && real;
    }
    AttentionOut att = attend(p, enc, h);
    StepOut out = decoder_step(p, prev, h, c, att.context);
    Var lp = t::pick(out.log_probs, std::move(gold));
    if (!all_real) {
      Tensor m = Tensor::matrix(rows, 1);
      for (std::size_t r = 0; r < rows; ++r) m[r] = keep[r];
      lp = t::mul(lp, tape.constant(std::move(m)));
    }
    total = pos == 0 ? lp : t::add(total, lp);
    h = out.h;
    c = out.c;
  }
  return total;
}

Encoding encode(const TokenSeq& query, const ModelParams& params) {
  Tape tape;
  BoundParams p = bind_frozen(tape, params);
  const TokenSeq batch[] = {query};
  EncodedBatch enc = encode_batch(p, batch);
  Encoding out;
  for (const Var& a : enc.annotations) out.annotations.push_back(row_values(a.value()));
  out.initial.h = row_values(enc.h.value());
  out.initial.c = row_values(enc.c.value());
  return out;
}

Attention attention_context(const DecoderState& state, const Encoding& encoding, const ModelParams& params) {
  if (encoding.annotations.empty()) throw InvalidArgument("attention: no annotations");
  Tape tape;
  BoundParams p = bind_frozen(tape, params);
  EncodedBatch enc;
  enc.rows = 1;
  for (const auto& a : encoding.annotations) {
    if (a.size() != params.dims.hidden) throw ShapeError("attention: annotation length differs from hidden size");
    Var v = tape.constant(row_tensor(a));
    enc.annotations.push_back(v);
    enc.projected.push_back(t::matmul(v, p.att_u));
  }
  enc.score_mask = tape.constant(Tensor::matrix(1, encoding.annotations.size()));
  AttentionOut out = attend(p, enc, tape.constant(row_tensor(state.h)));
  return {row_values(out.context.value()), row_values(out.weights.value())};
}

StepResult decode_step(TokenId prev, const DecoderState& state, std::span<const double> context,
                       const ModelParams& params) {
  const std::size_t hidden = params.dims.hidden;
  if (state.h.size() != hidden || state.c.size() != hidden || context.size() != hidden) {
    throw ShapeError("decode_step: state/context length differs from hidden size " + std::to_string(hidden));
  }
  Tape tape;
  BoundParams p = bind_frozen(tape, params);
  StepOut out = decoder_step(p, {prev}, tape.constant(row_tensor(state.h)), tape.constant(row_tensor(state.c)),
                             tape.constant(row_tensor(context)));
  StepResult r;
  r.log_probs = row_values(out.log_probs.value());
  r.next.h = row_values(out.h.value());
  r.next.c = row_values(out.c.value());
  r.next.step = state.step + 1;
  return r;
}

double sequence_log_prob(const TokenSeq& query, const TokenSeq& reply, const ModelParams& params) {
  Tape tape;
  BoundParams p = bind_frozen(tape, params);
  const TokenSeq qs[] = {query};
  const TokenSeq rs[] = {reply};
  EncodedBatch enc = encode_batch(p, qs);
  return sequence_log_probs(p, enc, rs).item();
}

}  // namespace nrg::model
