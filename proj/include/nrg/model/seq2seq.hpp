#pragma once

#include <span>
#include <vector>

#include "nrg/model/params.hpp"
#include "nrg/tensor/tape.hpp"
#include "nrg/tokens.hpp"

namespace nrg::model {

using tensor::Tape;
using tensor::Var;

// Model weights attached to one tape.
struct BoundParams {
  ModelDims dims;
  Var src_embed, tgt_embed, enc_w, enc_b, dec_w, dec_b, att_w, att_u, att_v, out_w, out_b;
};

// Gradients flow back into `params` on backward().
BoundParams bind_trainable(Tape& tape, ModelParams& params);
// Read-only view; no gradients are collected.
BoundParams bind_frozen(Tape& tape, const ModelParams& params);

// Encoder output for a batch of queries, padded to the longest one.
struct EncodedBatch {
  std::vector<Var> annotations;  // one rows x H per source position
  std::vector<Var> projected;    // annotations * att_u, precomputed for attention
  Var score_mask;                // rows x T: 0 for real tokens, large negative for padding
  Var h, c;                      // encoder state after each row's last real token
  std::size_t rows = 0;
};

// Throws InvalidArgument on an empty query, a query longer than
// dims.max_query_len, or an out-of-range id.
EncodedBatch encode_batch(const BoundParams& p, std::span<const TokenSeq> queries);

// Replicates encoder rows; row i of the result is row `source_rows[i]`.
EncodedBatch select_rows(const EncodedBatch& enc, const std::vector<std::size_t>& source_rows);

struct AttentionOut {
  Var context;  // rows x H
  Var weights;  // rows x T
};

// Additive attention scored against the previous decoder hidden state.
AttentionOut attend(const BoundParams& p, const EncodedBatch& enc, Var h);

struct StepOut {
  Var log_probs;  // rows x V_tgt
  Var h, c;
};

StepOut decoder_step(const BoundParams& p, const std::vector<TokenId>& prev, Var h, Var c, Var context);

// Decoder input: y with EOS appended unless it already ends with EOS.
TokenSeq with_eos(const TokenSeq& y);

// Teacher-forced log p(y_r | x_r) for every row, rows x 1, EOS included.
// `enc` must have one row per reply. Positions past a reply's end are masked.
Var sequence_log_probs(const BoundParams& p, const EncodedBatch& enc, std::span<const TokenSeq> replies);

// ---- Single-sequence interface over plain vectors ---------------------------

struct DecoderState {
  std::vector<double> h;
  std::vector<double> c;
  std::size_t step = 0;
};

struct Encoding {
  std::vector<std::vector<double>> annotations;
  DecoderState initial;
};

struct Attention {
  std::vector<double> context;
  std::vector<double> weights;
};

struct StepResult {
  std::vector<double> log_probs;
  DecoderState next;
};

Encoding encode(const TokenSeq& query, const ModelParams& params);
Attention attention_context(const DecoderState& state, const Encoding& enc, const ModelParams& params);
// Throws InvalidArgument if prev is not a valid target id.
StepResult decode_step(TokenId prev, const DecoderState& state, std::span<const double> context,
                       const ModelParams& params);

// log p(y | x); y must be non-empty. Always <= 0.
double sequence_log_prob(const TokenSeq& query, const TokenSeq& reply, const ModelParams& params);

}  // namespace nrg::model
