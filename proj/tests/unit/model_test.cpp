#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nrg/error.hpp"
#include "nrg/model/checkpoint.hpp"
#include "nrg/model/seq2seq.hpp"

namespace {

using namespace nrg;
using namespace nrg::model;

ModelDims small_dims(std::size_t vocab = 12) {
  ModelDims d;
  d.src_vocab = vocab;
  d.tgt_vocab = vocab;
  d.embed = 5;
  d.hidden = 6;
  return d;
}

TokenSeq random_seq(std::mt19937_64& rng, std::size_t len, std::size_t vocab) {
  std::uniform_int_distribution<TokenId> id(kNumSpecial, vocab - 1);
  TokenSeq s(len);
  for (auto& v : s) v = id(rng);
  return s;
}

TEST(Params, ShapesFromDims) {
  ModelDims d = small_dims();
  ModelParams p = ModelParams::uniform(d, 1);
  auto shapes = param_shapes(d);
  auto named = p.named();
  ASSERT_EQ(shapes.size(), named.size());
  for (std::size_t i = 0; i < named.size(); ++i) {
    EXPECT_EQ(named[i].name, shapes[i].first);
    EXPECT_EQ(named[i].tensor->shape(), shapes[i].second);
    for (double v : named[i].tensor->values()) {
      EXPECT_LE(std::abs(v), 0.08);
    }
  }
  EXPECT_TRUE(ModelParams::uniform(d, 1).same_values(p));
  EXPECT_FALSE(ModelParams::uniform(d, 2).same_values(p));
}

TEST(Encode, OneAnnotationPerToken) {
  ModelParams p = ModelParams::uniform(small_dims(), 3);
  Encoding enc = encode({4, 5, 6, 7, 8}, p);
  ASSERT_EQ(enc.annotations.size(), 5u);
  for (const auto& a : enc.annotations) EXPECT_EQ(a.size(), 6u);
  EXPECT_EQ(enc.initial.h, enc.annotations.back());
}

TEST(Encode, ZeroParamsGiveEqualAnnotations) {
  ModelParams p = ModelParams::zeros(small_dims());
  Encoding enc = encode({4, 9, 5}, p);
  for (const auto& a : enc.annotations) EXPECT_EQ(a, enc.annotations.front());
}

TEST(Encode, DeterministicAcrossRuns) {
  const TokenSeq x{4, 7, 7, 10};
  Encoding a = encode(x, ModelParams::uniform(small_dims(), 42));
  Encoding b = encode(x, ModelParams::uniform(small_dims(), 42));
  EXPECT_EQ(a.annotations, b.annotations);
}

TEST(Encode, RejectsBadInput) {
  ModelParams p = ModelParams::uniform(small_dims(), 3);
  EXPECT_THROW(encode({}, p), InvalidArgument);
  EXPECT_THROW(encode({4, 12}, p), InvalidArgument);
  p.dims.max_query_len = 3;
  EXPECT_THROW(encode({4, 5, 6, 7}, p), InvalidArgument);
}

TEST(Attention, SingleAnnotation) {
  ModelParams p = ModelParams::uniform(small_dims(), 5);
  Encoding enc = encode({6}, p);
  Attention att = attention_context(enc.initial, enc, p);
  ASSERT_EQ(att.weights.size(), 1u);
  EXPECT_DOUBLE_EQ(att.weights[0], 1.0);
  EXPECT_EQ(att.context, enc.annotations[0]);
}

TEST(Attention, IdenticalAnnotationsUniform) {
  ModelParams p = ModelParams::uniform(small_dims(), 5);
  Encoding enc;
  enc.annotations.assign(4, std::vector<double>{0.1, -0.2, 0.3, 0.0, 0.5, -0.4});
  enc.initial.h.assign(6, 0.2);
  enc.initial.c.assign(6, 0.0);
  Attention att = attention_context(enc.initial, enc, p);
  for (double w : att.weights) EXPECT_NEAR(w, 0.25, 1e-15);
}

TEST(Attention, HandBuiltScores) {
  // score_j = v . tanh(W h + U a_j) with W = 0, U = I, v = (2 ln 3, 0, ...):
  // a_1[0] = 0 gives 0; a_2[0] = atanh(0.5) gives ln 3.
  ModelParams p = ModelParams::zeros(small_dims());
  for (std::size_t i = 0; i < 6; ++i) p.att_u.at(i, i) = 1.0;
  p.att_v[0] = 2.0 * std::log(3.0);
  Encoding enc;
  enc.annotations = {std::vector<double>(6, 0.0), std::vector<double>(6, 0.0)};
  enc.annotations[1][0] = std::atanh(0.5);
  enc.initial.h.assign(6, 0.3);
  enc.initial.c.assign(6, 0.0);
  Attention att = attention_context(enc.initial, enc, p);
  EXPECT_NEAR(att.weights[0], 0.25, 1e-12);
  EXPECT_NEAR(att.weights[1], 0.75, 1e-12);
  double total = 0.0;
  for (double w : att.weights) total += w;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(DecodeStep, Normalized) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    ModelParams p = ModelParams::uniform(small_dims(), rng(), 1.0);
    Encoding enc = encode(random_seq(rng, 4, 12), p);
    Attention att = attention_context(enc.initial, enc, p);
    StepResult r = decode_step(kBos, enc.initial, att.context, p);
    double total = 0.0;
    for (double lp : r.log_probs) total += std::exp(lp);
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_EQ(r.next.step, 1u);
  }
}

TEST(DecodeStep, ZeroProjectionUniform) {
  ModelParams p = ModelParams::uniform(small_dims(), 9);
  p.out_w = Tensor(p.out_w.shape());
  p.out_b = Tensor(p.out_b.shape());
  Encoding enc = encode({5, 6}, p);
  Attention att = attention_context(enc.initial, enc, p);
  StepResult r = decode_step(kBos, enc.initial, att.context, p);
  for (double lp : r.log_probs) EXPECT_NEAR(lp, -std::log(12.0), 1e-12);
}

TEST(DecodeStep, DeterministicAndValidated) {
  ModelParams p = ModelParams::uniform(small_dims(), 10);
  Encoding enc = encode({5, 6}, p);
  Attention att = attention_context(enc.initial, enc, p);
  StepResult a = decode_step(7, enc.initial, att.context, p);
  StepResult b = decode_step(7, enc.initial, att.context, p);
  EXPECT_EQ(a.log_probs, b.log_probs);
  EXPECT_EQ(a.next.h, b.next.h);
  EXPECT_THROW(decode_step(12, enc.initial, att.context, p), InvalidArgument);
}

TEST(SequenceLogProb, UniformModel) {
  ModelParams p = ModelParams::uniform(small_dims(10), 11);
  p.out_w = Tensor(p.out_w.shape());
  p.out_b = Tensor(p.out_b.shape());
  EXPECT_NEAR(sequence_log_prob({4, 5}, {6, 7}, p), 3.0 * std::log(0.1), 1e-12);
  EXPECT_NEAR(sequence_log_prob({4, 5}, {6, 7, kEos}, p), 3.0 * std::log(0.1), 1e-12);
  EXPECT_THROW(sequence_log_prob({4}, {}, p), InvalidArgument);
}

// Step-wise oracle: walk the single-sequence API and multiply step probabilities.
double stepwise_log_prob(const TokenSeq& x, const TokenSeq& y, const ModelParams& p) {
  Encoding enc = encode(x, p);
  DecoderState state = enc.initial;
  TokenId prev = kBos;
  double total = 0.0;
  for (TokenId gold : with_eos(y)) {
    Attention att = attention_context(state, enc, p);
    StepResult r = decode_step(prev, state, att.context, p);
    total += r.log_probs[gold];
    state = r.next;
    prev = gold;
  }
  return total;
}

TEST(SequenceLogProb, MatchesStepwiseOracleAndNonPositive) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams p = ModelParams::uniform(small_dims(), rng(), 0.5);
    TokenSeq x = random_seq(rng, 1 + rng() % 6, 12);
    TokenSeq y = random_seq(rng, 1 + rng() % 6, 12);
    const double lp = sequence_log_prob(x, y, p);
    EXPECT_LE(lp, 0.0);
    EXPECT_NEAR(lp, stepwise_log_prob(x, y, p), 1e-10);
  }
}

TEST(SequenceLogProb, PaddingInvariant) {
  std::mt19937_64 rng(13);
  ModelParams p = ModelParams::uniform(small_dims(), 77, 0.5);
  std::vector<TokenSeq> xs, ys;
  for (int i = 0; i < 7; ++i) {
    xs.push_back(random_seq(rng, 1 + rng() % 7, 12));
    ys.push_back(random_seq(rng, 1 + rng() % 7, 12));
  }
  Tape tape;
  BoundParams b = bind_frozen(tape, p);
  EncodedBatch enc = encode_batch(b, xs);
  const Tensor& batched = sequence_log_probs(b, enc, ys).value();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_NEAR(batched[i], sequence_log_prob(xs[i], ys[i], p), 1e-10) << i;
  }

  // Replicated rows reproduce the same values.
  EncodedBatch picked = select_rows(enc, {3, 3, 0});
  const TokenSeq sel[] = {ys[3], ys[1], ys[0]};
  const Tensor& again = sequence_log_probs(b, picked, sel).value();
  EXPECT_NEAR(again[0], batched[3], 1e-12);
  EXPECT_NEAR(again[1], sequence_log_prob(xs[3], ys[1], p), 1e-10);
  EXPECT_NEAR(again[2], batched[0], 1e-12);
}

TEST(Checkpoint, RoundTripBitExact) {
  Checkpoint ck;
  ck.params = ModelParams::uniform(small_dims(), 99, 1.0);
  ck.params.dims.max_query_len = 17;
  ck.sections.emplace_back("note", std::string("hello\0world", 11));
  Checkpoint back = decode_checkpoint(encode_checkpoint(ck));
  EXPECT_TRUE(back.params.same_values(ck.params));
  EXPECT_EQ(back.params.dims, ck.params.dims);
  ASSERT_NE(back.section("note"), nullptr);
  EXPECT_EQ(*back.section("note"), *ck.section("note"));
}

TEST(Checkpoint, RejectsCorruption) {
  Checkpoint ck;
  ck.params = ModelParams::uniform(small_dims(), 5);
  const std::string bytes = encode_checkpoint(ck);

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(decode_checkpoint(flipped), FormatError);

  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 9)), FormatError);

  std::string versioned = bytes;
  versioned[8] = 7;
  try {
    decode_checkpoint(versioned);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }

  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), FormatError);
}

}  // namespace
