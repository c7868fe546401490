#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "nrg/error.hpp"
#include "nrg/losses/negatives.hpp"
#include "nrg/losses/ranking.hpp"
#include "nrg/tensor/gradcheck.hpp"

namespace {

using namespace nrg;
using namespace nrg::losses;
using model::ModelDims;
using model::ModelParams;

ModelParams toy_model(std::uint64_t seed, double scale = 0.3) {
  ModelDims d;
  d.src_vocab = d.tgt_vocab = 20;
  d.embed = 8;
  d.hidden = 8;
  return ModelParams::uniform(d, seed, scale);
}

// Short positive, long negatives: log p(y|x) - avg log p(y-|x) is roughly
// +12 under a near-uniform model, so gamma alone selects the branch.
Triplet toy_triplet() {
  return {{4, 5, 6}, {7}, {{8, 9, 10, 11, 12}, {13, 14, 15, 16, 17}, {9, 9, 18, 19, 4}, {5, 6, 7, 8, 9}}};
}

TEST(CrossEntropy, UniformModel) {
  ModelParams p = toy_model(1);
  p.dims.tgt_vocab = 20;
  p.out_w = tensor::Tensor(p.out_w.shape());
  p.out_b = tensor::Tensor(p.out_b.shape());
  EXPECT_NEAR(cross_entropy_nll({4}, {5, 6}, p), 3.0 * std::log(20.0), 1e-12);
}

TEST(CrossEntropy, SignFlipOfLogProb) {
  ModelParams p = toy_model(2);
  for (TokenSeq y : {TokenSeq{4}, TokenSeq{5, 6, 7}, TokenSeq{8, 8, 8, 8}}) {
    const double ce = cross_entropy_nll({4, 9}, y, p);
    EXPECT_GE(ce, 0.0);
    EXPECT_NEAR(ce, -model::sequence_log_prob({4, 9}, y, p), 1e-12);
  }
}

TEST(CrossEntropy, PerfectModelIsZero) {
  ModelParams p = toy_model(3);
  p.out_w = tensor::Tensor(p.out_w.shape());
  p.out_b = tensor::Tensor(p.out_b.shape());
  p.out_b[kEos] = 1000.0;
  EXPECT_EQ(cross_entropy_nll({4, 5}, {kEos}, p), 0.0);
}

TEST(NegativeSampling, ForcedOutcome) {
  const std::vector<TokenSeq> pool{{4}, {5}, {6}, {7}, {8}};
  std::mt19937_64 rng(1);
  auto negs = sample_negatives(pool, {6}, 4, rng);
  std::sort(negs.begin(), negs.end());
  EXPECT_EQ(negs, (std::vector<TokenSeq>{{4}, {5}, {7}, {8}}));
}

TEST(NegativeSampling, SeededReproducible) {
  std::vector<TokenSeq> pool;
  for (TokenId i = 4; i < 40; ++i) pool.push_back({i, i + 1});
  NegativeSampler sampler(pool, 4);
  auto a = triplet_rng(7, 2, 11);
  auto b = triplet_rng(7, 2, 11);
  EXPECT_EQ(sampler.sample(pool[3], a), sampler.sample(pool[3], b));
  auto c = triplet_rng(7, 2, 12);
  auto d = triplet_rng(7, 2, 11);
  EXPECT_NE(sampler.sample(pool[3], c), sampler.sample(pool[3], d));
}

TEST(NegativeSampling, NeverThePositive) {
  std::vector<TokenSeq> pool{{4}, {4}, {4}, {4}, {5}, {6}, {7}, {8}};
  NegativeSampler sampler(pool, 3);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    auto negs = sampler.sample({4}, rng);
    ASSERT_EQ(negs.size(), 3u);
    for (const auto& n : negs) EXPECT_NE(n, TokenSeq{4});
    std::sort(negs.begin(), negs.end());
    EXPECT_EQ(std::unique(negs.begin(), negs.end()), negs.end());
  }
}

TEST(NegativeSampling, MultisetFrequencyMonteCarlo) {
  // Ten distinct replies; one of them occurs five times, so 14 entries.
  std::vector<TokenSeq> pool;
  for (TokenId i = 0; i < 9; ++i) pool.push_back({10 + i});
  for (int i = 0; i < 5; ++i) pool.push_back({99});
  NegativeSampler sampler(pool, 1);
  std::mt19937_64 rng(2024);
  const int draws = 100000;
  int hits = 0;
  for (int i = 0; i < draws; ++i) hits += sampler.sample({5}, rng).front() == TokenSeq{99};
  EXPECT_NEAR(static_cast<double>(hits) / draws, 5.0 / 14.0, 0.01);
}

TEST(NegativeSampling, CorpusTooSmall) {
  const std::vector<TokenSeq> pool{{4}, {5}, {5}, {6}};
  EXPECT_THROW(NegativeSampler(pool, 3), InvalidArgument);
  EXPECT_THROW(NegativeSampler(pool, 0), InvalidArgument);
  EXPECT_NO_THROW(NegativeSampler(pool, 2));
}

TEST(MarginBranch, Boundaries) {
  // 0.25 is exact in binary, so the difference equals gamma exactly.
  EXPECT_EQ(margin_branch(-5.0, -5.25, 0.25, HingeMode::kPaperLiteral), MarginBranch::kInactive);
  EXPECT_EQ(margin_branch(-5.0, -6.25, 0.25, HingeMode::kPaperLiteral), MarginBranch::kActive);
  EXPECT_EQ(margin_branch(-5.0, -5.25, 0.25, HingeMode::kStandard), MarginBranch::kInactive);
  EXPECT_EQ(margin_branch(-5.0, -5.125, 0.25, HingeMode::kStandard), MarginBranch::kActive);
}

TEST(MarginTerm, PaperLiteralSubstitution) {
  const double m = margin_term(-2.0, -5.0, 0.18, HingeMode::kPaperLiteral);
  EXPECT_NEAR(m, 2.82, 1e-15);
  EXPECT_NEAR(0.1 * m, 0.282, 1e-15);
  EXPECT_EQ(margin_term(-5.0, -4.9, 0.18, HingeMode::kPaperLiteral), 0.0);
  EXPECT_EQ(margin_branch(-5.0, -4.9, 0.18, HingeMode::kPaperLiteral), MarginBranch::kInactive);
  EXPECT_NEAR(margin_term(-5.0, -4.9, 0.18, HingeMode::kStandard), 0.28, 1e-15);
}

TEST(RankingLoss, LambdaZeroIsCrossEntropy) {
  ModelParams p = toy_model(4);
  Triplet tr = toy_triplet();
  for (HingeMode mode : {HingeMode::kPaperLiteral, HingeMode::kStandard}) {
    LossBreakdown b = ranking_loss(tr, p, {.lambda = 0.0, .gamma = 0.18, .mode = mode});
    EXPECT_EQ(b.total, b.ce);
    EXPECT_FALSE(b.margin_active);
    EXPECT_EQ(b.margin_term, 0.0);
    EXPECT_EQ(b.ce, cross_entropy_nll(tr.query, tr.positive, p));
  }
}

TEST(RankingLoss, BreakdownConsistent) {
  ModelParams p = toy_model(5);
  Triplet tr = toy_triplet();
  for (HingeMode mode : {HingeMode::kPaperLiteral, HingeMode::kStandard}) {
    for (double gamma : {0.0, 0.18, 5.0, 20.0}) {
      RankingConfig cfg{.lambda = 0.1, .gamma = gamma, .mode = mode};
      LossBreakdown b = ranking_loss(tr, p, cfg);
      double neg_sum = 0.0;
      for (const auto& n : tr.negatives) neg_sum += model::sequence_log_prob(tr.query, n, p);
      EXPECT_NEAR(b.neg_logprob_avg, neg_sum / 4.0, 1e-12);
      EXPECT_NEAR(b.pos_logprob, -b.ce, 0.0);
      EXPECT_GE(b.margin_term, 0.0);
      EXPECT_EQ(b.margin_term, margin_term(b.pos_logprob, b.neg_logprob_avg, gamma, mode));
      EXPECT_EQ(b.margin_active, margin_branch(b.pos_logprob, b.neg_logprob_avg, gamma, mode) == MarginBranch::kActive);
      EXPECT_EQ(b.total, b.ce + 0.1 * b.margin_term);
      if (mode == HingeMode::kStandard) {
        EXPECT_GE(b.total, b.ce);
      }
    }
  }
}

TEST(RankingLoss, NegativeOrderIrrelevant) {
  ModelParams p = toy_model(6);
  Triplet tr = toy_triplet();
  RankingConfig cfg{.lambda = 0.1, .gamma = 0.18, .mode = HingeMode::kStandard};
  LossBreakdown base = ranking_loss(tr, p, cfg);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 10; ++i) {
    std::shuffle(tr.negatives.begin(), tr.negatives.end(), rng);
    LossBreakdown b = ranking_loss(tr, p, cfg);
    EXPECT_EQ(b.neg_logprob_avg, base.neg_logprob_avg);
    EXPECT_EQ(b.total, base.total);
  }
}

TEST(RankingLoss, RejectsBadInput) {
  ModelParams p = toy_model(7);
  Triplet tr = toy_triplet();
  tr.negatives.push_back(tr.positive);
  EXPECT_THROW(ranking_loss(tr, p, {}), InvalidArgument);
  tr.negatives.clear();
  EXPECT_THROW(ranking_loss(tr, p, {}), InvalidArgument);
  EXPECT_NO_THROW(ranking_loss(tr, p, {.lambda = 0.0}));
  EXPECT_THROW(ranking_loss(toy_triplet(), p, {.lambda = -1.0}), InvalidArgument);
  EXPECT_THROW(ranking_loss(toy_triplet(), p, {.gamma = NAN}), InvalidArgument);
}

TEST(RankingLoss, NonFiniteNamesSubterm) {
  ModelParams p = toy_model(8);
  p.out_b[5] = INFINITY;
  try {
    ranking_loss(toy_triplet(), p, {});
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("positive log-probability"), std::string::npos) << e.what();
  }
}

TEST(RankingLoss, PerTokenMarginOption) {
  ModelParams p = toy_model(9);
  Triplet tr = toy_triplet();
  LossBreakdown b = ranking_loss(tr, p, {.lambda = 0.1, .gamma = 0.0, .per_token_margin = true});
  EXPECT_NEAR(b.pos_logprob, -b.ce / 2.0, 1e-12);
  EXPECT_NEAR(b.total, b.ce + 0.1 * b.margin_term, 1e-15);
}

// Gradient of the objective w.r.t. every model tensor, flattened.
std::vector<double> objective_grad(ModelParams& p, const std::vector<Triplet>& batch, const RankingConfig& cfg) {
  p.zero_grad();
  tensor::Tape tape;
  auto bound = model::bind_trainable(tape, p);
  tape.backward(ranking_loss_batch(bound, batch, cfg).objective);
  std::vector<double> g;
  for (auto& slot : p.named()) g.insert(g.end(), slot.tensor->grad().begin(), slot.tensor->grad().end());
  return g;
}

// Gradient of mean -log p(reply|query) over the given pairs.
std::vector<double> nll_grad(ModelParams& p, const TokenSeq& query, const std::vector<TokenSeq>& replies) {
  std::vector<Triplet> batch;
  for (const auto& r : replies) batch.push_back({query, r, {}});
  return objective_grad(p, batch, {.lambda = 0.0});
}

struct BranchCase {
  HingeMode mode;
  double gamma;
  bool active;
};

class BranchGradient : public ::testing::TestWithParam<BranchCase> {};

TEST_P(BranchGradient, MatchesFiniteDifferencesAndBranchRule) {
  const BranchCase bc = GetParam();
  ModelParams p = toy_model(10);
  const std::vector<Triplet> batch{toy_triplet()};
  const double lambda = 0.1;
  RankingConfig cfg{.lambda = lambda, .gamma = bc.gamma, .mode = bc.mode};
  LossBreakdown b = ranking_loss(batch[0], p, cfg);
  ASSERT_EQ(b.margin_active, bc.active) << "pos " << b.pos_logprob << " neg " << b.neg_logprob_avg;

  auto report = tensor::gradient_check(
      [&](tensor::Tape& tape) {
        auto bound = model::bind_trainable(tape, p);
        return ranking_loss_batch(bound, batch, cfg).objective;
      },
      p.named(), {.step = 1e-6, .tolerance = 1e-4});
  for (const auto& pc : report.params) EXPECT_LE(pc.max_rel_error, 1e-4) << pc.name;

  // Inactive: the CE gradient alone. Active: CE gradient plus
  // lambda * (grad log p(y|x) - grad avg log p(y-|x)) with the mode's sign.
  const auto total = objective_grad(p, batch, cfg);
  const auto g_pos = nll_grad(p, batch[0].query, {batch[0].positive});
  const auto g_neg = nll_grad(p, batch[0].query, batch[0].negatives);
  const double sign = bc.mode == HingeMode::kPaperLiteral ? 1.0 : -1.0;
  for (std::size_t i = 0; i < total.size(); ++i) {
    const double want =
        bc.active ? g_pos[i] + sign * lambda * (-g_pos[i] + g_neg[i]) : g_pos[i];
    EXPECT_NEAR(total[i], want, 1e-12 * (1.0 + std::abs(want))) << i;
  }
}

INSTANTIATE_TEST_SUITE_P(
    Branches, BranchGradient,
    ::testing::Values(BranchCase{HingeMode::kPaperLiteral, 0.18, true}, BranchCase{HingeMode::kPaperLiteral, 40.0, false},
                      BranchCase{HingeMode::kStandard, 40.0, true}, BranchCase{HingeMode::kStandard, 0.18, false}));

}  // namespace
