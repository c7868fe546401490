#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nrg/corpus/corpus.hpp"
#include "nrg/corpus/synth.hpp"
#include "nrg/error.hpp"

namespace {

using namespace nrg;
using namespace nrg::corpus;

TEST(Vocab, FrequencyOrderAndSpecials) {
  Vocab v = Vocab::build({{"b", "a", "a"}, {"c", "a", "b"}});
  ASSERT_EQ(v.size(), 7u);
  EXPECT_EQ(v.word(4), "a");
  EXPECT_EQ(v.word(5), "b");
  EXPECT_EQ(v.word(6), "c");
  EXPECT_EQ(v.rank(4), 1u);
  EXPECT_EQ(v.frequency(4), 3u);
  EXPECT_EQ(v.id("zzz"), kUnk);
  EXPECT_EQ(v.join({4, 6}), "a c");
  EXPECT_EQ(Vocab::deserialize(v.serialize()), v);
  EXPECT_THROW(Vocab::deserialize("a\tx\n"), FormatError);
}

TEST(Ingest, BasicPair) {
  auto r = ingest_text("hello there\thi\n", 0);
  ASSERT_EQ(r.text.pairs.size(), 1u);
  EXPECT_EQ(r.text.pairs[0].query, (Words{"hello", "there"}));
  EXPECT_EQ(r.text.pairs[0].reply, (Words{"hi"}));
  EXPECT_EQ(r.vocab.join(r.encoded.pairs[0].query), "hello there");
}

TEST(Ingest, VocabLimitMapsToUnk) {
  auto r = ingest_text("a a\ta b\nq\ta\n", 1);
  ASSERT_EQ(r.vocab.content_size(), 1u);
  EXPECT_EQ(r.vocab.word(4), "a");
  EXPECT_EQ(r.encoded.pairs[0].reply, (TokenSeq{4, kUnk}));
  // Reply side: tokens a b a, one UNK. Query side: a a q, one UNK.
  EXPECT_DOUBLE_EQ(r.encoded.oov_reply, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.encoded.oov_query, 1.0 / 3.0);
}

TEST(Ingest, LengthLimitsAndMalformedLines) {
  std::string long_query;
  for (int i = 0; i < 31; ++i) long_query += "w ";
  const std::string text = "# header\n" + long_query + "\tok\n" + "x\ty\n" + "no tab here\n" + "a\tb\tc\n\n" + "\tempty\n";
  auto r = ingest_text(text, 0);
  EXPECT_EQ(r.text.dropped_too_long, 1u);
  EXPECT_EQ(r.text.pairs.size(), 1u);
  EXPECT_EQ(r.text.malformed_lines, (std::vector<std::size_t>{4, 5, 7}));
  std::string thirty;
  for (int i = 0; i < 30; ++i) thirty += "w ";
  EXPECT_EQ(ingest_text(thirty + "\tok\n", 0).text.dropped_too_long, 0u);
  EXPECT_THROW(ingest_text("# only a comment\n", 0), InvalidArgument);
}

TEST(CorpusStats, MultiReplyShares) {
  const std::vector<Pair> pairs{{{4}, {5}}, {{6}, {5}}, {{6}, {7}}, {{8}, {5}}, {{8}, {7}}, {{8}, {9}}};
  auto s = corpus_stats(pairs);
  EXPECT_DOUBLE_EQ(s.share_one, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.share_two, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.share_more, 1.0 / 3.0);
  EXPECT_NEAR(s.share_one + s.share_two + s.share_more, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(s.mean_replies_per_query, 2.0);
  EXPECT_EQ(s.unique_replies, 3u);
}

TEST(CorpusStats, UniqueQueriesAndDuplicates) {
  const std::vector<Pair> unique{{{4}, {5}}, {{6}, {5}}, {{7}, {8}}};
  auto s = corpus_stats(unique);
  EXPECT_EQ(s.share_one, 1.0);
  EXPECT_EQ(s.share_two, 0.0);
  const std::vector<Pair> dup(5, Pair{{4, 5}, {6}});
  auto d = corpus_stats(dup);
  EXPECT_EQ(d.unique_replies, 1u);
  EXPECT_DOUBLE_EQ(d.mean_response_frequency, 5.0);
  EXPECT_LE(d.unique_replies, d.pairs);
}

TEST(Zipf, ExactInputs) {
  std::vector<double> p, q, flat(20, 3.0);
  for (int i = 1; i <= 50; ++i) {
    p.push_back(0.1 / i);
    q.push_back(1.0 / (static_cast<double>(i) * i));
  }
  auto f = zipf_fit(p, 1.0);
  EXPECT_NEAR(f.C, 0.1, 1e-6);
  EXPECT_NEAR(f.alpha, 1.0, 1e-6);
  EXPECT_LT(f.residual, 1e-9);
  EXPECT_NEAR(zipf_fit(q).alpha, 2.0, 1e-6);
  auto u = zipf_fit(flat);
  EXPECT_EQ(u.alpha, 0.0);
  EXPECT_TRUE(u.degenerate);
  EXPECT_THROW(zipf_fit(std::vector<double>(9, 1.0)), InvalidArgument);
}

TEST(TopT, PublishedValues) {
  EXPECT_NEAR(topt_mass(500, 0.1, 1.0).bound, 0.6215, 1e-3);
  EXPECT_NEAR(topt_mass(1000, 0.1, 1.0).bound, 0.6909, 1e-3);
  for (std::size_t t : {1, 2, 5, 50, 500, 5000}) {
    auto m = topt_mass(t, 0.1, 1.0);
    EXPECT_GE(m.empirical, m.bound) << t;
  }
  std::vector<double> counts;
  for (int i = 1; i <= 2000; ++i) counts.push_back(0.1 / i);
  for (std::size_t t : {1, 10, 100, 1000}) {
    auto m = topt_mass(t, 0.1, counts);
    EXPECT_GE(m.empirical, m.bound) << t;
  }
  EXPECT_THROW(topt_mass(0, 0.1, 1.0), InvalidArgument);
}

// 1000 content words; the first 100 ranks have distinct counts above the rest.
std::vector<Pair> ranked_corpus(Vocab& vocab, std::size_t queries) {
  std::vector<Words> sentences;
  for (int r = 1; r <= 1000; ++r) {
    const int copies = r <= 100 ? 200 - r : 1;
    for (int c = 0; c < copies; ++c) sentences.push_back({"w" + std::to_string(r)});
  }
  vocab = Vocab::build(sentences);
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < queries; ++i) {
    pairs.push_back({{vocab.id("w" + std::to_string(100 + i % 900)), vocab.id("w" + std::to_string(1 + i % 7))},
                     {vocab.id("w" + std::to_string(51 + i % 900))}});
  }
  return pairs;
}

TEST(Universal, PlantedReplyFlagged) {
  Vocab v;
  auto pairs = ranked_corpus(v, 900);
  const TokenSeq idk{v.id("w1"), v.id("w2"), v.id("w3")};
  for (std::size_t i = 0; i < 300; ++i) pairs[i].reply = idk;
  auto flagged = detect_universal_replies(pairs, v, 50, 0.01);
  ASSERT_EQ(flagged.size(), 1u);
  EXPECT_EQ(flagged[0].reply, idk);
  EXPECT_NEAR(flagged[0].query_share, 300.0 / 900.0, 1e-12);
  EXPECT_THROW(detect_universal_replies(pairs, v, 101, 0.01), InvalidArgument);
}

TEST(Universal, RankBoundaryAndSingleton) {
  Vocab v;
  auto pairs = ranked_corpus(v, 900);
  const TokenSeq edge{v.id("w1"), v.id("w51")};
  for (std::size_t i = 0; i < 300; ++i) pairs[i].reply = edge;
  EXPECT_TRUE(detect_universal_replies(pairs, v, 50, 0.01).empty());
  EXPECT_EQ(detect_universal_replies(pairs, v, 51, 0.01).size(), 1u);

  // One query out of 10^4: share 1e-4 is below the threshold.
  std::vector<Pair> big;
  for (std::size_t i = 0; i < 10000; ++i) big.push_back({{static_cast<TokenId>(4 + i % 1000), static_cast<TokenId>(4 + i / 1000)}, {500}});
  big[0].reply = {v.id("w1"), v.id("w2")};
  EXPECT_TRUE(detect_universal_replies(big, v, 50, 0.001).empty());
}

TEST(Universal, FlagMonotonicity) {
  auto r = ingest_text(to_tsv(synth_corpus({.queries = 600, .vocab = 300, .planted = default_planted_replies(0.3)}, 3)), 0);
  const auto& pairs = r.encoded.pairs;
  std::size_t prev = 0;
  for (std::size_t t = 1; t <= r.vocab.content_size() / 10; t += 3) {
    auto f = detect_universal_replies(pairs, r.vocab, t, 0.005);
    EXPECT_GE(f.size(), prev);
    prev = f.size();
  }
  std::size_t last = SIZE_MAX;
  for (double s : {0.0, 0.005, 0.02, 0.05, 0.2}) {
    auto f = detect_universal_replies(pairs, r.vocab, 10, s);
    EXPECT_LE(f.size(), last);
    last = f.size();
  }
}

TEST(MeanWordFrequency, TableOneReplies) {
  const char* replies[] = {
      "I love this film so much.",
      "Me too, it is a beautiful film.",
      "This movie has beautiful background art.",
      "Fritz is really a good director, I like his film.",
      "Is \"Metropolis\" based on a book?",
      "Brigitte cooling off on the set of Metropolis.",
  };
  std::vector<Words> ws;
  for (const char* r : replies) ws.push_back(normalize_words(r));
  auto m = mean_word_frequency(ws);
  EXPECT_EQ(m.tokens, 43u);
  EXPECT_NEAR(m.mean, 1.32, 0.05);
  EXPECT_DOUBLE_EQ(m.ratio, m.mean / 6.0);
}

TEST(MeanWordFrequency, SmallCases) {
  const std::vector<TokenSeq> one{{4, 5, 6}};
  EXPECT_EQ(mean_word_frequency(one).mean, 1.0);
  const std::vector<TokenSeq> rep{{4, 5, 4}};
  EXPECT_DOUBLE_EQ(mean_word_frequency(rep).mean, 1.5);
  const std::vector<TokenSeq> twice{{4, 5, 6, 7}, {4, 5, 6, 7}};
  EXPECT_DOUBLE_EQ(mean_word_frequency(twice).mean, 2.0);
  EXPECT_DOUBLE_EQ(mean_word_frequency(twice).ratio, 1.0);
}

TEST(Jensen, InequalityAndEqualityCase) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    model::ModelDims d;
    d.src_vocab = d.tgt_vocab = 12;
    d.embed = 4;
    d.hidden = 4;
    auto p = model::ModelParams::uniform(d, rng(), 1.0);
    std::uniform_int_distribution<TokenId> tok(4, 11);
    std::vector<TokenSeq> ys(1 + trial % 4);
    for (auto& y : ys) y = {tok(rng), tok(rng)};
    auto j = jensen_bound_check(p, {tok(rng), tok(rng)}, ys);
    EXPECT_LE(j.lhs, j.rhs);
    const std::vector<TokenSeq> single{{7, 7}};
    auto e = jensen_bound_check(p, {4}, single);
    EXPECT_EQ(e.union_size, 1u);
    EXPECT_NEAR(e.lhs, e.rhs, 1e-9);
  }
}

TEST(Synth, ReproducibleAndPlantedShare) {
  SynthSpec spec{.queries = 2000, .vocab = 300, .planted = default_planted_replies(0.5)};
  auto a = synth_corpus(spec, 7);
  auto b = synth_corpus(spec, 7);
  EXPECT_EQ(to_tsv(a), to_tsv(b));
  EXPECT_NE(to_tsv(a), to_tsv(synth_corpus(spec, 8)));
  auto r = ingest_text(to_tsv(a), 0);
  auto flagged = detect_universal_replies(r.encoded.pairs, r.vocab, 10, 0.005);
  double share = 0.0;
  std::size_t planted_found = 0;
  for (const auto& u : flagged) {
    auto words = r.vocab.decode(u.reply);
    for (const auto& p : spec.planted) {
      if (p.words == words) {
        share += u.query_share;
        ++planted_found;
      }
    }
  }
  EXPECT_EQ(planted_found, 5u);
  EXPECT_NEAR(share, 0.5, 0.02);
}

TEST(Synth, ZipfRecovery) {
  SynthSpec spec{.queries = 20000, .vocab = 300, .zipf_alpha = 1.0};
  auto r = ingest_text(to_tsv(synth_corpus(spec, 11)), 0);
  auto s = corpus_stats(r.encoded.pairs, &r.vocab, &r.encoded);
  ASSERT_TRUE(s.zipf.has_value());
  EXPECT_NEAR(s.zipf->alpha, 1.0, 0.1);
}

TEST(Synth, RejectsInfeasible) {
  SynthSpec spec;
  spec.planted = {{{"w1"}, 0.7}, {{"w2"}, 0.4}};
  EXPECT_THROW(synth_corpus(spec, 1), InvalidArgument);
  SynthSpec tiny{.vocab = 5, .topics = 10};
  EXPECT_THROW(synth_corpus(tiny, 1), InvalidArgument);
}

TEST(Report, MirrorsTableRows) {
  auto r = ingest_text(to_tsv(synth_corpus({.queries = 500, .planted = default_planted_replies(0.5)}, 2)), 0);
  const std::string rep = analysis_report(r, {.t = 10});
  for (const char* key : {"QA Pairs: 500", "Unique Replies:", "Multi Replies %:", "OOV %:", "Vocab Size:", "Zipf C:",
                          "Zipf alpha:", "M/N="}) {
    EXPECT_NE(rep.find(key), std::string::npos) << key << "\n" << rep;
  }
}

}  // namespace
