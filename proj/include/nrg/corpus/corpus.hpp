#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nrg/corpus/vocab.hpp"
#include "nrg/model/params.hpp"
#include "nrg/tokens.hpp"

namespace nrg::corpus {

struct TextPair {
  Words query;
  Words reply;
};

struct ReadOptions {
  std::size_t max_query_len = 30;
  std::size_t max_reply_len = 50;
};

struct TextCorpus {
  std::vector<TextPair> pairs;
  std::size_t dropped_too_long = 0;
  std::vector<std::size_t> malformed_lines;  // 1-based
};

// Query TAB response per line, whitespace-tokenized. Blank lines and lines
// starting with '#' are ignored; lines without exactly one TAB or with an
// empty side are skipped and their numbers recorded.
TextCorpus parse_pairs(std::string_view text, const ReadOptions& options = {});
TextCorpus read_pairs(const std::filesystem::path& path, const ReadOptions& options = {});

struct Encoded {
  std::vector<Pair> pairs;
  double oov_query = 0.0;  // share of query tokens mapped to UNK
  double oov_reply = 0.0;
};

Encoded encode_pairs(std::span<const TextPair> pairs, const Vocab& vocab);

struct IngestResult {
  TextCorpus text;
  Vocab vocab;
  Encoded encoded;
};

// Reads pairs, builds a vocabulary from both sides keeping the `vocab_limit`
// most frequent words (0 keeps all) and maps the rest to UNK.
// Throws InvalidArgument when no pair survives.
IngestResult ingest(const std::filesystem::path& path, std::size_t vocab_limit, const ReadOptions& options = {});
IngestResult ingest_text(std::string_view text, std::size_t vocab_limit, const ReadOptions& options = {});

struct ZipfFit {
  double C = 0.0;
  double alpha = 0.0;
  double residual = 0.0;  // RMS of log-space residuals
  bool degenerate = false;  // all frequencies equal
  std::size_t ranks = 0;
};

// Least-squares fit of log p(w_i) = log C - alpha log i with
// p(w_i) = frequency_i / total (total <= 0 means the sum of frequencies).
// Frequencies are ranked in descending order; only the first `max_ranks`
// enter the fit (0 uses all). Needs at least 10 distinct entries.
ZipfFit zipf_fit(std::span<const double> frequencies, double total = 0.0, std::size_t max_ranks = 0);

struct TopTMass {
  double bound = 0.0;      // C ln(t + 1)
  double empirical = 0.0;  // sum of the t largest probabilities
};

// Empirical mass of the exact distribution C / i^alpha.
TopTMass topt_mass(std::size_t t, double C, double alpha);
// Empirical mass of observed frequencies normalized by their sum.
TopTMass topt_mass(std::size_t t, double C, std::span<const double> frequencies);

struct CorpusStats {
  std::size_t pairs = 0;
  std::size_t unique_queries = 0;
  std::size_t unique_replies = 0;
  double share_one = 0.0;  // queries with exactly one reply
  double share_two = 0.0;
  double share_more = 0.0;
  double mean_replies_per_query = 0.0;
  double mean_response_frequency = 0.0;  // pairs / unique replies
  double oov_query = 0.0;
  double oov_reply = 0.0;
  std::size_t vocab_size = 0;  // content words
  std::optional<ZipfFit> zipf;
};

// Groups queries and replies by exact token match. OOV rates, vocabulary
// size and the Zipf fit are filled in when a vocabulary is given.
CorpusStats corpus_stats(std::span<const Pair> pairs, const Vocab* vocab = nullptr, const Encoded* encoded = nullptr);

struct UniversalReply {
  TokenSeq reply;
  std::size_t distinct_queries = 0;  // M
  std::size_t occurrences = 0;
  double query_share = 0.0;  // M / N, N = distinct queries in the corpus
};

// A reply is flagged iff every token is a content word of rank <= t and
// M / N >= min_query_share. Requires t <= content vocabulary / 10.
// Sorted by M descending, then tokens.
std::vector<UniversalReply> detect_universal_replies(std::span<const Pair> pairs, const Vocab& vocab, std::size_t t,
                                                     double min_query_share);

struct MeanWordFrequency {
  double mean = 0.0;   // tokens / distinct tokens over the replies
  double ratio = 0.0;  // mean / K
  std::size_t tokens = 0;
  std::size_t types = 0;
  std::size_t replies = 0;
};

MeanWordFrequency mean_word_frequency(std::span<const TokenSeq> replies);
MeanWordFrequency mean_word_frequency(std::span<const Words> replies);

struct JensenCheck {
  double lhs = 0.0;  // sum of log p(w|x) over the union of reply words
  double rhs = 0.0;  // log of the sum of p(w|x)
  std::size_t union_size = 0;
};

// p(w|x) is the mean over all teacher-forced decode positions of all replies
// (EOS step included) of the model's probability of w.
JensenCheck jensen_bound_check(const model::ModelParams& params, const TokenSeq& query,
                               std::span<const TokenSeq> replies);

struct AnalysisOptions {
  std::size_t t = 0;  // 0: content vocabulary / 100, at least 1
  double min_query_share = 0.005;
};

// Table-style corpus summary plus Zipf fit and flagged universal replies.
std::string analysis_report(const IngestResult& corpus, const AnalysisOptions& options);

}  // namespace nrg::corpus
