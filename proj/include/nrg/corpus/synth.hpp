#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrg/corpus/corpus.hpp"

namespace nrg::corpus {

struct PlantedReply {
  Words words;
  double share = 0.0;  // fraction of queries answered with this reply
};

// Words are "w1" ... "wV", w_i carrying Zipf weight 1 / i^alpha. Word i
// belongs to topic (i - 1) mod topics; a query picks a topic with the
// topic's total weight and draws its words from that topic only, so query
// words follow the global power law. A repeated query is redrawn. Planted
// replies go to exactly round(share * queries) queries each. Every other
// query gets an informative reply that maps its leading words to their
// partners in the same topic.
struct SynthSpec {
  std::size_t queries = 2000;
  std::size_t vocab = 300;
  std::size_t topics = 10;
  double zipf_alpha = 1.0;
  std::size_t query_min_len = 3;
  std::size_t query_max_len = 8;
  std::size_t reply_min_len = 2;
  std::size_t reply_max_len = 6;
  std::vector<PlantedReply> planted;

  // Throws InvalidArgument when the spec cannot be realized.
  void validate() const;
};

// Five replies over the three top-ranked words, each on `total_share / 5`
// of the queries.
std::vector<PlantedReply> default_planted_replies(double total_share);

std::vector<TextPair> synth_corpus(const SynthSpec& spec, std::uint64_t seed);

// Query TAB reply lines.
std::string to_tsv(const std::vector<TextPair>& pairs);

}  // namespace nrg::corpus
