#include "nrg/corpus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "nrg/error.hpp"

namespace nrg::corpus {

void SynthSpec::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw InvalidArgument("synth: " + what);
  };
  need(queries > 0, "query count must be > 0");
  need(topics > 0 && vocab >= 2 * topics, "need at least two words per topic");
  need(std::isfinite(zipf_alpha) && zipf_alpha >= 0.0, "zipf alpha must be finite and >= 0");
  need(query_min_len >= 1 && query_min_len <= query_max_len, "bad query length range");
  need(reply_min_len >= 1 && reply_min_len <= reply_max_len, "bad reply length range");
  double total = 0.0;
  for (const auto& p : planted) {
    need(!p.words.empty(), "planted reply is empty");
    need(std::isfinite(p.share) && p.share >= 0.0, "planted share must be >= 0");
    total += p.share;
  }
  need(total <= 1.0 + 1e-12, "planted shares sum to more than 1");
}

std::vector<PlantedReply> default_planted_replies(double total_share) {
  const double each = total_share / 5.0;
  return {{{"w1", "w2"}, each},
          {{"w2", "w1", "w3"}, each},
          {{"w1", "w3"}, each},
          {{"w3", "w2"}, each},
          {{"w2", "w3", "w1"}, each}};
}

std::vector<TextPair> synth_corpus(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  auto word = [](std::size_t rank) { return "w" + std::to_string(rank); };

  // Topic members in rank order, with their weights.
  std::vector<std::vector<std::size_t>> members(spec.topics);
  std::vector<std::vector<double>> weights(spec.topics);
  std::vector<double> topic_mass(spec.topics, 0.0);
  for (std::size_t r = 1; r <= spec.vocab; ++r) {
    const std::size_t k = (r - 1) % spec.topics;
    const double w = 1.0 / std::pow(static_cast<double>(r), spec.zipf_alpha);
    members[k].push_back(r);
    weights[k].push_back(w);
    topic_mass[k] += w;
  }
  std::discrete_distribution<std::size_t> pick_topic(topic_mass.begin(), topic_mass.end());
  std::vector<std::discrete_distribution<std::size_t>> pick_word;
  for (const auto& w : weights) pick_word.emplace_back(w.begin(), w.end());

  // Partner of a word: its rank neighbour inside the topic.
  auto partner = [&](std::size_t rank) {
    const std::size_t k = (rank - 1) % spec.topics;
    const std::size_t pos = (rank - 1) / spec.topics;
    std::size_t other = pos ^ 1;
    if (other >= members[k].size()) other = pos;
    return members[k][other];
  };

  std::uniform_int_distribution<std::size_t> qlen(spec.query_min_len, spec.query_max_len);
  std::uniform_int_distribution<std::size_t> rlen(spec.reply_min_len, spec.reply_max_len);
  std::vector<TextPair> out(spec.queries);
  std::vector<std::vector<std::size_t>> query_ranks(spec.queries);
  std::set<std::vector<std::size_t>> seen;
  for (std::size_t i = 0; i < spec.queries; ++i) {
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == 1000) throw InvalidArgument("synth: cannot draw " + std::to_string(spec.queries) + " distinct queries");
      const std::size_t k = pick_topic(rng);
      std::vector<std::size_t> ranks;
      for (std::size_t n = qlen(rng); n > 0; --n) ranks.push_back(members[k][pick_word[k](rng)]);
      if (seen.insert(ranks).second) {
        query_ranks[i] = std::move(ranks);
        break;
      }
    }
    for (std::size_t r : query_ranks[i]) out[i].query.push_back(word(r));
  }

  std::vector<std::size_t> order(spec.queries);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> assigned(spec.queries, false);
  std::size_t next = 0;
  for (const auto& p : spec.planted) {
    const auto n = static_cast<std::size_t>(std::llround(p.share * static_cast<double>(spec.queries)));
    for (std::size_t j = 0; j < n && next < order.size(); ++j, ++next) {
      out[order[next]].reply = p.words;
      assigned[order[next]] = true;
    }
  }
  for (std::size_t i = 0; i < spec.queries; ++i) {
    if (assigned[i]) continue;
    const std::size_t n = std::min(rlen(rng), query_ranks[i].size());
    for (std::size_t j = 0; j < n; ++j) out[i].reply.push_back(word(partner(query_ranks[i][j])));
  }
  return out;
}

std::string to_tsv(const std::vector<TextPair>& pairs) {
  std::string out;
  auto join = [&](const Words& ws) {
    for (std::size_t i = 0; i < ws.size(); ++i) {
      if (i) out += ' ';
      out += ws[i];
    }
  };
  for (const auto& p : pairs) {
    join(p.query);
    out += '\t';
    join(p.reply);
    out += '\n';
  }
  return out;
}

}  // namespace nrg::corpus
