#include "nrg/lemma/universe.hpp"

#include <algorithm>
#include <numeric>

#include "nrg/error.hpp"

namespace nrg::lemma {

WordSet word_set(const TokenSeq& y) { return WordSet(y.begin(), y.end()); }

std::size_t LemmaUniverse::add_reply(const TokenSeq& y, bool universal) {
  if (y.empty()) throw InvalidArgument("universe: empty reply");
  auto it = index_.find(y);
  if (it != index_.end()) {
    if (universal_[it->second] != universal) throw InvalidArgument("universe: reply re-added with another flag");
    return it->second;
  }
  const std::size_t id = replies_.size();
  index_.emplace(y, id);
  replies_.push_back(y);
  universal_.push_back(universal);
  f_.emplace_back();
  reply_totals_.push_back(0);
  return id;
}

void LemmaUniverse::add(std::size_t x, std::size_t y, std::uint64_t count) {
  if (x >= queries_) throw InvalidArgument("universe: query index out of range");
  if (y >= replies_.size()) throw InvalidArgument("universe: reply index out of range");
  if (count == 0) return;
  f_[y][x] += count;
  reply_totals_[y] += count;
  total_ += count;
}

std::uint64_t LemmaUniverse::f(std::size_t x, std::size_t y) const {
  const auto& m = f_.at(y);
  auto it = m.find(x);
  return it == m.end() ? 0 : it->second;
}

std::uint64_t LemmaUniverse::f_reply(std::size_t y) const { return reply_totals_.at(y); }

std::vector<std::size_t> LemmaUniverse::candidates(const WordSet& S) const {
  std::vector<std::size_t> out;
  for (std::size_t y = 0; y < replies_.size(); ++y) {
    const auto& r = replies_[y];
    if (std::all_of(r.begin(), r.end(), [&](TokenId w) { return S.count(w) > 0; })) out.push_back(y);
  }
  return out;
}

namespace {

double ratio(std::uint64_t a, std::uint64_t b) {
  if (b == 0) throw InvalidArgument("universe: conditioning on an event of probability zero");
  return static_cast<double>(a) / static_cast<double>(b);
}

bool inside(const TokenSeq& y, const WordSet& S) {
  return std::all_of(y.begin(), y.end(), [&](TokenId w) { return S.count(w) > 0; });
}

}  // namespace

double LemmaUniverse::p_y(std::size_t y) const { return ratio(f_reply(y), total_); }

double LemmaUniverse::p_x_given_y(std::size_t x, std::size_t y) const { return ratio(f(x, y), f_reply(y)); }

double LemmaUniverse::p_S(const WordSet& S) const {
  std::uint64_t n = 0;
  for (std::size_t y : candidates(S)) n += f_reply(y);
  return ratio(n, total_);
}

double LemmaUniverse::p_x_and_S(std::size_t x, const WordSet& S) const {
  std::uint64_t n = 0;
  for (std::size_t y : candidates(S)) n += f(x, y);
  return ratio(n, total_);
}

double LemmaUniverse::p_y_given_S(std::size_t y, const WordSet& S) const {
  std::uint64_t den = 0;
  for (std::size_t c : candidates(S)) den += f_reply(c);
  return inside(replies_.at(y), S) ? ratio(f_reply(y), den) : 0.0;
}

double LemmaUniverse::p_x_given_S(std::size_t x, const WordSet& S) const {
  std::uint64_t num = 0, den = 0;
  for (std::size_t c : candidates(S)) {
    num += f(x, c);
    den += f_reply(c);
  }
  return ratio(num, den);
}

double LemmaUniverse::p_S_given_y(const WordSet& S, std::size_t y) const {
  return ratio(inside(replies_.at(y), S) ? f_reply(y) : 0, f_reply(y));
}

double LemmaUniverse::p_y_and_S(std::size_t y, const WordSet& S) const {
  return ratio(inside(replies_.at(y), S) ? f_reply(y) : 0, total_);
}

double LemmaUniverse::p_x_y_S(std::size_t x, std::size_t y, const WordSet& S) const {
  return ratio(inside(replies_.at(y), S) ? f(x, y) : 0, total_);
}

double LemmaUniverse::p_x_y(std::size_t x, std::size_t y) const { return ratio(f(x, y), total_); }

LemmaUniverse random_universe(const RandomUniverseSpec& spec, std::mt19937_64& rng) {
  if (spec.top_t == 0 || spec.top_t >= spec.vocab) throw InvalidArgument("universe: need 0 < top_t < vocab");
  if (spec.attach > spec.queries) throw InvalidArgument("universe: attach exceeds query count");
  if (spec.universal + spec.others > 1000) throw InvalidArgument("universe: more than 1000 replies");
  LemmaUniverse u(spec.queries);
  std::uniform_int_distribution<TokenId> top(kNumSpecial, kNumSpecial + spec.top_t - 1);
  std::uniform_int_distribution<TokenId> low(kNumSpecial + spec.top_t, kNumSpecial + spec.vocab - 1);
  std::uniform_int_distribution<TokenId> any(kNumSpecial, kNumSpecial + spec.vocab - 1);
  std::uniform_int_distribution<std::size_t> len(1, 3);
  std::uniform_int_distribution<std::size_t> query(0, spec.queries - 1);
  std::vector<std::size_t> order(spec.queries);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t made = 0;
  for (std::size_t attempts = 0; made < spec.universal; ++attempts) {
    if (attempts > 100000) throw InvalidArgument("universe: cannot draw enough distinct universal replies");
    TokenSeq y(len(rng));
    for (auto& w : y) w = top(rng);
    const std::size_t before = u.reply_count();
    const std::size_t id = u.add_reply(y, true);
    if (id < before) continue;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < spec.attach; ++i) u.add(order[i], id);
    ++made;
  }
  made = 0;
  for (std::size_t attempts = 0; made < spec.others; ++attempts) {
    if (attempts > 100000) throw InvalidArgument("universe: cannot draw enough distinct replies");
    TokenSeq y(len(rng) + 1);
    for (auto& w : y) w = any(rng);
    y[std::uniform_int_distribution<std::size_t>(0, y.size() - 1)(rng)] = low(rng);
    const std::size_t before = u.reply_count();
    const std::size_t id = u.add_reply(y, false);
    if (id < before) continue;
    u.add(query(rng), id);
    ++made;
  }
  return u;
}

LemmaUniverse chain_universe(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  if (k == 0 || k >= n) throw InvalidArgument("chain universe: need 0 < k < n");
  if (n > 1000) throw InvalidArgument("chain universe: more than 1000 utterances");
  // Utterance i is the two-token sequence (4 + i / 100, 4 + i % 100) under a
  // random relabeling, so utterances are distinct.
  std::vector<std::size_t> label(n);
  std::iota(label.begin(), label.end(), std::size_t{0});
  std::shuffle(label.begin(), label.end(), rng);
  LemmaUniverse u(n);
  std::vector<std::size_t> reply_id(n);
  for (std::size_t i = 0; i < n; ++i) {
    reply_id[i] = u.add_reply({kNumSpecial + label[i] / 100, kNumSpecial + 100 + label[i] % 100}, false);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j <= k; ++j) u.add(i, reply_id[(i + j) % n]);
  }
  u.mark_chain(k);
  return u;
}

}  // namespace nrg::lemma
