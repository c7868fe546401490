#include "nrg/lemma/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nrg/error.hpp"

namespace nrg::lemma {

Lemma1Result verify_lemma1(const LemmaUniverse& u, std::size_t y) {
  const WordSet S = word_set(u.reply(y));
  Lemma1Result r;
  r.set_given_reply = u.p_S_given_y(S, y) == 1.0;
  r.joint_is_marginal = u.p_y_and_S(y, S) == u.p_y(y);
  r.triple_is_pair = true;
  for (std::size_t x = 0; x < u.query_count(); ++x) {
    r.triple_is_pair = r.triple_is_pair && u.p_x_y_S(x, y, S) == u.p_x_y(x, y);
  }
  return r;
}

Lemma2Result verify_lemma2(const LemmaUniverse& u, std::size_t y) {
  const auto& qs = u.queries_of(y);
  if (qs.empty()) throw InvalidArgument("lemma 2: reply never occurs");
  Lemma2Result r;
  r.M = qs.size();
  r.uniform = true;
  for (const auto& [x, n] : qs) {
    r.epsilon1 = std::max(r.epsilon1, u.p_x_given_y(x, y));
    r.uniform = r.uniform && n == qs.begin()->second;
  }
  r.matches_one_over_M = r.uniform && r.epsilon1 == 1.0 / static_cast<double>(r.M);
  return r;
}

double lemma3_closed_form(double M, double m, double n) { return M * m / (M * m + (n - m)); }

double lemma3_printed_bound(double M) { return M / (M - 3.0); }

Lemma3Result verify_lemma3(const LemmaUniverse& u, const WordSet& S) {
  const auto cands = u.candidates(S);
  if (cands.empty()) throw InvalidArgument("lemma 3: no reply fits inside the word set");
  Lemma3Result r;
  r.n = cands.size();
  std::uint64_t den = 0;
  for (std::size_t c : cands) den += u.f_reply(c);
  std::uint64_t ur_freq = 0;
  bool same_freq = true, others_one = true;
  for (std::size_t c : cands) {
    const double p = static_cast<double>(u.f_reply(c)) / static_cast<double>(den);
    if (u.universal(c)) {
      if (r.m == 0) ur_freq = u.f_reply(c);
      same_freq = same_freq && u.f_reply(c) == ur_freq;
      ++r.m;
      r.universal_sum += p;
    } else {
      others_one = others_one && u.f_reply(c) == 1;
      r.max_other = std::max(r.max_other, p);
    }
  }
  if (r.m > 0 && same_freq && others_one) {
    r.closed_form_applies = true;
    r.M = static_cast<double>(ur_freq);
    r.closed_form = lemma3_closed_form(r.M, static_cast<double>(r.m), static_cast<double>(r.n));
  }
  return r;
}

Lemma4Result verify_lemma4(const LemmaUniverse& u, std::size_t y) {
  if (u.chain_k() == 0) throw InvalidArgument("lemma 4: universe is not built from conversation chains");
  if (u.universal(y)) throw InvalidArgument("lemma 4: reply is universal");
  Lemma4Result r;
  r.K = u.chain_k();
  r.distinct_queries = u.distinct_queries(y);
  r.passed = r.distinct_queries == r.K;
  for (const auto& [x, n] : u.queries_of(y)) {
    r.passed = r.passed && u.p_x_given_y(x, y) == 1.0 / static_cast<double>(r.K);
  }
  return r;
}

std::size_t top_share_quarter_threshold() {
  std::size_t t = 1;
  while (std::log(static_cast<double>(t) + 1.0) / 20.0 <= 0.25) ++t;
  return t;
}

TopShareResult verify_top_share(std::size_t T, std::size_t t, double C, std::size_t samples, std::mt19937_64& rng) {
  if (T == 0 || t == 0) throw InvalidArgument("top share: T and t must be >= 1");
  if (T > 30) throw InvalidArgument("top share: T must be <= 30");
  if (!(C > 0.0 && C < 1.0)) throw InvalidArgument("top share: C must lie in (0, 1)");
  if (samples == 0) throw InvalidArgument("top share: need at least one sample");
  TopShareResult r;
  const double lnt = std::log(static_cast<double>(t) + 1.0);
  r.bound = lnt / 20.0;
  r.bound_exceeds_quarter = r.bound > 0.25;

  // Binomial weights over non-empty subsets, summed up to T ln(t + 1).
  std::vector<double> binom(T + 1, 1.0);
  for (std::size_t i = 1; i <= T; ++i) binom[i] = binom[i - 1] * static_cast<double>(T - i + 1) / static_cast<double>(i);
  const double subsets = std::ldexp(1.0, static_cast<int>(T)) - 1.0;
  const auto limit = static_cast<std::size_t>(std::min(static_cast<double>(T), std::floor(static_cast<double>(T) * lnt)));
  double weight = 0.0;
  for (std::size_t i = 1; i <= limit; ++i) weight += binom[i] / subsets;
  r.analytic = weight * C * lnt;

  std::vector<double> probs;
  double h = 0.0;
  for (std::size_t i = 1;; ++i) {
    const double next = h + 1.0 / static_cast<double>(i);
    if (next > 1.0 / C) break;
    h = next;
    probs.push_back(1.0 / static_cast<double>(i));
  }
  if (probs.size() < t) throw InvalidArgument("top share: t exceeds the vocabulary implied by C");
  r.vocab = probs.size();
  for (std::size_t i = 0; i < t; ++i) r.top_t_mass += probs[i] / h;

  std::discrete_distribution<std::size_t> word(probs.begin(), probs.end());
  std::discrete_distribution<std::size_t> subset_size(binom.begin(), binom.end());
  double mc = 0.0, all_top = 0.0;
  std::vector<std::size_t> reply(T);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t top = 0;
    for (auto& w : reply) {
      w = word(rng);
      top += w < t ? 1 : 0;
    }
    std::size_t i = 0;
    while (i == 0) i = subset_size(rng);
    std::shuffle(reply.begin(), reply.end(), rng);
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    mc += (i <= limit && reply[pick] < t) ? 1.0 : 0.0;
    all_top += (std::ldexp(1.0, static_cast<int>(top)) - 1.0) / subsets;
  }
  r.monte_carlo = mc / static_cast<double>(samples);
  r.all_top_subsequences = all_top / static_cast<double>(samples);
  return r;
}

MixtureReport verify_mixture_proxy(const LemmaUniverse& u, std::size_t x, std::size_t y, std::size_t budget) {
  if (u.reply_count() > budget) {
    throw InvalidArgument("mixture proxy: " + std::to_string(u.reply_count()) + " replies exceed the enumeration budget " +
                          std::to_string(budget));
  }
  if (u.f(x, y) == 0) throw InvalidArgument("mixture proxy: the pair (x, y) never occurs");
  const WordSet S = word_set(u.reply(y));
  const auto cands = u.candidates(S);
  MixtureReport r;

  std::uint64_t fxS = 0;
  for (std::size_t c : cands) fxS += u.f(x, c);
  r.exact = std::log(static_cast<double>(u.f(x, y)) / static_cast<double>(fxS));

  const double pSy = u.p_S_given_y(S, y);
  const double py = u.p_y(y);
  const double pS = u.p_S(S);
  const double pyS = u.p_y_and_S(y, S);
  const double pxyS = u.p_x_y_S(x, y, S);
  const double pxS = u.p_x_and_S(x, S);
  const double px_given_yS = pxyS / pyS;
  const double px_given_S = u.p_x_given_S(x, S);
  const double py_given_S = u.p_y_given_S(y, S);
  const double pxy = u.p_x_y(x, y);
  const double px_given_y = u.p_x_given_y(x, y);

  for (std::size_t c : cands) {
    const double term = u.p_x_given_y(x, c) * u.p_y_given_S(c, S);
    r.mixture += term;
    if (c == y) r.part_reply += term;
    else if (u.universal(c)) r.part_universal += term;
    else r.part_other += term;
  }
  r.partition_deviation = std::abs(r.mixture - (r.part_reply + r.part_universal + r.part_other));

  r.chain[0] = std::log(pSy * py * px_given_yS / (pS * px_given_S));
  r.chain[1] = std::log(pSy) + std::log(py / pS) + std::log(px_given_yS / px_given_S);
  r.chain[2] = std::log(pyS / pS) + std::log(pxyS * pS / (pyS * pxS));
  r.chain[3] = std::log(py_given_S) + std::log(pxy * pS / (py * pxS));
  r.chain[4] = std::log(py_given_S) + std::log(px_given_y / px_given_S);
  r.chain[5] = std::log(py_given_S) + std::log(px_given_y / r.mixture);
  for (double v : r.chain) r.chain_max_deviation = std::max(r.chain_max_deviation, std::abs(v - r.exact));

  r.epsilon1 = r.part_universal;
  r.epsilon2 = r.part_other;
  r.K = u.distinct_queries(y);
  const double eps = r.epsilon1 + r.epsilon2;
  r.proxy_step1 = std::log(py_given_S) + std::log(px_given_y / (px_given_y * py_given_S + eps));
  r.proxy_step2 = std::log(py_given_S / (py_given_S + eps / static_cast<double>(r.K)));
  r.proxy_gap = r.exact - r.proxy_step2;
  return r;
}

namespace {

std::string g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

}  // namespace

std::string lemma_report(const LemmaUniverse& u, std::uint64_t seed) {
  std::ostringstream o;
  std::size_t universal = 0;
  for (std::size_t y = 0; y < u.reply_count(); ++y) universal += u.universal(y) ? 1 : 0;
  o << "Universe: " << u.query_count() << " queries, " << u.reply_count() << " replies (" << universal
    << " universal), " << u.total() << " pair occurrences\n";

  std::size_t l1 = 0;
  for (std::size_t y = 0; y < u.reply_count(); ++y) l1 += verify_lemma1(u, y).passed() ? 1 : 0;
  o << "Lemma 1: " << verdict(l1 == u.reply_count()) << " (" << l1 << "/" << u.reply_count() << " replies)\n";

  o << "Lemma 2:";
  if (universal == 0) o << " no universal replies\n";
  else o << "\n";
  for (std::size_t y = 0; y < u.reply_count(); ++y) {
    if (!u.universal(y)) continue;
    auto r = verify_lemma2(u, y);
    o << "  reply " << y << ": M=" << r.M << " epsilon1=" << g(r.epsilon1)
      << (r.uniform ? std::string(" 1/M=") + g(1.0 / static_cast<double>(r.M)) + " " + verdict(r.matches_one_over_M)
                    : std::string(" (non-uniform attachment)"))
      << "\n";
  }

  std::size_t l3_sets = 0, l3_closed = 0;
  double l3_dev = 0.0, l3_min = 1.0;
  double printed_M = 0.0;
  for (std::size_t y = 0; y < u.reply_count(); ++y) {
    if (u.universal(y)) continue;
    auto r = verify_lemma3(u, word_set(u.reply(y)));
    if (r.m == 0) continue;
    ++l3_sets;
    l3_min = std::min(l3_min, r.universal_sum);
    if (r.closed_form_applies) {
      ++l3_closed;
      l3_dev = std::max(l3_dev, std::abs(r.universal_sum - r.closed_form));
      printed_M = r.M;
    }
  }
  o << "Lemma 3: " << l3_sets << " word sets with universal candidates, " << l3_closed
    << " with the closed form; max |sum - M*m/(M*m+n-m)| = " << g(l3_dev) << " "
    << verdict(l3_dev <= 1e-9) << "; min sum = " << g(l3_sets ? l3_min : 0.0) << "\n";
  if (printed_M > 3.0) {
    o << "  printed bound M/(M-3) at M=" << g(printed_M) << " is " << g(lemma3_printed_bound(printed_M))
      << " > 1, so it cannot bound a probability; the closed form is used instead\n";
  }
  o << "  M=1000, m=1, n=4: " << g(lemma3_closed_form(1000, 1, 4)) << " "
    << verdict(lemma3_closed_form(1000, 1, 4) >= 0.99) << "\n";

  if (u.chain_k() > 0) {
    std::size_t ok = 0;
    for (std::size_t y = 0; y < u.reply_count(); ++y) ok += verify_lemma4(u, y).passed ? 1 : 0;
    o << "Lemma 4: " << verdict(ok == u.reply_count()) << " (K=" << u.chain_k() << ", " << ok << "/"
      << u.reply_count() << " replies)\n";
  } else {
    o << "Lemma 4: skipped (universe is not chain-built)\n";
  }

  double chain_dev = 0.0, part_dev = 0.0, gap_sum = 0.0;
  std::size_t checked = 0;
  if (u.reply_count() <= 1000) {
    for (std::size_t y = 0; y < u.reply_count() && checked < 500; ++y) {
      for (const auto& [x, n] : u.queries_of(y)) {
        auto r = verify_mixture_proxy(u, x, y);
        chain_dev = std::max(chain_dev, r.chain_max_deviation);
        part_dev = std::max(part_dev, r.partition_deviation);
        gap_sum += r.proxy_gap;
        if (++checked == 500) break;
      }
    }
  }
  o << "Rewriting chain: " << checked << " pairs, max deviation " << g(chain_dev) << " " << verdict(chain_dev <= 1e-12)
    << "\n";
  o << "Candidate partition: max deviation " << g(part_dev) << " " << verdict(part_dev <= 1e-12) << "\n";
  o << "Mixture proxy: mean gap (exact - proxy) " << g(checked ? gap_sum / static_cast<double>(checked) : 0.0)
    << " (reported only)\n";

  std::mt19937_64 rng(seed);
  o << "Top-t share (T=5, C=0.1): quarter bound needs t >= " << top_share_quarter_threshold() << "\n";
  for (std::size_t t : {147, 148, 500, 1000}) {
    auto r = verify_top_share(5, t, 0.1, 20000, rng);
    o << "  t=" << t << ": analytic=" << g(r.analytic) << " bound=" << g(r.bound) << " (>0.25 "
      << (r.bound_exceeds_quarter ? "yes" : "no") << ") monte_carlo=" << g(r.monte_carlo)
      << " all_top_subsequences=" << g(r.all_top_subsequences) << "\n";
  }
  return o.str();
}

}  // namespace nrg::lemma
