#include "nrg/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "nrg/error.hpp"
#include "nrg/model/checkpoint.hpp"
#include "nrg/model/seq2seq.hpp"

namespace nrg::corpus {

TextCorpus parse_pairs(std::string_view text, const ReadOptions& options) {
  TextCorpus out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      out.malformed_lines.push_back(line_no);
      continue;
    }
    TextPair p{split_words(line.substr(0, tab)), split_words(line.substr(tab + 1))};
    if (p.query.empty() || p.reply.empty()) {
      out.malformed_lines.push_back(line_no);
      continue;
    }
    if (p.query.size() > options.max_query_len || p.reply.size() > options.max_reply_len) {
      ++out.dropped_too_long;
      continue;
    }
    out.pairs.push_back(std::move(p));
  }
  return out;
}

TextCorpus read_pairs(const std::filesystem::path& path, const ReadOptions& options) {
  return parse_pairs(model::read_file(path), options);
}

Encoded encode_pairs(std::span<const TextPair> pairs, const Vocab& vocab) {
  Encoded e;
  std::size_t q_tokens = 0, q_unk = 0, r_tokens = 0, r_unk = 0;
  for (const auto& p : pairs) {
    Pair ids{vocab.encode(p.query), vocab.encode(p.reply)};
    q_tokens += ids.query.size();
    r_tokens += ids.reply.size();
    q_unk += static_cast<std::size_t>(std::count(ids.query.begin(), ids.query.end(), kUnk));
    r_unk += static_cast<std::size_t>(std::count(ids.reply.begin(), ids.reply.end(), kUnk));
    e.pairs.push_back(std::move(ids));
  }
  e.oov_query = q_tokens ? static_cast<double>(q_unk) / static_cast<double>(q_tokens) : 0.0;
  e.oov_reply = r_tokens ? static_cast<double>(r_unk) / static_cast<double>(r_tokens) : 0.0;
  return e;
}

namespace {

IngestResult finish_ingest(TextCorpus text, std::size_t vocab_limit) {
  if (text.pairs.empty()) throw InvalidArgument("ingest: no usable query-response pairs");
  std::vector<Words> sentences;
  for (const auto& p : text.pairs) {
    sentences.push_back(p.query);
    sentences.push_back(p.reply);
  }
  IngestResult r{std::move(text), Vocab::build(sentences, vocab_limit), {}};
  r.encoded = encode_pairs(r.text.pairs, r.vocab);
  return r;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::string num(double v, const char* f = "%.6f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

IngestResult ingest(const std::filesystem::path& path, std::size_t vocab_limit, const ReadOptions& options) {
  return finish_ingest(read_pairs(path, options), vocab_limit);
}

IngestResult ingest_text(std::string_view text, std::size_t vocab_limit, const ReadOptions& options) {
  return finish_ingest(parse_pairs(text, options), vocab_limit);
}

ZipfFit zipf_fit(std::span<const double> frequencies, double total, std::size_t max_ranks) {
  std::vector<double> f(frequencies.begin(), frequencies.end());
  std::erase_if(f, [](double v) { return !(v > 0.0); });
  if (f.size() < 10) throw InvalidArgument("zipf fit: need at least 10 positive frequencies, got " + std::to_string(f.size()));
  std::sort(f.begin(), f.end(), std::greater<>());
  if (total <= 0.0) {
    total = 0.0;
    for (double v : f) total += v;
  }
  const std::size_t n = max_ranks == 0 ? f.size() : std::min(max_ranks, f.size());
  if (n < 2) throw InvalidArgument("zipf fit: need at least two ranks");
  ZipfFit fit;
  fit.ranks = n;
  fit.degenerate = f.front() == f[n - 1];
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = std::log(static_cast<double>(i + 1));
    ys[i] = std::log(f[i] / total);
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double dn = static_cast<double>(n);
  const double slope = fit.degenerate ? 0.0 : (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / dn;
  fit.alpha = slope == 0.0 ? 0.0 : -slope;
  fit.C = std::exp(intercept);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - (intercept + slope * xs[i]);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / dn);
  return fit;
}

TopTMass topt_mass(std::size_t t, double C, double alpha) {
  if (t == 0) throw InvalidArgument("top-t mass: t must be >= 1");
  TopTMass m;
  m.bound = C * std::log(static_cast<double>(t) + 1.0);
  for (std::size_t i = 1; i <= t; ++i) m.empirical += C / std::pow(static_cast<double>(i), alpha);
  return m;
}

TopTMass topt_mass(std::size_t t, double C, std::span<const double> frequencies) {
  if (t == 0) throw InvalidArgument("top-t mass: t must be >= 1");
  std::vector<double> f(frequencies.begin(), frequencies.end());
  std::sort(f.begin(), f.end(), std::greater<>());
  double total = 0.0;
  for (double v : f) total += v;
  TopTMass m;
  m.bound = C * std::log(static_cast<double>(t) + 1.0);
  for (std::size_t i = 0; i < std::min(t, f.size()); ++i) m.empirical += f[i] / total;
  return m;
}

CorpusStats corpus_stats(std::span<const Pair> pairs, const Vocab* vocab, const Encoded* encoded) {
  if (pairs.empty()) throw InvalidArgument("corpus stats: no pairs");
  std::map<TokenSeq, std::set<TokenSeq>> replies_of;
  std::map<TokenSeq, std::size_t> reply_count;
  for (const auto& p : pairs) {
    replies_of[p.query].insert(p.reply);
    ++reply_count[p.reply];
  }
  CorpusStats s;
  s.pairs = pairs.size();
  s.unique_queries = replies_of.size();
  s.unique_replies = reply_count.size();
  std::size_t one = 0, two = 0, more = 0;
  for (const auto& [q, rs] : replies_of) {
    (rs.size() == 1 ? one : rs.size() == 2 ? two : more) += 1;
  }
  const double nq = static_cast<double>(s.unique_queries);
  s.share_one = static_cast<double>(one) / nq;
  s.share_two = static_cast<double>(two) / nq;
  s.share_more = static_cast<double>(more) / nq;
  s.mean_replies_per_query = static_cast<double>(s.pairs) / nq;
  s.mean_response_frequency = static_cast<double>(s.pairs) / static_cast<double>(s.unique_replies);
  if (encoded) {
    s.oov_query = encoded->oov_query;
    s.oov_reply = encoded->oov_reply;
  }
  if (vocab) {
    s.vocab_size = vocab->content_size();
    std::vector<double> freq;
    for (TokenId i = kNumSpecial; i < vocab->size(); ++i) freq.push_back(static_cast<double>(vocab->frequency(i)));
    if (freq.size() >= 10) s.zipf = zipf_fit(freq);
  }
  return s;
}

std::vector<UniversalReply> detect_universal_replies(std::span<const Pair> pairs, const Vocab& vocab, std::size_t t,
                                                     double min_query_share) {
  if (t == 0 || t > vocab.content_size() / 10) {
    throw InvalidArgument("universal replies: t = " + std::to_string(t) + " must be in [1, " +
                          std::to_string(vocab.content_size() / 10) + "] (a tenth of the vocabulary)");
  }
  std::set<TokenSeq> queries;
  std::map<TokenSeq, std::pair<std::set<TokenSeq>, std::size_t>> by_reply;
  for (const auto& p : pairs) {
    queries.insert(p.query);
    auto& slot = by_reply[p.reply];
    slot.first.insert(p.query);
    ++slot.second;
  }
  const double n = static_cast<double>(queries.size());
  std::vector<UniversalReply> out;
  for (const auto& [reply, slot] : by_reply) {
    const bool top_ranked = std::all_of(reply.begin(), reply.end(), [&](TokenId id) {
      return id >= kNumSpecial && id < vocab.size() && vocab.rank(id) <= t;
    });
    const double share = static_cast<double>(slot.first.size()) / n;
    if (top_ranked && share >= min_query_share) out.push_back({reply, slot.first.size(), slot.second, share});
  }
  std::sort(out.begin(), out.end(), [](const UniversalReply& a, const UniversalReply& b) {
    if (a.distinct_queries != b.distinct_queries) return a.distinct_queries > b.distinct_queries;
    return a.reply < b.reply;
  });
  return out;
}

namespace {

template <typename Seq>
MeanWordFrequency mwf(std::span<const Seq> replies) {
  if (replies.empty()) throw InvalidArgument("mean word frequency: no replies");
  using Tok = typename Seq::value_type;
  std::set<Tok> types;
  MeanWordFrequency m;
  m.replies = replies.size();
  for (const auto& r : replies) {
    for (const auto& w : r) types.insert(w);
    m.tokens += r.size();
  }
  if (m.tokens == 0) throw InvalidArgument("mean word frequency: replies are empty");
  m.types = types.size();
  m.mean = static_cast<double>(m.tokens) / static_cast<double>(m.types);
  m.ratio = m.mean / static_cast<double>(m.replies);
  return m;
}

}  // namespace

MeanWordFrequency mean_word_frequency(std::span<const TokenSeq> replies) { return mwf(replies); }
MeanWordFrequency mean_word_frequency(std::span<const Words> replies) { return mwf(replies); }

JensenCheck jensen_bound_check(const model::ModelParams& params, const TokenSeq& query,
                               std::span<const TokenSeq> replies) {
  if (replies.empty()) throw InvalidArgument("jensen check: no replies");
  namespace t = tensor;
  t::Tape tape;
  auto p = model::bind_frozen(tape, params);
  const std::size_t rows = replies.size();
  std::vector<TokenSeq> queries(rows, query), targets;
  std::size_t longest = 0;
  for (const auto& y : replies) {
    if (y.empty()) throw InvalidArgument("jensen check: empty reply");
    targets.push_back(model::with_eos(y));
    longest = std::max(longest, targets.back().size());
  }
  auto enc = model::encode_batch(p, queries);
  const std::size_t vocab = params.dims.tgt_vocab;
  std::vector<double> mass(vocab, 0.0);
  std::size_t positions = 0;
  t::Var h = enc.h, c = enc.c;
  for (std::size_t pos = 0; pos < longest; ++pos) {
    std::vector<TokenId> prev(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      prev[r] = pos == 0 ? kBos : (pos < targets[r].size() ? targets[r][pos - 1] : kPad);
    }
    auto att = model::attend(p, enc, h);
    auto out = model::decoder_step(p, prev, h, c, att.context);
    const auto& lp = out.log_probs.value();
    for (std::size_t r = 0; r < rows; ++r) {
      if (pos >= targets[r].size()) continue;
      ++positions;
      for (TokenId w = 0; w < vocab; ++w) mass[w] += std::exp(lp.at(r, w));
    }
    h = out.h;
    c = out.c;
  }
  std::set<TokenId> words;
  for (const auto& y : replies) words.insert(y.begin(), y.end());
  words.erase(kEos);
  JensenCheck j;
  j.union_size = words.size();
  double sum = 0.0;
  for (TokenId w : words) {
    const double pw = mass[w] / static_cast<double>(positions);
    j.lhs += std::log(pw);
    sum += pw;
  }
  j.rhs = std::log(sum);
  return j;
}

std::string analysis_report(const IngestResult& corpus, const AnalysisOptions& options) {
  const auto& pairs = corpus.encoded.pairs;
  const CorpusStats s = corpus_stats(pairs, &corpus.vocab, &corpus.encoded);
  const std::size_t t = options.t ? options.t : std::max<std::size_t>(1, corpus.vocab.content_size() / 100);
  std::ostringstream o;
  o << "QA Pairs: " << s.pairs << "\n";
  o << "Unique Queries: " << s.unique_queries << "\n";
  o << "Unique Replies: " << s.unique_replies << "\n";
  o << "Multi Replies %: " << pct(s.share_one) << " / " << pct(s.share_two) << " / " << pct(s.share_more) << "\n";
  o << "OOV %: query " << pct(s.oov_query) << " / reply " << pct(s.oov_reply) << "\n";
  o << "Vocab Size: " << s.vocab_size << "\n";
  o << "Mean Replies Per Query: " << num(s.mean_replies_per_query, "%.4f") << "\n";
  o << "Mean Response Frequency: " << num(s.mean_response_frequency, "%.4f") << "\n";
  o << "Dropped Too Long: " << corpus.text.dropped_too_long << "\n";
  o << "Malformed Lines: " << corpus.text.malformed_lines.size() << "\n";
  if (s.zipf) {
    o << "Zipf C: " << num(s.zipf->C) << "\n";
    o << "Zipf alpha: " << num(s.zipf->alpha) << "\n";
    o << "Zipf residual: " << num(s.zipf->residual) << "\n";
  } else {
    o << "Zipf: fewer than 10 word types\n";
  }
  o << "Universal Replies (t = " << t << ", min query share = " << num(options.min_query_share, "%g") << "):\n";
  if (t > corpus.vocab.content_size() / 10) {
    o << "  skipped: vocabulary too small for t\n";
  } else {
    for (const auto& u : detect_universal_replies(pairs, corpus.vocab, t, options.min_query_share)) {
      o << "  " << corpus.vocab.join(u.reply) << "\tM=" << u.distinct_queries << "\tM/N=" << num(u.query_share, "%.4f")
        << "\n";
    }
  }
  return o.str();
}

}  // namespace nrg::corpus
