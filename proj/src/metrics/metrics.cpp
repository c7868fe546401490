#include "nrg/metrics/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <json.hpp>

#include "nrg/error.hpp"
#include "nrg/model/seq2seq.hpp"

namespace nrg::metrics {

PerplexityResult perplexity(const model::ModelParams& params, std::span<const Pair> dataset) {
  if (dataset.empty()) throw InvalidArgument("perplexity: empty dataset");
  constexpr std::size_t kChunk = 32;
  PerplexityResult r;
  for (std::size_t begin = 0; begin < dataset.size(); begin += kChunk) {
    const std::size_t end = std::min(dataset.size(), begin + kChunk);
    std::vector<TokenSeq> q, y;
    for (std::size_t i = begin; i < end; ++i) {
      q.push_back(dataset[i].query);
      y.push_back(dataset[i].reply);
      r.tokens += model::with_eos(dataset[i].reply).size();
    }
    tensor::Tape tape;
    auto p = model::bind_frozen(tape, params);
    auto enc = model::encode_batch(p, q);
    auto lp = model::sequence_log_probs(p, enc, y);
    for (double v : lp.value().values()) r.total_nll -= v;
  }
  r.ppl = std::exp(r.total_nll / static_cast<double>(r.tokens));
  return r;
}

namespace {

std::set<TokenSeq> ngram_types(std::span<const TokenSeq> responses, std::size_t n, std::size_t& total) {
  std::set<TokenSeq> types;
  total = 0;
  for (const auto& r : responses) {
    for (std::size_t i = 0; i + n <= r.size(); ++i) {
      types.emplace(r.begin() + i, r.begin() + i + n);
      ++total;
    }
  }
  return types;
}

void need_reference(const TokenSeq& reference) {
  if (reference.empty()) throw InvalidArgument("rouge: empty reference");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double distinct_n(std::span<const TokenSeq> responses, std::size_t n) {
  if (n == 0) throw InvalidArgument("distinct-n: n must be >= 1");
  if (responses.empty()) throw InvalidArgument("distinct-n: no responses");
  std::size_t total = 0;
  const auto types = ngram_types(responses, n, total);
  return total == 0 ? 0.0 : static_cast<double>(types.size()) / static_cast<double>(total);
}

double rouge_1(const TokenSeq& candidate, const TokenSeq& reference) {
  need_reference(reference);
  std::map<TokenId, std::size_t> ref;
  for (TokenId t : reference) ++ref[t];
  std::size_t overlap = 0;
  for (TokenId t : candidate) {
    auto it = ref.find(t);
    if (it != ref.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  return static_cast<double>(overlap) / static_cast<double>(reference.size());
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> row(b.size() + 1, 0), prev(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::swap(row, prev);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      row[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], row[j - 1]);
    }
  }
  return a.empty() ? 0 : row[b.size()];
}

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  need_reference(reference);
  return static_cast<double>(lcs_length(candidate, reference)) / static_cast<double>(reference.size());
}

double rouge_1(const TokenSeq& candidate, std::span<const TokenSeq> references) {
  if (references.empty()) throw InvalidArgument("rouge: no references");
  double best = 0.0;
  for (const auto& r : references) best = std::max(best, rouge_1(candidate, r));
  return best;
}

double rouge_l(const TokenSeq& candidate, std::span<const TokenSeq> references) {
  if (references.empty()) throw InvalidArgument("rouge: no references");
  double best = 0.0;
  for (const auto& r : references) best = std::max(best, rouge_l(candidate, r));
  return best;
}

MetricReport build_report(const PerplexityResult& ppl, std::span<const TokenSeq> top1,
                          std::span<const std::vector<TokenSeq>> references, std::span<const TokenSeq> responses,
                          bool all_outputs) {
  if (top1.empty()) throw InvalidArgument("metrics: no generated replies");
  if (top1.size() != references.size()) {
    throw InvalidArgument("metrics: " + std::to_string(top1.size()) + " generated replies for " +
                          std::to_string(references.size()) + " reference sets");
  }
  MetricReport m;
  m.ppl = ppl.ppl;
  m.ppl_tokens = ppl.tokens;
  m.queries = top1.size();
  m.distinct1 = distinct_n(responses, 1);
  m.distinct2 = distinct_n(responses, 2);
  std::size_t total = 0;
  m.unigram_types = ngram_types(responses, 1, total).size();
  m.response_tokens = total;
  m.bigram_types = ngram_types(responses, 2, total).size();
  double r1 = 0.0, rl = 0.0;
  for (std::size_t i = 0; i < top1.size(); ++i) {
    r1 += rouge_1(top1[i], references[i]);
    rl += rouge_l(top1[i], references[i]);
  }
  m.rouge1 = r1 / static_cast<double>(top1.size());
  m.rougeL = rl / static_cast<double>(top1.size());
  m.distinct_scope = all_outputs ? "all" : "top1";
  return m;
}

std::string MetricReport::to_text() const {
  std::string s;
  s += "ppl: " + fmt(ppl) + "\n";
  s += "distinct1: " + fmt(distinct1) + "\n";
  s += "distinct2: " + fmt(distinct2) + "\n";
  s += "rouge1: " + fmt(rouge1) + "\n";
  s += "rougeL: " + fmt(rougeL) + "\n";
  s += "ppl_tokens: " + std::to_string(ppl_tokens) + "\n";
  s += "queries: " + std::to_string(queries) + "\n";
  s += "response_tokens: " + std::to_string(response_tokens) + "\n";
  s += "unigram_types: " + std::to_string(unigram_types) + "\n";
  s += "bigram_types: " + std::to_string(bigram_types) + "\n";
  s += "rouge_form: " + rouge_form + "\n";
  s += "distinct_scope: " + distinct_scope + "\n";
  return s;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["ppl"] = ppl;
  j["distinct1"] = distinct1;
  j["distinct2"] = distinct2;
  j["rouge1"] = rouge1;
  j["rougeL"] = rougeL;
  j["ppl_tokens"] = ppl_tokens;
  j["queries"] = queries;
  j["response_tokens"] = response_tokens;
  j["unigram_types"] = unigram_types;
  j["bigram_types"] = bigram_types;
  j["rouge_form"] = rouge_form;
  j["distinct_scope"] = distinct_scope;
  return j.dump();
}

}  // namespace nrg::metrics
