#include "nrg/corpus/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>

#include "nrg/error.hpp"

namespace nrg::corpus {

namespace {

const char* const kSpecialNames[kNumSpecial] = {"<pad>", "<s>", "</s>", "<unk>"};

}  // namespace

void Vocab::index() {
  ids_.clear();
  for (TokenId i = kNumSpecial; i < words_.size(); ++i) {
    if (!ids_.emplace(words_[i], i).second) throw FormatError("vocabulary lists '" + words_[i] + "' twice");
  }
}

Vocab Vocab::build(const std::vector<Words>& sentences, std::size_t limit) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& s : sentences) {
    for (const auto& w : s) ++counts[w];
  }
  std::vector<std::pair<std::string, std::uint64_t>> order(counts.begin(), counts.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (limit > 0 && order.size() > limit) order.resize(limit);
  Vocab v;
  for (const char* s : kSpecialNames) {
    v.words_.emplace_back(s);
    v.counts_.push_back(0);
  }
  for (auto& [w, c] : order) {
    v.words_.push_back(std::move(w));
    v.counts_.push_back(c);
  }
  v.index();
  return v;
}

bool Vocab::contains(std::string_view word) const { return ids_.count(std::string(word)) > 0; }

TokenId Vocab::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(TokenId id) const {
  if (id >= words_.size()) throw InvalidArgument("vocab: id " + std::to_string(id) + " out of range");
  return words_[id];
}

std::uint64_t Vocab::frequency(TokenId id) const {
  if (id >= words_.size()) throw InvalidArgument("vocab: id " + std::to_string(id) + " out of range");
  return counts_[id];
}

TokenSeq Vocab::encode(const Words& words) const {
  TokenSeq out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

Words Vocab::decode(const TokenSeq& ids) const {
  Words out;
  for (TokenId t : ids) out.push_back(word(t));
  return out;
}

std::string Vocab::join(const TokenSeq& ids) const {
  std::string out;
  for (TokenId t : ids) {
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

std::string Vocab::serialize() const {
  std::string out;
  for (TokenId i = kNumSpecial; i < words_.size(); ++i) out += words_[i] + "\t" + std::to_string(counts_[i]) + "\n";
  return out;
}

Vocab Vocab::deserialize(std::string_view text) {
  Vocab v;
  for (const char* s : kSpecialNames) {
    v.words_.emplace_back(s);
    v.counts_.push_back(0);
  }
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const auto tab = line.find('\t');
    std::uint64_t count = 0;
    if (tab == std::string_view::npos || tab == 0) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + " is malformed");
    }
    auto num = line.substr(tab + 1);
    auto [end, ec] = std::from_chars(num.data(), num.data() + num.size(), count);
    if (ec != std::errc() || end != num.data() + num.size()) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + " has a bad count");
    }
    v.words_.emplace_back(line.substr(0, tab));
    v.counts_.push_back(count);
  }
  v.index();
  return v;
}

Words split_words(std::string_view text) {
  Words out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Words normalize_words(std::string_view text) {
  std::string cleaned;
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::ispunct(u)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(u)));
  }
  return split_words(cleaned);
}

}  // namespace nrg::corpus
