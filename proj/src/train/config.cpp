#include "nrg/train/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nrg/error.hpp"

namespace nrg::train {

namespace {

// Shortest text that reads back as the same double.
std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw InvalidArgument("config key '" + key + "': expected a real number, got '" + text + "'");
  }
  return v;
}

template <typename T>
T parse_uint(const std::string& key, const std::string& text) {
  T v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw InvalidArgument("config key '" + key + "': expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InvalidArgument("config key '" + key + "': expected true or false, got '" + text + "'");
}

}  // namespace

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("train config: ") + what);
  };
  need(std::isfinite(lambda) && lambda >= 0.0, "lambda must be finite and >= 0");
  need(std::isfinite(gamma) && gamma >= 0.0, "gamma must be finite and >= 0");
  need(std::isfinite(lr) && lr > 0.0, "lr must be finite and > 0");
  need(batch > 0, "batch must be > 0");
  need(embed > 0, "embed must be > 0");
  need(hidden > 0, "hidden must be > 0");
  need(max_query_len > 0, "max_query_len must be > 0");
  need(max_reply_len > 0, "max_reply_len must be > 0");
  need(beam > 0, "beam must be > 0");
  need(negatives > 0, "negatives must be > 0");
  need(std::isfinite(clip_norm) && clip_norm > 0.0, "clip_norm must be finite and > 0");
  need(std::isfinite(init_scale) && init_scale > 0.0, "init_scale must be finite and > 0");
}

losses::RankingConfig TrainConfig::ranking() const {
  return {.lambda = lambda, .gamma = gamma, .mode = hinge_mode, .per_token_margin = per_token_margin};
}

model::ModelDims TrainConfig::dims(std::size_t vocab_size) const {
  return {.src_vocab = vocab_size,
          .tgt_vocab = vocab_size,
          .embed = embed,
          .hidden = hidden,
          .max_query_len = max_query_len,
          .max_reply_len = max_reply_len};
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"lambda", fmt_double(lambda)},
      {"gamma", fmt_double(gamma)},
      {"lr", fmt_double(lr)},
      {"batch", std::to_string(batch)},
      {"epochs", std::to_string(epochs)},
      {"embed", std::to_string(embed)},
      {"hidden", std::to_string(hidden)},
      {"max_query_len", std::to_string(max_query_len)},
      {"max_reply_len", std::to_string(max_reply_len)},
      {"beam", std::to_string(beam)},
      {"negatives", std::to_string(negatives)},
      {"hinge_mode", std::string(losses::to_string(hinge_mode))},
      {"per_token_margin", per_token_margin ? "true" : "false"},
      {"clip_norm", fmt_double(clip_norm)},
      {"init_scale", fmt_double(init_scale)},
      {"seed", std::to_string(seed)},
  };
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

void TrainConfig::apply(const std::map<std::string, std::string>& values) {
  for (const auto& [key, text] : values) {
    if (key == "lambda") lambda = parse_double(key, text);
    else if (key == "gamma") gamma = parse_double(key, text);
    else if (key == "lr") lr = parse_double(key, text);
    else if (key == "batch") batch = parse_uint<std::size_t>(key, text);
    else if (key == "epochs") epochs = parse_uint<std::size_t>(key, text);
    else if (key == "embed") embed = parse_uint<std::size_t>(key, text);
    else if (key == "hidden") hidden = parse_uint<std::size_t>(key, text);
    else if (key == "max_query_len") max_query_len = parse_uint<std::size_t>(key, text);
    else if (key == "max_reply_len") max_reply_len = parse_uint<std::size_t>(key, text);
    else if (key == "beam") beam = parse_uint<std::size_t>(key, text);
    else if (key == "negatives") negatives = parse_uint<std::size_t>(key, text);
    else if (key == "hinge_mode") hinge_mode = losses::parse_hinge_mode(text);
    else if (key == "per_token_margin") per_token_margin = parse_bool(key, text);
    else if (key == "clip_norm") clip_norm = parse_double(key, text);
    else if (key == "init_scale") init_scale = parse_double(key, text);
    else if (key == "seed") seed = parse_uint<std::uint64_t>(key, text);
    else throw InvalidArgument("unknown train config key '" + key + "'");
  }
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw FormatError("train config: malformed line '" + line + "'");
    values[line.substr(0, eq)] = line.substr(eq + 3);
  }
  TrainConfig cfg;
  cfg.apply(values);
  return cfg;
}

}  // namespace nrg::train
