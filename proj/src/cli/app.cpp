#include "nrg/cli/app.hpp"

#include <zlib.h>

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <set>
#include <sstream>
#include <unordered_map>

#include "nrg/corpus/corpus.hpp"
#include "nrg/corpus/synth.hpp"
#include "nrg/error.hpp"
#include "nrg/infer/beam.hpp"
#include "nrg/lemma/oracle.hpp"
#include "nrg/metrics/metrics.hpp"
#include "nrg/model/checkpoint.hpp"
#include "nrg/train/trainer.hpp"

namespace nrg::cli {

namespace fs = std::filesystem;

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
    throw UsageError("'" + key + "': expected a real number, got '" + text + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw UsageError("'" + key + "': expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw UsageError("'" + key + "': expected true or false, got '" + text + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
  const char* commands;  // space-separated subcommands accepting the flag
};

constexpr const char* kTrain = "train";
constexpr const char* kAll = "train generate evaluate analyze synth";

const FlagSpec kValueFlags[] = {
    {"--lambda", "lambda", "ranking regularization weight", kTrain},
    {"--gamma", "gamma", "ranking margin", kTrain},
    {"--lr", "lr", "Adam learning rate", kTrain},
    {"--batch", "batch", "minibatch size", kTrain},
    {"--epochs", "epochs", "training epochs", kTrain},
    {"--embed", "embed", "embedding size", kTrain},
    {"--hidden", "hidden", "LSTM hidden size", kTrain},
    {"--negatives", "negatives", "negatives per pair", kTrain},
    {"--hinge-mode", "hinge_mode", "paper|standard", kTrain},
    {"--per-token-margin", "per_token_margin", "length-normalize margin log-probabilities", kTrain},
    {"--clip-norm", "clip_norm", "global gradient-norm clip", kTrain},
    {"--init-scale", "init_scale", "uniform init half-width", kTrain},
    {"--max-query-len", "max_query_len", "longest query kept", "train analyze"},
    {"--max-reply-len", "max_reply_len", "longest reply kept", "train analyze"},
    {"--vocab-limit", "vocab_limit", "content words kept (0 = all)", "train analyze"},
    {"--beam", "beam", "beam width", "generate"},
    {"--nbest", "nbest", "hypotheses written per query (0 = beam)", "generate"},
    {"--mmi-lambda", "mmi_lambda", "MMI backward weight", "generate"},
    {"--mmi-gamma-len", "mmi_gamma_len", "MMI per-token bonus", "generate"},
    {"--t", "t", "top-rank cutoff for universal replies (0 = vocab/100)", "analyze"},
    {"--min-query-share", "min_query_share", "minimum M/N for universal replies", "analyze"},
    {"--queries", "synth_queries", "synthetic query count", "synth"},
    {"--vocab", "synth_vocab", "synthetic vocabulary size", "synth"},
    {"--topics", "synth_topics", "synthetic topic count", "synth"},
    {"--planted-share", "planted_share", "total share of planted universal replies", "synth"},
    {"--zipf-alpha", "zipf_alpha", "synthetic Zipf exponent", "synth"},
    {"--seed", "seed", "random seed", kAll},
};

const FlagSpec kBoolFlags[] = {
    {"--mmi", "mmi", "rerank with a backward model", "generate"},
    {"--reverse", "reverse", "train on reply -> query pairs", kTrain},
};

// Help or version text requested on the command line.
class InfoRequest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool accepts(const FlagSpec& f, const std::string& command) {
  std::istringstream in(f.commands);
  std::string c;
  while (in >> c) {
    if (c == command) return true;
  }
  return false;
}

}  // namespace

std::map<std::string, std::string> RunConfig::to_map() const {
  auto m = train.to_map();
  m["reverse"] = reverse ? "true" : "false";
  m["vocab_limit"] = std::to_string(vocab_limit);
  m["mmi"] = mmi ? "true" : "false";
  m["mmi_lambda"] = fmt_double(mmi_lambda);
  m["mmi_gamma_len"] = fmt_double(mmi_gamma_len);
  m["nbest"] = std::to_string(nbest);
  m["t"] = std::to_string(t);
  m["min_query_share"] = fmt_double(min_query_share);
  m["synth_queries"] = std::to_string(synth_queries);
  m["synth_vocab"] = std::to_string(synth_vocab);
  m["synth_topics"] = std::to_string(synth_topics);
  m["planted_share"] = fmt_double(planted_share);
  m["zipf_alpha"] = fmt_double(zipf_alpha);
  return m;
}

void RunConfig::apply(const std::map<std::string, std::string>& values) {
  const auto train_keys = train::TrainConfig{}.to_map();
  std::map<std::string, std::string> for_train;
  for (const auto& [key, text] : values) {
    if (train_keys.count(key)) for_train[key] = text;
    else if (key == "reverse") reverse = parse_bool(key, text);
    else if (key == "vocab_limit") vocab_limit = parse_size(key, text);
    else if (key == "mmi") mmi = parse_bool(key, text);
    else if (key == "mmi_lambda") mmi_lambda = parse_double(key, text);
    else if (key == "mmi_gamma_len") mmi_gamma_len = parse_double(key, text);
    else if (key == "nbest") nbest = parse_size(key, text);
    else if (key == "t") t = parse_size(key, text);
    else if (key == "min_query_share") min_query_share = parse_double(key, text);
    else if (key == "synth_queries") synth_queries = parse_size(key, text);
    else if (key == "synth_vocab") synth_vocab = parse_size(key, text);
    else if (key == "synth_topics") synth_topics = parse_size(key, text);
    else if (key == "planted_share") planted_share = parse_double(key, text);
    else if (key == "zipf_alpha") zipf_alpha = parse_double(key, text);
    else throw UsageError("unknown config key '" + key + "'");
  }
  try {
    train.apply(for_train);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  constexpr std::string_view kHeaderPrefix = "# config: ";
  while (std::getline(in, line)) {
    ++number;
    std::string_view body = line;
    if (body.starts_with(kHeaderPrefix)) body.remove_prefix(kHeaderPrefix.size());
    else if (trim(body).empty() || trim(body).front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(number) + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(number) + ": empty key");
    values[key] = trim(body.substr(eq + 1));
  }
  return values;
}

RunConfig parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Sequence-to-sequence response generation with max-margin ranking regularization", "nrg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  struct Paths {
    std::string corpus, checkpoint, backward, generations, out, lemma, config;
  } paths;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, bool> bool_values;
  std::vector<std::pair<CLI::Option*, std::string>> value_options;
  std::vector<std::pair<CLI::Option*, std::string>> bool_options;

  const char* descriptions[][2] = {
      {"train", "train a model and write a checkpoint plus learning curve"},
      {"generate", "write beam-search N-best lists for the corpus queries"},
      {"evaluate", "score generations and corpus perplexity"},
      {"analyze", "corpus statistics, Zipf fit, universal replies, lemma checks"},
      {"synth", "write a synthetic corpus with planted universal replies"},
  };
  for (const auto& [name, desc] : descriptions) {
    CLI::App* sub = app.add_subcommand(name, desc);
    const std::string command = name;
    sub->add_option("--config", paths.config, "file of 'key = value' settings");
    sub->add_option("--out", paths.out, "output directory")->required();
    if (command != "synth") sub->add_option("--corpus", paths.corpus, "query TAB reply file")->required();
    if (command == "generate" || command == "evaluate") {
      sub->add_option("--checkpoint", paths.checkpoint, "model checkpoint")->required();
    }
    if (command == "generate") sub->add_option("--backward-checkpoint", paths.backward, "reply -> query model for MMI");
    if (command == "evaluate") sub->add_option("--generations", paths.generations, "generate output")->required();
    if (command == "analyze") {
      sub->add_option("--lemma-universe", paths.lemma, "also verify the lemmas on a random|chain universe")
          ->check(CLI::IsMember({"random", "chain"}));
    }
    for (const auto& f : kValueFlags) {
      if (accepts(f, command)) value_options.emplace_back(sub->add_option(f.flag, flag_values[f.key], f.help)->type_name("VALUE"), f.key);
    }
    for (const auto& f : kBoolFlags) {
      if (accepts(f, command)) bool_options.emplace_back(sub->add_flag(f.flag, bool_values[f.key], f.help), f.key);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw InfoRequest(app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw InfoRequest(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::CallForVersion& e) {
    throw InfoRequest(std::string(e.what()) + "\n");
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig cfg;
  cfg.command = app.get_subcommands().front()->get_name();
  if (!paths.config.empty()) {
    std::string text;
    try {
      text = model::read_file(paths.config);
    } catch (const Error& e) {
      throw UsageError(std::string("--config: ") + e.what());
    }
    cfg.apply(parse_config_text(text));
  }
  std::map<std::string, std::string> overrides;
  for (const auto& [opt, key] : value_options) {
    if (opt->count() > 0) overrides[key] = flag_values[key];
  }
  for (const auto& [opt, key] : bool_options) {
    if (opt->count() > 0) overrides[key] = "true";
  }
  cfg.apply(overrides);
  try {
    cfg.train.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  cfg.corpus = paths.corpus;
  cfg.checkpoint = paths.checkpoint;
  cfg.backward_checkpoint = paths.backward;
  cfg.generations = paths.generations;
  cfg.out = paths.out;
  cfg.lemma_universe = paths.lemma;
  if (cfg.mmi && cfg.backward_checkpoint.empty()) throw UsageError("--mmi requires --backward-checkpoint");
  return cfg;
}

namespace {

std::string input_line(const std::string& role, const std::string& path, std::string_view bytes) {
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return role + " " + fs::path(path).filename().string() + " crc32=" + buf;
}

}  // namespace

std::string artifact_header(const RunConfig& config, const std::vector<std::string>& inputs) {
  std::string h = std::string("# nrg ") + kVersion + "\n";
  h += "# command: " + config.command + "\n";
  h += "# seed: " + std::to_string(config.train.seed) + "\n";
  for (const auto& [k, v] : config.to_map()) h += "# config: " + k + " = " + v + "\n";
  for (const auto& in : inputs) h += "# input: " + in + "\n";
  return h;
}

namespace {

struct Loaded {
  train::TrainState state;
  corpus::Vocab vocab;
  std::string bytes;
};

Loaded load_model(const std::string& path) {
  Loaded l{.state = {}, .vocab = {}, .bytes = model::read_file(path)};
  const model::Checkpoint ckpt = model::decode_checkpoint(l.bytes);
  const std::string* vocab = ckpt.section("vocab");
  if (vocab == nullptr) throw FormatError("checkpoint " + path + " has no vocabulary section");
  l.vocab = corpus::Vocab::deserialize(*vocab);
  l.state = train::from_checkpoint(ckpt);
  if (l.vocab.size() != l.state.params.dims.tgt_vocab) {
    throw FormatError("checkpoint " + path + ": vocabulary size disagrees with the model");
  }
  return l;
}

fs::path out_file(const RunConfig& cfg, const char* name) {
  fs::create_directories(cfg.out);
  return fs::path(cfg.out) / name;
}

void run_synth(const RunConfig& cfg, std::ostream& log) {
  corpus::SynthSpec spec;
  spec.queries = cfg.synth_queries;
  spec.vocab = cfg.synth_vocab;
  spec.topics = cfg.synth_topics;
  spec.zipf_alpha = cfg.zipf_alpha;
  spec.planted = corpus::default_planted_replies(cfg.planted_share);
  const auto pairs = corpus::synth_corpus(spec, cfg.train.seed);
  model::write_file_atomic(out_file(cfg, "corpus.tsv"), artifact_header(cfg, {}) + corpus::to_tsv(pairs));
  log << "synth: wrote " << pairs.size() << " pairs to " << (fs::path(cfg.out) / "corpus.tsv").string() << "\n";
}

void run_train(const RunConfig& cfg, std::ostream& log) {
  const std::string bytes = model::read_file(cfg.corpus);
  corpus::ReadOptions opts{cfg.train.max_query_len, cfg.train.max_reply_len};
  if (cfg.reverse) std::swap(opts.max_query_len, opts.max_reply_len);
  corpus::IngestResult data = corpus::ingest_text(bytes, cfg.vocab_limit, opts);
  std::vector<Pair> pairs = data.encoded.pairs;
  if (cfg.reverse) {
    for (auto& p : pairs) std::swap(p.query, p.reply);
  }
  const std::string header = artifact_header(cfg, {input_line("corpus", cfg.corpus, bytes)});
  log << "train: " << pairs.size() << " pairs, vocabulary " << data.vocab.size() << "\n";

  train::TrainState state = train::TrainState::fresh(cfg.train, data.vocab.size());
  std::string curve = header + train::learning_curve_header(false) + "\n";
  const auto ckpt_path = out_file(cfg, "model.ckpt");
  const auto curve_path = out_file(cfg, "learning_curve.tsv");
  train::train_epochs(pairs, state, [&](const train::EpochReport& r) {
    curve += train::learning_curve_line(r, false) + "\n";
    model::save_checkpoint(train::to_checkpoint(state, {{"vocab", data.vocab.serialize()}, {"run", header}}),
                           ckpt_path);
    model::write_file_atomic(curve_path, curve);
    log << "train: epoch " << r.epoch << " mean_ce " << r.mean_ce << " active " << r.active_fraction << " ("
        << r.wall_seconds << " s)\n";
  });
  if (state.config.epochs == 0) {
    model::save_checkpoint(train::to_checkpoint(state, {{"vocab", data.vocab.serialize()}, {"run", header}}),
                           ckpt_path);
    model::write_file_atomic(curve_path, curve);
  }
}

// Distinct encoded queries in order of first appearance.
std::vector<TokenSeq> distinct_queries(const std::vector<Pair>& pairs) {
  std::set<TokenSeq> seen;
  std::vector<TokenSeq> out;
  for (const auto& p : pairs) {
    if (seen.insert(p.query).second) out.push_back(p.query);
  }
  return out;
}

corpus::Encoded read_with_vocab(const std::string& bytes, const train::TrainConfig& tc, const corpus::Vocab& vocab) {
  auto text = corpus::parse_pairs(bytes, {tc.max_query_len, tc.max_reply_len});
  if (text.pairs.empty()) throw InvalidArgument("corpus has no usable pairs");
  return corpus::encode_pairs(text.pairs, vocab);
}

void run_generate(const RunConfig& cfg, std::ostream& log) {
  const std::string bytes = model::read_file(cfg.corpus);
  Loaded fwd = load_model(cfg.checkpoint);
  std::vector<std::string> inputs{input_line("corpus", cfg.corpus, bytes),
                                  input_line("checkpoint", cfg.checkpoint, fwd.bytes)};
  std::optional<Loaded> bwd;
  if (cfg.mmi) {
    bwd = load_model(cfg.backward_checkpoint);
    if (!(bwd->vocab == fwd.vocab)) throw InvalidArgument("backward checkpoint uses a different vocabulary");
    inputs.push_back(input_line("backward", cfg.backward_checkpoint, bwd->bytes));
  }
  const auto& tc = fwd.state.config;
  const auto queries = distinct_queries(read_with_vocab(bytes, tc, fwd.vocab).pairs);
  const infer::MmiWeights weights{cfg.mmi_lambda, cfg.mmi_gamma_len};

  std::string body = artifact_header(cfg, inputs);
  body += "# columns: query\trank\tscore\treply\n";
  for (const auto& q : queries) {
    infer::NBestList list = infer::beam_search(q, fwd.state.params, cfg.train.beam, tc.max_reply_len);
    if (cfg.mmi) list = infer::mmi_rerank(std::move(list), q, fwd.state.params, bwd->state.params, weights);
    const std::size_t keep = cfg.nbest == 0 ? list.hyps.size() : std::min(cfg.nbest, list.hyps.size());
    for (std::size_t r = 0; r < keep; ++r) {
      body += fwd.vocab.join(q) + "\t" + std::to_string(r + 1) + "\t" + fmt_double(list.hyps[r].score) + "\t" +
              fwd.vocab.join(list.hyps[r].tokens) + "\n";
    }
  }
  model::write_file_atomic(out_file(cfg, "generations.tsv"), body);
  log << "generate: " << queries.size() << " queries" << (cfg.mmi ? " (MMI reranked)" : "") << "\n";
}

void run_evaluate(const RunConfig& cfg, std::ostream& log) {
  const std::string bytes = model::read_file(cfg.corpus);
  const std::string gen_bytes = model::read_file(cfg.generations);
  Loaded fwd = load_model(cfg.checkpoint);
  const corpus::Encoded data = read_with_vocab(bytes, fwd.state.config, fwd.vocab);

  std::unordered_map<std::string, std::vector<TokenSeq>> references;
  for (const auto& p : data.pairs) references[fwd.vocab.join(p.query)].push_back(p.reply);

  std::vector<TokenSeq> top1;
  std::vector<std::vector<TokenSeq>> refs;
  std::istringstream in(gen_bytes);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      fields.push_back(line.substr(start, tab - start));
    }
    fields.push_back(line.substr(start));
    if (fields.size() != 4) {
      throw FormatError("generations line " + std::to_string(number) + ": expected 4 tab-separated fields");
    }
    if (fields[1] != "1") continue;
    auto it = references.find(fields[0]);
    if (it == references.end()) {
      throw FormatError("generations line " + std::to_string(number) + ": query not in the corpus");
    }
    top1.push_back(fwd.vocab.encode(corpus::split_words(fields[3])));
    refs.push_back(it->second);
  }
  if (top1.empty()) throw InvalidArgument("generations file " + cfg.generations + " has no top-ranked replies");

  const auto ppl = metrics::perplexity(fwd.state.params, data.pairs);
  const auto report = metrics::build_report(ppl, top1, refs, top1);
  const std::vector<std::string> inputs{input_line("corpus", cfg.corpus, bytes),
                                        input_line("checkpoint", cfg.checkpoint, fwd.bytes),
                                        input_line("generations", cfg.generations, gen_bytes)};
  const std::string header = artifact_header(cfg, inputs);

  nlohmann::ordered_json j;
  j["nrg"] = kVersion;
  j["command"] = cfg.command;
  j["seed"] = cfg.train.seed;
  j["config"] = cfg.to_map();
  j["inputs"] = inputs;
  j["metrics"] = nlohmann::ordered_json::parse(report.to_json());
  model::write_file_atomic(out_file(cfg, "metrics.txt"), header + report.to_text());
  model::write_file_atomic(out_file(cfg, "metrics.json"), j.dump(2) + "\n");
  log << "evaluate: ppl " << report.ppl << " distinct-1 " << report.distinct1 << " distinct-2 " << report.distinct2
      << "\n";
}

void run_analyze(const RunConfig& cfg, std::ostream& log) {
  const std::string bytes = model::read_file(cfg.corpus);
  const corpus::IngestResult data =
      corpus::ingest_text(bytes, cfg.vocab_limit, {cfg.train.max_query_len, cfg.train.max_reply_len});
  std::string body = artifact_header(cfg, {input_line("corpus", cfg.corpus, bytes)});
  body += corpus::analysis_report(data, {cfg.t, cfg.min_query_share});
  if (!cfg.lemma_universe.empty()) {
    std::mt19937_64 rng(cfg.train.seed);
    const lemma::LemmaUniverse u =
        cfg.lemma_universe == "chain" ? lemma::chain_universe(200, 3, rng) : lemma::random_universe({}, rng);
    body += "\n" + lemma::lemma_report(u, cfg.train.seed);
  }
  model::write_file_atomic(out_file(cfg, "analysis.txt"), body);
  log << "analyze: " << data.encoded.pairs.size() << " pairs\n";
}

}  // namespace

void dispatch(const RunConfig& config, std::ostream& log) {
  if (config.command == "synth") run_synth(config, log);
  else if (config.command == "train") run_train(config, log);
  else if (config.command == "generate") run_generate(config, log);
  else if (config.command == "evaluate") run_evaluate(config, log);
  else if (config.command == "analyze") run_analyze(config, log);
  else throw UsageError("unknown command '" + config.command + "'");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    dispatch(parse_args(args), err);
    return 0;
  } catch (const InfoRequest& e) {
    out << e.what();
    return 0;
  } catch (const UsageError& e) {
    err << "nrg: " << e.what() << "\nRun 'nrg --help' for usage.\n";
    return 2;
  } catch (const std::exception& e) {
    err << "nrg: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nrg::cli
