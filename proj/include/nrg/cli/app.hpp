#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "nrg/train/config.hpp"

namespace nrg::cli {

inline constexpr const char* kVersion = "1.0.0";

// Raised for malformed command lines and config files; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;  // train | generate | evaluate | analyze | synth

  std::string corpus;
  std::string checkpoint;
  std::string backward_checkpoint;
  std::string generations;
  std::string out;
  std::string lemma_universe;  // "", "random" or "chain"

  train::TrainConfig train;
  bool reverse = false;
  std::size_t vocab_limit = 0;

  bool mmi = false;
  double mmi_lambda = 0.5;
  double mmi_gamma_len = 0.1;
  std::size_t nbest = 0;  // 0 keeps the whole beam

  std::size_t t = 0;
  double min_query_share = 0.005;

  std::size_t synth_queries = 2000;
  std::size_t synth_vocab = 300;
  std::size_t synth_topics = 10;
  double planted_share = 0.5;
  double zipf_alpha = 1.0;

  // Every scalar setting, keyed as in config files.
  std::map<std::string, std::string> to_map() const;
  // Unknown keys and unparsable values throw UsageError naming the key.
  void apply(const std::map<std::string, std::string>& values);
};

// Reads "key = value" lines. Blank lines and '#' comments are skipped, except
// that "# config: key = value" header lines are read as settings, so an
// artifact header can be fed back as a config file.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Flags override config-file values, which override defaults.
RunConfig parse_args(const std::vector<std::string>& args);

// Provenance block written at the top of text artifacts; every line starts
// with "# ".
std::string artifact_header(const RunConfig& config, const std::vector<std::string>& inputs);

// Runs one subcommand; progress goes to `log`. Throws on failure.
void dispatch(const RunConfig& config, std::ostream& log);

// Parses and dispatches. Returns 0 on success, 2 on usage errors and 1 on
// any other failure, with the diagnostic written to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nrg::cli
