#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "nrg/losses/ranking.hpp"
#include "nrg/model/params.hpp"

namespace nrg::train {

// Defaults follow the published setup where it states one (lambda, gamma,
// learning rate, embedding and batch size, length limits, beam, four
// negatives, 512 hidden units, 7 epochs).
struct TrainConfig {
  double lambda = 0.1;
  double gamma = 0.18;
  double lr = 1e-4;
  std::size_t batch = 20;
  std::size_t epochs = 7;
  std::size_t embed = 200;
  std::size_t hidden = 512;
  std::size_t max_query_len = 30;
  std::size_t max_reply_len = 50;
  std::size_t beam = 10;
  std::size_t negatives = 4;
  losses::HingeMode hinge_mode = losses::HingeMode::kPaperLiteral;
  bool per_token_margin = false;
  double clip_norm = 5.0;
  double init_scale = 0.08;
  std::uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;

  // Throws InvalidArgument naming the first offending field.
  void validate() const;
  losses::RankingConfig ranking() const;
  model::ModelDims dims(std::size_t vocab_size) const;

  // Round-trips exactly: doubles use the shortest exact decimal form.
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;
  // Applies known keys over the current values; unknown keys throw.
  void apply(const std::map<std::string, std::string>& values);
  static TrainConfig from_text(const std::string& text);
};

}  // namespace nrg::train
