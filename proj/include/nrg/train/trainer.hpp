#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nrg/model/checkpoint.hpp"
#include "nrg/tokens.hpp"
#include "nrg/train/adam.hpp"
#include "nrg/train/config.hpp"

namespace nrg::train {

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;
  double mean_ce = 0.0;      // over triplets, before each batch's update
  double mean_margin = 0.0;  // mean max{0, hinge argument}
  double active_fraction = 0.0;
  double wall_seconds = 0.0;
  std::vector<double> batch_losses;
};

// Everything a run needs to continue bit-exactly.
struct TrainState {
  TrainConfig config;
  model::ModelParams params;
  AdamState adam;
  std::mt19937_64 shuffle_rng;
  std::size_t epochs_done = 0;

  static TrainState fresh(const TrainConfig& config, std::size_t vocab_size);
};

// One pass over the corpus in a seed-derived shuffled order. Each triplet's
// negatives are redrawn from a generator keyed by (seed, epoch, pair index).
// With lambda == 0 no negatives are drawn. Stops after max_batches updates.
// A non-finite batch objective throws NumericError naming the batch index.
EpochReport train_epoch(std::span<const Pair> corpus, TrainState& state,
                        std::size_t max_batches = std::numeric_limits<std::size_t>::max());

// Runs the remaining configured epochs, calling on_epoch after each.
void train_epochs(std::span<const Pair> corpus, TrainState& state, const std::function<void(const EpochReport&)>& on_epoch);

// Learning-curve log line: epoch, mean_ce, mean_margin, active_fraction and,
// unless disabled, wall_seconds.
std::string learning_curve_header(bool with_timing = true);
std::string learning_curve_line(const EpochReport& report, bool with_timing = true);

// Sections "config", "adam", "rng" and "progress" are added to `extra`.
model::Checkpoint to_checkpoint(const TrainState& state,
                                std::vector<std::pair<std::string, std::string>> extra = {});
TrainState from_checkpoint(const model::Checkpoint& ckpt);

}  // namespace nrg::train
