#include "nrg/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>

#include "nrg/error.hpp"
#include "nrg/losses/negatives.hpp"

namespace nrg::train {

using losses::Triplet;

TrainState TrainState::fresh(const TrainConfig& config, std::size_t vocab_size) {
  config.validate();
  if (vocab_size <= kNumSpecial) throw InvalidArgument("train: vocabulary has no content tokens");
  TrainState s{.config = config,
               .params = model::ModelParams::uniform(config.dims(vocab_size), config.seed, config.init_scale),
               .adam = {},
               .shuffle_rng = std::mt19937_64(config.seed ^ 0x5eedf00dULL),
               .epochs_done = 0};
  s.adam = AdamState::for_params(s.params);
  return s;
}

EpochReport train_epoch(std::span<const Pair> corpus, TrainState& state, std::size_t max_batches) {
  if (corpus.empty()) throw InvalidArgument("train: empty corpus");
  const TrainConfig& cfg = state.config;
  cfg.validate();
  const auto ranking = cfg.ranking();
  const auto start = std::chrono::steady_clock::now();

  std::vector<TokenSeq> replies;
  replies.reserve(corpus.size());
  for (const auto& p : corpus) replies.push_back(p.reply);
  std::optional<losses::NegativeSampler> sampler;
  if (cfg.lambda != 0.0) sampler.emplace(replies, cfg.negatives);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), state.shuffle_rng);

  EpochReport report;
  report.epoch = state.epochs_done + 1;
  std::size_t seen = 0, active = 0;
  double ce_sum = 0.0, margin_sum = 0.0;

  for (std::size_t begin = 0; begin < order.size() && report.steps < max_batches; begin += cfg.batch) {
    const std::size_t end = std::min(order.size(), begin + cfg.batch);
    std::vector<Triplet> batch;
    for (std::size_t i = begin; i < end; ++i) {
      const Pair& pair = corpus[order[i]];
      Triplet tr{pair.query, pair.reply, {}};
      if (sampler) {
        auto rng = losses::triplet_rng(cfg.seed, report.epoch, order[i]);
        tr.negatives = sampler->sample(pair.reply, rng);
      }
      batch.push_back(std::move(tr));
    }

    state.params.zero_grad();
    double objective = 0.0;
    try {
      tensor::Tape tape;
      auto bound = model::bind_trainable(tape, state.params);
      auto loss = losses::ranking_loss_batch(bound, batch, ranking);
      objective = loss.objective.item();
      if (!std::isfinite(objective)) throw NumericError("objective is " + std::to_string(objective));
      tape.backward(loss.objective);
      for (const auto& row : loss.rows) {
        ce_sum += row.ce;
        margin_sum += row.margin_term;
        active += row.margin_active ? 1 : 0;
      }
    } catch (const NumericError& e) {
      throw NumericError("train: epoch " + std::to_string(report.epoch) + " batch " +
                         std::to_string(report.steps) + ": " + e.what());
    }
    clip_global_norm(state.params, cfg.clip_norm);
    adam_step(state.params, state.adam, cfg.lr);
    seen += batch.size();
    report.batch_losses.push_back(objective);
    report.steps += 1;
  }

  report.mean_ce = ce_sum / static_cast<double>(seen);
  report.mean_margin = margin_sum / static_cast<double>(seen);
  report.active_fraction = static_cast<double>(active) / static_cast<double>(seen);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  state.epochs_done += 1;
  return report;
}

void train_epochs(std::span<const Pair> corpus, TrainState& state, const std::function<void(const EpochReport&)>& on_epoch) {
  while (state.epochs_done < state.config.epochs) {
    EpochReport r = train_epoch(corpus, state);
    if (on_epoch) on_epoch(r);
  }
}

std::string learning_curve_header(bool with_timing) {
  std::string h = "epoch\tmean_ce\tmean_margin\tactive_fraction";
  return with_timing ? h + "\twall_seconds" : h;
}

std::string learning_curve_line(const EpochReport& r, bool with_timing) {
  char buf[160];
  int n = std::snprintf(buf, sizeof buf, "%zu\t%.10f\t%.10f\t%.6f", r.epoch, r.mean_ce, r.mean_margin,
                        r.active_fraction);
  if (with_timing) std::snprintf(buf + n, sizeof buf - n, "\t%.3f", r.wall_seconds);
  return buf;
}

model::Checkpoint to_checkpoint(const TrainState& state, std::vector<std::pair<std::string, std::string>> extra) {
  model::Checkpoint ckpt{.params = state.params, .sections = std::move(extra)};
  ckpt.sections.emplace_back("config", state.config.to_text());
  model::ByteWriter adam;
  adam.u64(state.adam.step);
  adam.u32(static_cast<std::uint32_t>(state.adam.m.size()));
  for (std::size_t i = 0; i < state.adam.m.size(); ++i) {
    adam.tensor(state.adam.m[i]);
    adam.tensor(state.adam.v[i]);
  }
  ckpt.sections.emplace_back("adam", adam.take());
  std::ostringstream rng;
  rng << state.shuffle_rng;
  ckpt.sections.emplace_back("rng", rng.str());
  model::ByteWriter progress;
  progress.u64(state.epochs_done);
  ckpt.sections.emplace_back("progress", progress.take());
  for (auto& p : ckpt.params.named()) p.tensor->drop_grad();
  return ckpt;
}

TrainState from_checkpoint(const model::Checkpoint& ckpt) {
  auto need = [&](const char* name) -> const std::string& {
    const std::string* s = ckpt.section(name);
    if (!s) throw FormatError(std::string("checkpoint has no '") + name + "' section");
    return *s;
  };
  TrainState st;
  st.config = TrainConfig::from_text(need("config"));
  st.params = ckpt.params;
  if (st.params.dims != st.config.dims(st.params.dims.src_vocab)) {
    throw FormatError("checkpoint config disagrees with its tensor dimensions");
  }
  model::ByteReader adam(need("adam"));
  st.adam.step = adam.u64();
  const std::uint32_t n = adam.u32();
  auto shapes = model::param_shapes(st.params.dims);
  if (n != shapes.size()) throw FormatError("checkpoint optimizer state has the wrong slot count");
  for (std::uint32_t i = 0; i < n; ++i) {
    st.adam.m.push_back(adam.tensor());
    st.adam.v.push_back(adam.tensor());
    if (st.adam.m.back().shape() != shapes[i].second || st.adam.v.back().shape() != shapes[i].second) {
      throw FormatError("checkpoint optimizer state for '" + shapes[i].first + "' has the wrong shape");
    }
  }
  if (!adam.done()) throw FormatError("trailing bytes in optimizer state");
  std::istringstream rng(need("rng"));
  rng >> st.shuffle_rng;
  if (rng.fail()) throw FormatError("checkpoint rng state unreadable");
  model::ByteReader progress(need("progress"));
  st.epochs_done = progress.u64();
  return st;
}

}  // namespace nrg::train
