#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nrg/model/params.hpp"

namespace nrg::train {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<tensor::Tensor> m;
  std::vector<tensor::Tensor> v;
  std::uint64_t step = 0;

  // Zero moments shaped like `params`.
  static AdamState for_params(std::span<const tensor::NamedTensor> params);
  static AdamState for_params(const model::ModelParams& params);
  bool same_values(const AdamState& other) const;
};

// One bias-corrected Adam update of every parameter from its paired gradient.
// Throws ShapeError on any shape mismatch and NumericError on a non-finite
// gradient; nothing is modified in either case.
void adam_step(std::span<const tensor::NamedTensor> params, std::span<const tensor::Tensor> grads, AdamState& state,
               double lr, const AdamOptions& options = {});

// Uses the gradients accumulated on the parameter tensors.
void adam_step(model::ModelParams& params, AdamState& state, double lr, const AdamOptions& options = {});

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_global_norm(std::span<tensor::Tensor> grads, double max_norm);
double clip_global_norm(model::ModelParams& params, double max_norm);

}  // namespace nrg::train
