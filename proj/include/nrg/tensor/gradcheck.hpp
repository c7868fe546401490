#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nrg/tensor/tape.hpp"

namespace nrg::tensor {

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;
  bool passed = false;
};

// Builds a scalar loss on the given tape from tensors it has captured.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor); the floor
  // keeps near-zero gradients from turning rounding noise into large ratios.
  double denominator_floor = 1e-3;
};

// Compares reverse-mode gradients with central finite differences for every
// entry of every listed tensor. Throws InvalidArgument if step <= 0 and
// StateError if two forward runs of `build` disagree.
GradCheckReport gradient_check(const LossBuilder& build, const std::vector<NamedTensor>& params,
                               const GradCheckOptions& options = {});

}  // namespace nrg::tensor
