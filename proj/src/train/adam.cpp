#include "nrg/train/adam.hpp"

#include <cmath>
#include <cstring>

#include "nrg/error.hpp"

namespace nrg::train {

using tensor::Tensor;

AdamState AdamState::for_params(std::span<const tensor::NamedTensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor->shape());
    s.v.emplace_back(p.tensor->shape());
  }
  return s;
}

AdamState AdamState::for_params(const model::ModelParams& params) {
  AdamState s;
  for (const auto& [name, t] : params.named()) {
    s.m.emplace_back(t->shape());
    s.v.emplace_back(t->shape());
  }
  return s;
}

bool AdamState::same_values(const AdamState& other) const {
  if (step != other.step || m.size() != other.m.size() || v.size() != other.v.size()) return false;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i].same_values(other.m[i]) || !v[i].same_values(other.v[i])) return false;
  }
  return true;
}

void adam_step(std::span<const tensor::NamedTensor> params, std::span<const Tensor> grads, AdamState& state,
               double lr, const AdamOptions& o) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " parameters, " + std::to_string(grads.size()) +
                     " gradients, " + std::to_string(state.m.size()) + " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].tensor->shape();
    if (grads[i].shape() != shape || state.m[i].shape() != shape || state.v[i].shape() != shape) {
      throw ShapeError("adam: parameter '" + params[i].name + "' has shape " + tensor::to_string(shape) +
                       " but gradient has shape " + tensor::to_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) throw NumericError("adam: non-finite gradient for '" + params[i].name + "'");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* w = params[i].tensor->data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    const double* g = grads[i].data();
    for (std::size_t j = 0, n = grads[i].size(); j < n; ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * (g[j] * g[j]);
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + o.eps);
    }
  }
}

namespace {

std::vector<Tensor> collect_grads(model::ModelParams& params) {
  std::vector<Tensor> grads;
  for (auto& p : params.named()) {
    Tensor g(p.tensor->shape());
    if (p.tensor->has_grad()) std::memcpy(g.data(), p.tensor->grad().data(), g.size() * sizeof(double));
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace

void adam_step(model::ModelParams& params, AdamState& state, double lr, const AdamOptions& options) {
  const auto grads = collect_grads(params);
  adam_step(params.named(), grads, state, lr, options);
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double x : g.values()) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= s;
    }
  }
  return norm;
}

double clip_global_norm(model::ModelParams& params, double max_norm) {
  double sq = 0.0;
  for (auto& p : params.named()) {
    for (double x : p.tensor->grad()) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params.named()) {
      for (double& x : p.tensor->grad()) x *= s;
    }
  }
  return norm;
}

}  // namespace nrg::train
