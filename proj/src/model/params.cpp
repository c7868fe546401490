#include "nrg/model/params.hpp"

#include <random>

#include "nrg/error.hpp"

namespace nrg::model {

std::vector<std::pair<std::string, tensor::Shape>> param_shapes(const ModelDims& d) {
  if (d.src_vocab == 0 || d.tgt_vocab == 0 || d.embed == 0 || d.hidden == 0) {
    throw ShapeError("model dimensions must all be positive");
  }
  const std::size_t h = d.hidden, e = d.embed;
  return {
      {"src_embed", {d.src_vocab, e}}, {"tgt_embed", {d.tgt_vocab, e}},
      {"enc_w", {e + h, 4 * h}},       {"enc_b", {1, 4 * h}},
      {"dec_w", {e + 2 * h, 4 * h}},   {"dec_b", {1, 4 * h}},
      {"att_w", {h, h}},               {"att_u", {h, h}},
      {"att_v", {h, 1}},               {"out_w", {h, d.tgt_vocab}},
      {"out_b", {1, d.tgt_vocab}},
  };
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  auto shapes = param_shapes(dims);
  auto slots = p.named();
  for (std::size_t i = 0; i < slots.size(); ++i) *slots[i].tensor = Tensor(shapes[i].second);
  return p;
}

ModelParams ModelParams::uniform(const ModelDims& dims, std::uint64_t seed, double scale) {
  ModelParams p = zeros(dims);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& slot : p.named()) {
    for (double& v : slot.tensor->values()) v = dist(rng);
  }
  return p;
}

std::vector<NamedTensor> ModelParams::named() {
  return {{"src_embed", &src_embed}, {"tgt_embed", &tgt_embed}, {"enc_w", &enc_w}, {"enc_b", &enc_b},
          {"dec_w", &dec_w},         {"dec_b", &dec_b},         {"att_w", &att_w}, {"att_u", &att_u},
          {"att_v", &att_v},         {"out_w", &out_w},         {"out_b", &out_b}};
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  auto& self = const_cast<ModelParams&>(*this);
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& slot : self.named()) out.emplace_back(slot.name, slot.tensor);
  return out;
}

void ModelParams::zero_grad() {
  for (auto& slot : named()) slot.tensor->zero_grad();
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

bool ModelParams::same_values(const ModelParams& other) const {
  if (!(dims == other.dims)) return false;
  auto a = named();
  auto b = other.named();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].second->same_values(*b[i].second)) return false;
  }
  return true;
}

}  // namespace nrg::model
