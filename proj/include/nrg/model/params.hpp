#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nrg/tensor/gradcheck.hpp"
#include "nrg/tensor/tensor.hpp"

namespace nrg::model {

using tensor::NamedTensor;
using tensor::Tensor;

struct ModelDims {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t embed = 32;
  std::size_t hidden = 64;
  std::size_t max_query_len = 30;
  std::size_t max_reply_len = 50;

  bool operator==(const ModelDims&) const = default;
};

// Weights of the attentional encoder-decoder. Row-vector convention:
// activations are rows, so layers compute x * W + b.
struct ModelParams {
  ModelDims dims;
  Tensor src_embed;  // V_src x E
  Tensor tgt_embed;  // V_tgt x E
  Tensor enc_w;      // (E + H) x 4H, gate order i, f, g, o
  Tensor enc_b;      // 1 x 4H
  Tensor dec_w;      // (E + H + H) x 4H; input is [embedding, context, hidden]
  Tensor dec_b;      // 1 x 4H
  Tensor att_w;      // H x H, applied to the decoder state
  Tensor att_u;      // H x H, applied to annotations
  Tensor att_v;      // H x 1
  Tensor out_w;      // H x V_tgt
  Tensor out_b;      // 1 x V_tgt

  static ModelParams zeros(const ModelDims& dims);
  // Every entry uniform in [-scale, scale], drawn in named() order.
  static ModelParams uniform(const ModelDims& dims, std::uint64_t seed, double scale = 0.08);

  std::vector<NamedTensor> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  void zero_grad();
  std::size_t parameter_count() const;
  bool same_values(const ModelParams& other) const;
};

// Shapes of every tensor, recoverable from the dimensions alone.
std::vector<std::pair<std::string, tensor::Shape>> param_shapes(const ModelDims& dims);

}  // namespace nrg::model
