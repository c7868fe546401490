#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "nrg/tensor/tensor.hpp"

namespace nrg::tensor {

enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kShift,
  kTanh,
  kSigmoid,
  kSoftmax,
  kLogSoftmax,
  kConcat,
  kEmbed,
  kLog,
  kSum,
  kRelu,
  kPick,
  kSliceCols,
};

std::string_view op_name(Op op);

class Tape;

// Handle to a node in a Tape. Cheap to copy; valid as long as its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  // Value of a single-element tensor.
  double item() const;

  std::uint32_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Extra arguments for the ops that need them.
struct OpArgs {
  std::vector<std::size_t> ids;  // kEmbed rows, kPick columns
  double scalar = 0.0;           // kScale factor, kShift offset
  std::size_t begin = 0;         // kSliceCols
  std::size_t count = 0;         // kSliceCols
};

// Define-by-run computation record. Nodes are appended in execution order, so
// the node list is always topologically sorted. Confined to one thread.
//
// Binary ops accept an identically shaped right operand, a 1 x cols row that
// is broadcast down the rows, or a rows x 1 column broadcast across columns.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable leaf. backward() accumulates into param.grad(); the tensor must
  // outlive the tape and keep its values until backward() runs.
  Var param(Tensor& param);
  // Read-only leaf over external storage.
  Var input(const Tensor& value);
  // Leaf that owns its value.
  Var constant(Tensor value);

  // Applies one primitive and records it. Throws ShapeError on incompatible
  // inputs and NumericError if the result is not finite.
  Var apply(Op op, std::span<const Var> inputs, OpArgs args = {});

  // Reverse sweep from a single-element loss. Allowed once per tape.
  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  // Gradient of the loss with respect to any recorded node (after backward).
  std::span<const double> grad(Var v) const;

  // Recomputes every non-leaf node from the leaves and reports whether all
  // outputs are bit-identical to the recorded ones.
  bool replay() const;

  std::size_t size() const { return nodes_.size(); }
  Op op(std::uint32_t id) const { return nodes_[id].op; }
  std::span<const std::uint32_t> inputs(std::uint32_t id) const { return nodes_[id].inputs; }
  const Tensor& value(std::uint32_t id) const;

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::vector<std::uint32_t> inputs;
    OpArgs args;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor* grad_sink = nullptr;
  };

  Var push(Node node);
  Tensor compute(const Node& node) const;
  void propagate(std::uint32_t id);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool backward_done_ = false;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var shift(Var a, double offset);
Var tanh(Var a);
Var sigmoid(Var a);
// Along the last axis.
Var softmax(Var a);
// Along the last axis, computed as x - max - log(sum(exp(x - max))).
Var log_softmax(Var a);
// Along the last axis.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
// Gathers rows of `table`; gradients scatter-add back.
Var embed(Var table, std::vector<std::size_t> ids);
Var log(Var a);
// Sum of all entries, shape [1].
Var sum(Var a);
// max(0, x); sub-gradient 0 at x == 0.
Var relu(Var a);
// out[i] = a[i, ids[i]], shape rows x 1.
Var pick(Var a, std::vector<std::size_t> ids);
Var slice_cols(Var a, std::size_t begin, std::size_t count);

}  // namespace nrg::tensor
