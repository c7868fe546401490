#include "nrg/tensor/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nrg/error.hpp"
#include "nrg/simd/kernels.hpp"

namespace nrg::tensor {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "elementwise-mul";
    case Op::kScale: return "scale";
    case Op::kShift: return "shift";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kSoftmax: return "softmax";
    case Op::kLogSoftmax: return "log-softmax";
    case Op::kConcat: return "concat";
    case Op::kEmbed: return "embed-lookup";
    case Op::kLog: return "log";
    case Op::kSum: return "sum";
    case Op::kRelu: return "max-with-zero";
    case Op::kPick: return "pick";
    case Op::kSliceCols: return "slice-cols";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_->value(id_); }

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(v.shape()));
  return v[0];
}

namespace {

enum class Broadcast { kSame, kRow, kCol };

Broadcast broadcast_kind(Op op, const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
  throw ShapeError(std::string(op_name(op)) + ": cannot combine shapes " + to_string(a.shape()) +
                   " and " + to_string(b.shape()));
}

inline std::size_t bindex(Broadcast k, std::size_t r, std::size_t c, std::size_t cols) {
  switch (k) {
    case Broadcast::kSame: return r * cols + c;
    case Broadcast::kRow: return c;
    case Broadcast::kCol: return r;
  }
  return 0;
}

void expect_arity(Op op, std::size_t got, std::size_t want) {
  if (got != want) {
    throw ShapeError(std::string(op_name(op)) + ": expected " + std::to_string(want) +
                     " inputs, got " + std::to_string(got));
  }
}

}  // namespace

Var Tape::push(Node node) {
  if (backward_done_) throw StateError("tape already consumed by backward(); record a new forward pass");
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(Tensor& param) {
  Node n;
  n.external = &param;
  n.grad_sink = &param;
  return push(std::move(n));
}

Var Tape::input(const Tensor& value) {
  Node n;
  n.external = &value;
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

const Tensor& Tape::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Var Tape::apply(Op op, std::span<const Var> inputs, OpArgs args) {
  if (op == Op::kLeaf) throw InvalidArgument("apply: leaves are created with param/input/constant");
  Node n;
  n.op = op;
  n.args = std::move(args);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape() != this) throw InvalidArgument(std::string(op_name(op)) + ": input from another tape");
    n.inputs.push_back(v.id());
  }
  n.value = compute(n);
  if (!n.value.all_finite()) {
    throw NumericError(std::string(op_name(op)) + ": non-finite output (shape " +
                       to_string(n.value.shape()) + ")");
  }
  return push(std::move(n));
}

Tensor Tape::compute(const Node& n) const {
  const auto& k = simd::active();
  const std::size_t arity = n.inputs.size();
  auto in = [&](std::size_t i) -> const Tensor& { return value(n.inputs[i]); };

  switch (n.op) {
    case Op::kLeaf:
      break;

    case Op::kMatmul: {
      expect_arity(n.op, arity, 2);
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.rows() || b.shape().size() > 2) {
        throw ShapeError("matmul: inner dimensions differ for " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
      }
      Tensor out = Tensor::matrix(a.rows(), b.cols());
      k.gemm_nn(a.rows(), b.cols(), a.cols(), a.data(), b.data(), out.data());
      return out;
    }

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      expect_arity(n.op, arity, 2);
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const Broadcast bk = broadcast_kind(n.op, a, b);
      Tensor out(a.shape());
      const std::size_t rows = a.rows(), cols = a.cols();
      if (n.op == Op::kMul && bk == Broadcast::kSame) {
        k.mul(a.size(), a.data(), b.data(), out.data());
        return out;
      }
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const double x = a[r * cols + c];
          const double y = b[bindex(bk, r, c, cols)];
          double& o = out[r * cols + c];
          switch (n.op) {
            case Op::kAdd: o = x + y; break;
            case Op::kSub: o = x - y; break;
            default: o = x * y; break;
          }
        }
      }
      return out;
    }

    case Op::kScale:
    case Op::kShift: {
      expect_arity(n.op, arity, 1);
      Tensor out = in(0);
      out.drop_grad();
      for (double& v : out.values()) v = n.op == Op::kScale ? v * n.args.scalar : v + n.args.scalar;
      return out;
    }

    case Op::kTanh:
    case Op::kSigmoid:
    case Op::kLog:
    case Op::kRelu: {
      expect_arity(n.op, arity, 1);
      Tensor out = in(0);
      out.drop_grad();
      for (double& v : out.values()) {
        switch (n.op) {
          case Op::kTanh: v = std::tanh(v); break;
          case Op::kSigmoid: v = 1.0 / (1.0 + std::exp(-v)); break;
          case Op::kLog: v = std::log(v); break;
          default: v = v > 0.0 ? v : 0.0; break;
        }
      }
      return out;
    }

    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      expect_arity(n.op, arity, 1);
      const Tensor& a = in(0);
      Tensor out(a.shape());
      const std::size_t rows = a.rows(), cols = a.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.data() + r * cols;
        double* y = out.data() + r * cols;
        const double mx = *std::max_element(x, x + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += std::exp(x[c] - mx);
        if (n.op == Op::kSoftmax) {
          for (std::size_t c = 0; c < cols; ++c) y[c] = std::exp(x[c] - mx) / total;
        } else {
          const double lse = std::log(total);
          for (std::size_t c = 0; c < cols; ++c) y[c] = x[c] - mx - lse;
        }
      }
      return out;
    }

    case Op::kConcat: {
      if (arity == 0) throw ShapeError("concat: no inputs");
      const std::size_t rows = in(0).rows();
      std::size_t cols = 0;
      for (std::size_t i = 0; i < arity; ++i) {
        if (in(i).rows() != rows) {
          throw ShapeError("concat: row counts differ for " + to_string(in(0).shape()) + " and " +
                           to_string(in(i).shape()));
        }
        cols += in(i).cols();
      }
      Tensor out = Tensor::matrix(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        double* dst = out.data() + r * cols;
        for (std::size_t i = 0; i < arity; ++i) {
          const Tensor& p = in(i);
          std::copy_n(p.data() + r * p.cols(), p.cols(), dst);
          dst += p.cols();
        }
      }
      return out;
    }

    case Op::kEmbed: {
      expect_arity(n.op, arity, 1);
      const Tensor& table = in(0);
      const auto& ids = n.args.ids;
      if (ids.empty()) throw ShapeError("embed-lookup: empty id list");
      Tensor out = Tensor::matrix(ids.size(), table.cols());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= table.rows()) {
          throw ShapeError("embed-lookup: id " + std::to_string(ids[i]) + " out of range for table " +
                           to_string(table.shape()));
        }
        std::copy_n(table.data() + ids[i] * table.cols(), table.cols(), out.data() + i * table.cols());
      }
      return out;
    }

    case Op::kSum: {
      expect_arity(n.op, arity, 1);
      double total = 0.0;
      for (double v : in(0).values()) total += v;
      return Tensor::scalar(total);
    }

    case Op::kPick: {
      expect_arity(n.op, arity, 1);
      const Tensor& a = in(0);
      const auto& ids = n.args.ids;
      if (ids.size() != a.rows()) {
        throw ShapeError("pick: " + std::to_string(ids.size()) + " ids for tensor " + to_string(a.shape()));
      }
      Tensor out = Tensor::matrix(a.rows(), 1);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        if (ids[r] >= a.cols()) {
          throw ShapeError("pick: column " + std::to_string(ids[r]) + " out of range for " + to_string(a.shape()));
        }
        out[r] = a.at(r, ids[r]);
      }
      return out;
    }

    case Op::kSliceCols: {
      expect_arity(n.op, arity, 1);
      const Tensor& a = in(0);
      if (n.args.count == 0 || n.args.begin + n.args.count > a.cols()) {
        throw ShapeError("slice-cols: range [" + std::to_string(n.args.begin) + ", " +
                         std::to_string(n.args.begin + n.args.count) + ") outside " + to_string(a.shape()));
      }
      Tensor out = Tensor::matrix(a.rows(), n.args.count);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        std::copy_n(a.data() + r * a.cols() + n.args.begin, n.args.count, out.data() + r * n.args.count);
      }
      return out;
    }
  }
  throw InvalidArgument("unknown op");
}

void Tape::backward(Var loss) {
  if (backward_done_) throw StateError("backward() already ran on this tape; re-run the forward pass");
  if (nodes_.empty()) throw StateError("backward() on an empty tape");
  if (loss.tape() != this) throw InvalidArgument("backward(): loss belongs to another tape");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward(): loss must have shape [1], got " + to_string(value(loss.id()).shape()));
  }
  backward_done_ = true;
  grads_.assign(nodes_.size(), {});
  grads_[loss.id()].assign(1, 1.0);
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    if (grads_[id].empty()) continue;
    propagate(id);
  }
}

std::span<const double> Tape::grad(Var v) const {
  if (!backward_done_) throw StateError("grad(): backward() has not run");
  return grads_[v.id()];
}

void Tape::propagate(std::uint32_t id) {
  const Node& n = nodes_[id];
  const std::vector<double>& g = grads_[id];
  const auto& k = simd::active();

  auto sink = [&](std::size_t i) -> std::vector<double>& {
    std::vector<double>& s = grads_[n.inputs[i]];
    if (s.empty()) s.assign(value(n.inputs[i]).size(), 0.0);
    return s;
  };
  auto in = [&](std::size_t i) -> const Tensor& { return value(n.inputs[i]); };
  const Tensor& out = n.external ? *n.external : n.value;

  switch (n.op) {
    case Op::kLeaf:
      if (n.grad_sink) {
        auto dst = n.grad_sink->grad();
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      }
      return;

    case Op::kMatmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t m = a.rows(), kk = a.cols(), nn = b.cols();
      k.gemm_nt(m, kk, nn, g.data(), b.data(), sink(0).data());
      k.gemm_tn(kk, nn, m, a.data(), g.data(), sink(1).data());
      return;
    }

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const Broadcast bk = broadcast_kind(n.op, a, b);
      const std::size_t rows = a.rows(), cols = a.cols();
      auto& ga = sink(0);
      auto& gb = sink(1);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t ia = r * cols + c;
          const std::size_t ib = bindex(bk, r, c, cols);
          switch (n.op) {
            case Op::kAdd:
              ga[ia] += g[ia];
              gb[ib] += g[ia];
              break;
            case Op::kSub:
              ga[ia] += g[ia];
              gb[ib] -= g[ia];
              break;
            default:
              ga[ia] += g[ia] * b[ib];
              gb[ib] += g[ia] * a[ia];
              break;
          }
        }
      }
      return;
    }

    case Op::kScale: {
      auto& ga = sink(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.args.scalar * g[i];
      return;
    }
    case Op::kShift: {
      auto& ga = sink(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      return;
    }
    case Op::kTanh: {
      auto& ga = sink(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - out[i] * out[i]);
      return;
    }
    case Op::kSigmoid: {
      auto& ga = sink(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * out[i] * (1.0 - out[i]);
      return;
    }
    case Op::kLog: {
      auto& ga = sink(0);
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
      return;
    }
    case Op::kRelu: {
      auto& ga = sink(0);
      const Tensor& a = in(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a[i] > 0.0) ga[i] += g[i];
      }
      return;
    }

    case Op::kSoftmax:
    case Op::kLogSoftmax: {
      auto& ga = sink(0);
      const std::size_t rows = out.rows(), cols = out.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = out.data() + r * cols;
        const double* gy = g.data() + r * cols;
        double* gx = ga.data() + r * cols;
        if (n.op == Op::kSoftmax) {
          const double inner = k.dot(cols, gy, y);
          for (std::size_t c = 0; c < cols; ++c) gx[c] += y[c] * (gy[c] - inner);
        } else {
          double total = 0.0;
          for (std::size_t c = 0; c < cols; ++c) total += gy[c];
          for (std::size_t c = 0; c < cols; ++c) gx[c] += gy[c] - std::exp(y[c]) * total;
        }
      }
      return;
    }

    case Op::kConcat: {
      const std::size_t rows = out.rows(), cols = out.cols();
      std::size_t offset = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const std::size_t pc = in(i).cols();
        auto& gp = sink(i);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* src = g.data() + r * cols + offset;
          double* dst = gp.data() + r * pc;
          for (std::size_t c = 0; c < pc; ++c) dst[c] += src[c];
        }
        offset += pc;
      }
      return;
    }

    case Op::kEmbed: {
      auto& gt = sink(0);
      const std::size_t cols = out.cols();
      const auto& ids = n.args.ids;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        k.axpy(cols, 1.0, g.data() + i * cols, gt.data() + ids[i] * cols);
      }
      return;
    }

    case Op::kSum: {
      auto& ga = sink(0);
      for (double& v : ga) v += g[0];
      return;
    }

    case Op::kPick: {
      auto& ga = sink(0);
      const std::size_t cols = in(0).cols();
      for (std::size_t r = 0; r < n.args.ids.size(); ++r) ga[r * cols + n.args.ids[r]] += g[r];
      return;
    }

    case Op::kSliceCols: {
      auto& ga = sink(0);
      const std::size_t cols = in(0).cols();
      for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < n.args.count; ++c) ga[r * cols + n.args.begin + c] += g[r * n.args.count + c];
      }
      return;
    }
  }
}

bool Tape::replay() const {
  for (const Node& n : nodes_) {
    if (n.op == Op::kLeaf) continue;
    if (!compute(n).same_values(n.value)) return false;
  }
  return true;
}

namespace {

Var unary(Op op, Var a, OpArgs args = {}) {
  const Var in[] = {a};
  return a.tape()->apply(op, in, std::move(args));
}

Var binary(Op op, Var a, Var b) {
  if (a.tape() != b.tape()) throw InvalidArgument(std::string(op_name(op)) + ": operands on different tapes");
  const Var in[] = {a, b};
  return a.tape()->apply(op, in);
}

}  // namespace

Var matmul(Var a, Var b) { return binary(Op::kMatmul, a, b); }
Var add(Var a, Var b) { return binary(Op::kAdd, a, b); }
Var sub(Var a, Var b) { return binary(Op::kSub, a, b); }
Var mul(Var a, Var b) { return binary(Op::kMul, a, b); }
Var scale(Var a, double factor) { return unary(Op::kScale, a, {.scalar = factor}); }
Var shift(Var a, double offset) { return unary(Op::kShift, a, {.scalar = offset}); }
Var tanh(Var a) { return unary(Op::kTanh, a); }
Var sigmoid(Var a) { return unary(Op::kSigmoid, a); }
Var softmax(Var a) { return unary(Op::kSoftmax, a); }
Var log_softmax(Var a) { return unary(Op::kLogSoftmax, a); }
Var log(Var a) { return unary(Op::kLog, a); }
Var sum(Var a) { return unary(Op::kSum, a); }
Var relu(Var a) { return unary(Op::kRelu, a); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  return parts.front().tape()->apply(Op::kConcat, parts);
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var embed(Var table, std::vector<std::size_t> ids) {
  return unary(Op::kEmbed, table, {.ids = std::move(ids)});
}

Var pick(Var a, std::vector<std::size_t> ids) { return unary(Op::kPick, a, {.ids = std::move(ids)}); }

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  return unary(Op::kSliceCols, a, {.begin = begin, .count = count});
}

}  // namespace nrg::tensor
