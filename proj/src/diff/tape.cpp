#include "infoalign/diff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "infoalign/errors.hpp"
#include "infoalign/numeric.hpp"
#include "infoalign/simd/kernels.hpp"

namespace infoalign::diff {
namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

Broadcast broadcast_kind(Op op, const Matrix& a, const Matrix& b) {
  if (a.same_shape(b)) return Broadcast::kNone;
  if (b.size() == 1) return Broadcast::kRightScalar;
  if (a.size() == 1) return Broadcast::kLeftScalar;
  throw DomainError(std::string(op_name(op)) + ": shape mismatch " + shape_str(a) + " vs " +
                    shape_str(b));
}

template <typename F>
Matrix binary(Op op, const Matrix& a, const Matrix& b, F f) {
  const Broadcast kind = broadcast_kind(op, a, b);
  const Matrix& shape = kind == Broadcast::kLeftScalar ? b : a;
  Matrix out(shape.rows(), shape.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = kind == Broadcast::kLeftScalar ? a[0] : a[i];
    const double y = kind == Broadcast::kRightScalar ? b[0] : b[i];
    out[i] = f(x, y);
  }
  return out;
}

template <typename F>
Matrix unary(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

// Adds g into target, summing over broadcast dimensions when target is 1 x 1.
void accumulate(Matrix& target, const Matrix& g) {
  if (target.size() == 1 && g.size() != 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i];
    target[0] += s;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) target[i] += g[i];
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kNeg: return "neg";
    case Op::kScale: return "scale";
    case Op::kAddConst: return "add_const";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSigmoid: return "sigmoid";
    case Op::kLogSigmoid: return "log_sigmoid";
    case Op::kSoftplus: return "softplus";
    case Op::kTanh: return "tanh";
    case Op::kSquare: return "square";
    case Op::kMatmulNT: return "matmul_nt";
    case Op::kAddRow: return "add_row";
    case Op::kLogSoftmaxRows: return "log_softmax_rows";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kRowSum: return "row_sum";
    case Op::kGather: return "gather";
    case Op::kLogSumExp: return "logsumexp";
  }
  return "unknown";
}

const Matrix& Var::value() const { return tape_->value(*this); }

void Tape::check_owner(Var v) const {
  if (!v.valid() || &v.tape() != this || v.index() >= nodes_.size()) {
    throw DomainError("Var does not belong to this tape");
  }
}

const Matrix& Tape::value(Var v) const {
  check_owner(v);
  return nodes_[v.index()].value;
}

Var Tape::record(Op op, Matrix value, Var a, Var b, double scalar,
                 std::vector<std::uint32_t> index) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by '" + std::string(op_name(op)) +
                       "' at tape node " + std::to_string(nodes_.size()));
  }
  Node node{op, std::move(value), Matrix{}, 0, 0, a.valid(), b.valid(), op == Op::kParameter,
            scalar, std::move(index)};
  if (a.valid()) {
    check_owner(a);
    node.a = a.index();
    node.needs_grad = node.needs_grad || nodes_[a.index()].needs_grad;
  }
  if (b.valid()) {
    check_owner(b);
    node.b = b.index();
    node.needs_grad = node.needs_grad || nodes_[b.index()].needs_grad;
  }
  nodes_.push_back(std::move(node));
  has_gradients_ = false;
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) { return record(Op::kConstant, std::move(value)); }

Var Tape::parameter(Matrix value) {
  Var v = record(Op::kParameter, std::move(value));
  parameters_.push_back(v.index());
  return v;
}

Var Tape::parameter_var(std::size_t id) const {
  if (id >= parameters_.size()) throw DomainError("parameter id out of range");
  return Var(const_cast<Tape*>(this), parameters_[id]);
}

void Tape::backward(Var root) {
  check_owner(root);
  const Matrix& rv = nodes_[root.index()].value;
  if (rv.size() != 1) throw DomainError("backward: root must be 1x1, got " + shape_str(rv));
  if (!std::isfinite(rv[0])) throw NumericError("backward: root value is not finite");

  for (Node& n : nodes_) {
    if (n.needs_grad) {
      n.grad = Matrix(n.value.rows(), n.value.cols());
    } else {
      n.grad = Matrix();
    }
  }
  Node& r = nodes_[root.index()];
  if (!r.needs_grad) r.grad = Matrix(1, 1);
  r.grad[0] = 1.0;
  for (std::size_t i = root.index() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.needs_grad && (n.has_a || n.has_b)) propagate(n);
  }
  has_gradients_ = true;
}

const Matrix& Tape::grad(Var v) const {
  check_owner(v);
  if (!has_gradients_) throw DomainError("grad requested before backward");
  const Node& n = nodes_[v.index()];
  // Nodes no parameter feeds into carry no buffer; their gradient is zero.
  if (!n.needs_grad && n.grad.size() != n.value.size()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

std::vector<Matrix> Tape::parameter_grads() const {
  if (!has_gradients_) throw DomainError("parameter_grads requested before backward");
  std::vector<Matrix> out;
  out.reserve(parameters_.size());
  for (std::uint32_t id : parameters_) out.push_back(nodes_[id].grad);
  return out;
}

void Tape::propagate(const Node& n) {
  const Matrix& g = n.grad;
  Node* a = n.has_a ? &nodes_[n.a] : nullptr;
  Node* b = n.has_b ? &nodes_[n.b] : nullptr;
  const bool ga = a != nullptr && a->needs_grad;
  const bool gb = b != nullptr && b->needs_grad;
  const auto& k = simd::kernels();

  switch (n.op) {
    case Op::kConstant:
    case Op::kParameter:
      break;
    case Op::kAdd:
      if (ga) accumulate(a->grad, g);
      if (gb) accumulate(b->grad, g);
      break;
    case Op::kSub:
      if (ga) accumulate(a->grad, g);
      if (gb) accumulate(b->grad, unary(g, [](double x) { return -x; }));
      break;
    case Op::kMul: {
      if (ga) {
        Matrix d(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * (b->value.size() == 1 ? b->value[0] : b->value[i]);
        accumulate(a->grad, d);
      }
      if (gb) {
        Matrix d(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * (a->value.size() == 1 ? a->value[0] : a->value[i]);
        accumulate(b->grad, d);
      }
      break;
    }
    case Op::kNeg:
      if (ga) accumulate(a->grad, unary(g, [](double x) { return -x; }));
      break;
    case Op::kScale:
      if (ga) k.axpy(n.scalar, g.data(), a->grad.data(), g.size());
      break;
    case Op::kAddConst:
      if (ga) accumulate(a->grad, g);
      break;
    case Op::kExp:
      if (ga) for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i] * n.value[i];
      break;
    case Op::kLog:
      if (ga) for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i] / a->value[i];
      break;
    case Op::kSigmoid:
      if (ga) for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      break;
    case Op::kLogSigmoid:
      if (ga) for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i] * infoalign::sigmoid(-a->value[i]);
      break;
    case Op::kSoftplus:
      if (ga) for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i] * infoalign::sigmoid(a->value[i]);
      break;
    case Op::kTanh:
      if (ga) for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    case Op::kSquare:
      if (ga) for (std::size_t i = 0; i < g.size(); ++i) a->grad[i] += 2.0 * g[i] * a->value[i];
      break;
    case Op::kMatmulNT: {
      const std::size_t m = a->value.rows();
      const std::size_t kk = a->value.cols();
      const std::size_t nn = b->value.rows();
      if (ga) k.matmul_nn(g.data(), b->value.data(), a->grad.data(), m, nn, kk, true);
      if (gb) k.matmul_tn(g.data(), a->value.data(), b->grad.data(), m, nn, kk, true);
      break;
    }
    case Op::kAddRow:
      if (ga) accumulate(a->grad, g);
      if (gb) {
        for (std::size_t r = 0; r < g.rows(); ++r) k.axpy(1.0, g.data() + r * g.cols(), b->grad.data(), g.cols());
      }
      break;
    case Op::kLogSoftmaxRows:
      if (ga) {
        for (std::size_t r = 0; r < g.rows(); ++r) {
          double gs = 0.0;
          for (std::size_t c = 0; c < g.cols(); ++c) gs += g(r, c);
          for (std::size_t c = 0; c < g.cols(); ++c) {
            a->grad(r, c) += g(r, c) - std::exp(n.value(r, c)) * gs;
          }
        }
      }
      break;
    case Op::kSum:
      if (ga) for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g[0];
      break;
    case Op::kMean:
      if (ga) {
        const double s = g[0] / static_cast<double>(a->value.size());
        for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += s;
      }
      break;
    case Op::kRowSum:
      if (ga) {
        for (std::size_t r = 0; r < a->value.rows(); ++r)
          for (std::size_t c = 0; c < a->value.cols(); ++c) a->grad(r, c) += g[r];
      }
      break;
    case Op::kGather:
      if (ga) for (std::size_t i = 0; i < n.index.size(); ++i) a->grad[n.index[i]] += g[i];
      break;
    case Op::kLogSumExp:
      if (ga) {
        const double lse = n.value[0];
        for (std::size_t i = 0; i < a->value.size(); ++i) a->grad[i] += g[0] * std::exp(a->value[i] - lse);
      }
      break;
  }
}

Var add(Var a, Var b) {
  return a.tape().record(Op::kAdd, binary(Op::kAdd, a.value(), b.value(), [](double x, double y) { return x + y; }), a, b);
}

Var sub(Var a, Var b) {
  return a.tape().record(Op::kSub, binary(Op::kSub, a.value(), b.value(), [](double x, double y) { return x - y; }), a, b);
}

Var mul(Var a, Var b) {
  return a.tape().record(Op::kMul, binary(Op::kMul, a.value(), b.value(), [](double x, double y) { return x * y; }), a, b);
}

Var neg(Var a) { return a.tape().record(Op::kNeg, unary(a.value(), [](double x) { return -x; }), a); }

Var scale(Var a, double c) {
  return a.tape().record(Op::kScale, unary(a.value(), [c](double x) { return c * x; }), a, {}, c);
}

Var add_const(Var a, double c) {
  return a.tape().record(Op::kAddConst, unary(a.value(), [c](double x) { return x + c; }), a, {}, c);
}

Var exp(Var a) {
  const Matrix& v = a.value();
  Matrix out(v.rows(), v.cols());
  simd::kernels().exp(v.data(), out.data(), v.size());
  return a.tape().record(Op::kExp, std::move(out), a);
}

Var log(Var a) {
  for (double x : a.value().values()) {
    if (!(x > 0.0)) {
      throw NumericError("'log' received a nonpositive input at tape node " +
                         std::to_string(a.tape().size()));
    }
  }
  return a.tape().record(Op::kLog, unary(a.value(), [](double x) { return std::log(x); }), a);
}

Var sigmoid(Var a) {
  return a.tape().record(Op::kSigmoid, unary(a.value(), [](double x) { return infoalign::sigmoid(x); }), a);
}

Var log_sigmoid(Var a) {
  return a.tape().record(Op::kLogSigmoid, unary(a.value(), [](double x) { return infoalign::log_sigmoid(x); }), a);
}

Var softplus(Var a) {
  return a.tape().record(Op::kSoftplus, unary(a.value(), [](double x) { return infoalign::softplus(x); }), a);
}

Var tanh(Var a) {
  const Matrix& v = a.value();
  Matrix out(v.rows(), v.cols());
  simd::kernels().tanh(v.data(), out.data(), v.size());
  return a.tape().record(Op::kTanh, std::move(out), a);
}

Var square(Var a) {
  return a.tape().record(Op::kSquare, unary(a.value(), [](double x) { return x * x; }), a);
}

Var matmul_nt(Var a, Var b) {
  const Matrix& x = a.value();
  const Matrix& w = b.value();
  if (x.cols() != w.cols()) {
    throw DomainError("matmul_nt: inner dimensions differ (" + shape_str(x) + " * " +
                      shape_str(w) + "^T)");
  }
  Matrix out(x.rows(), w.rows());
  simd::kernels().matmul_nt(x.data(), w.data(), out.data(), x.rows(), w.rows(), x.cols(), false);
  return a.tape().record(Op::kMatmulNT, std::move(out), a, b);
}

Var add_row(Var a, Var row) {
  const Matrix& x = a.value();
  const Matrix& r = row.value();
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw DomainError("add_row: row " + shape_str(r) + " does not match " + shape_str(x));
  }
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) out(i, c) += r[c];
  return a.tape().record(Op::kAddRow, std::move(out), a, row);
}

Var linear(Var x, Var weight, Var bias) { return add_row(matmul_nt(x, weight), bias); }

Var log_softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double lse = infoalign::logsumexp(x.row(r));
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) - lse;
  }
  return a.tape().record(Op::kLogSoftmaxRows, std::move(out), a);
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Op::kSum, Matrix::scalar(s), a);
}

Var mean(Var a) {
  if (a.value().empty()) throw DomainError("mean of an empty matrix");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Op::kMean, Matrix::scalar(s / static_cast<double>(a.value().size())), a);
}

Var row_sum(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v;
    out[r] = s;
  }
  return a.tape().record(Op::kRowSum, std::move(out), a);
}

Var gather(Var a, std::vector<std::uint32_t> flat_indices) {
  const Matrix& x = a.value();
  Matrix out(flat_indices.size(), 1);
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= x.size()) {
      throw DomainError("gather: index " + std::to_string(flat_indices[i]) + " out of range for " +
                        shape_str(x));
    }
    out[i] = x[flat_indices[i]];
  }
  return a.tape().record(Op::kGather, std::move(out), a, {}, 0.0, std::move(flat_indices));
}

Var logsumexp(Var a) {
  if (a.value().empty()) throw DomainError("logsumexp of an empty matrix");
  return a.tape().record(Op::kLogSumExp, Matrix::scalar(infoalign::logsumexp(a.value().values())), a);
}

}  // namespace infoalign::diff
