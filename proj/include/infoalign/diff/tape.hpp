#pragma once

// Reverse-mode automatic differentiation over matrix-valued nodes.
//
// A Tape owns every node created through it; a Var is a (tape, index) handle.
// Node values are Matrix objects, so a whole minibatch layer is one node and
// the inner loops run through the SIMD kernel table.
//
// Gradient policy: backward() zeroes every gradient before propagating, so
// calling it twice on the same root yields the same gradients (idempotent,
// never accumulating across calls). A Tape is single-threaded.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "infoalign/diff/matrix.hpp"

namespace infoalign::diff {

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::uint32_t index() const { return index_; }

  const Matrix& value() const;
  double item() const { return value().item(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,
  kNeg,
  kScale,
  kAddConst,
  kExp,
  kLog,
  kSigmoid,
  kLogSigmoid,
  kSoftplus,
  kTanh,
  kSquare,
  kMatmulNT,
  kAddRow,
  kLogSoftmaxRows,
  kSum,
  kMean,
  kRowSum,
  kGather,
  kLogSumExp,
};

std::string_view op_name(Op op);

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value) { return constant(Matrix::scalar(value)); }
  // Trainable leaf. Parameters are numbered in creation order.
  Var parameter(Matrix value);

  std::size_t size() const { return nodes_.size(); }
  std::size_t num_parameters() const { return parameters_.size(); }
  Var parameter_var(std::size_t id) const;

  // Zeroes all gradients, seeds d(root)/d(root) = 1 and propagates in reverse
  // creation order. Root must be 1 x 1 and finite.
  void backward(Var root);
  bool has_gradients() const { return has_gradients_; }

  // Zero for nodes the root does not depend on.
  const Matrix& grad(Var v) const;
  std::vector<Matrix> parameter_grads() const;

  const Matrix& value(Var v) const;

  // Low-level recording used by the op functions below. Checks that `value`
  // is finite and throws NumericError naming the op otherwise.
  Var record(Op op, Matrix value, Var a = {}, Var b = {}, double scalar = 0.0,
             std::vector<std::uint32_t> index = {});

 private:
  struct Node {
    Op op;
    Matrix value;
    mutable Matrix grad;
    std::uint32_t a;
    std::uint32_t b;
    bool has_a;
    bool has_b;
    bool needs_grad;
    double scalar;
    std::vector<std::uint32_t> index;
  };

  void propagate(const Node& node);
  void check_owner(Var v) const;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> parameters_;
  bool has_gradients_ = false;
};

// Elementwise binary ops accept equal shapes, or a 1 x 1 operand on either side.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_const(Var a, double c);

Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var log_sigmoid(Var a);
Var softplus(Var a);  // max(z,0) + log1p(exp(-|z|))
Var tanh(Var a);
Var square(Var a);

Var matmul_nt(Var a, Var b);                // a[m x k] * b[n x k]^T
Var add_row(Var a, Var row);                // a[m x n] + row[1 x n] on every row
Var linear(Var x, Var weight, Var bias);    // x W^T + b
Var log_softmax_rows(Var a);                // max-subtracted, per row

Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);                         // m x n -> m x 1
Var gather(Var a, std::vector<std::uint32_t> flat_indices);  // -> k x 1
Var logsumexp(Var a);                       // over all entries -> 1 x 1

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace infoalign::diff
