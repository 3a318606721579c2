#include "infoalign/diff/mlp.hpp"

#include <cmath>

#include "infoalign/errors.hpp"

namespace infoalign::diff {
namespace {

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for both weights and biases.
Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (double& v : m.values()) v = bound * (2.0 * uniform01(rng) - 1.0);
  return m;
}

}  // namespace

Mlp::Mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng)
    : in_(in), hidden_(hidden), out_(out) {
  if (in == 0 || hidden == 0 || out == 0) throw DomainError("Mlp: zero-sized layer");
  params_.push_back(uniform_init(hidden, in, in, rng));
  params_.push_back(uniform_init(1, hidden, in, rng));
  params_.push_back(uniform_init(hidden, hidden, hidden, rng));
  params_.push_back(uniform_init(1, hidden, hidden, rng));
  params_.push_back(uniform_init(out, hidden, hidden, rng));
  params_.push_back(uniform_init(1, out, hidden, rng));
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix& p : params_) n += p.size();
  return n;
}

std::vector<Var> Mlp::bind(Tape& tape) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const Matrix& p : params_) out.push_back(tape.parameter(p));
  return out;
}

Var Mlp::forward(const std::vector<Var>& bound, Var x) {
  if (bound.size() != 6) throw DomainError("Mlp::forward expects 6 bound parameters");
  Var h1 = tanh(linear(x, bound[0], bound[1]));
  Var h2 = tanh(linear(h1, bound[2], bound[3]));
  return linear(h2, bound[4], bound[5]);
}

Matrix Mlp::evaluate(const Matrix& x) const {
  Tape tape;
  std::vector<Var> bound;
  for (const Matrix& p : params_) bound.push_back(tape.constant(p));
  return forward(bound, tape.constant(x)).value();
}

}  // namespace infoalign::diff
