#pragma once

#include <cstddef>
#include <vector>

#include "infoalign/diff/matrix.hpp"
#include "infoalign/diff/tape.hpp"
#include "infoalign/rng.hpp"

namespace infoalign::diff {

// Three-layer perceptron: in -> hidden -> hidden -> out, tanh hidden
// activations, linear output. Weights are stored out x in.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);

  std::size_t input_dim() const { return in_; }
  std::size_t hidden_dim() const { return hidden_; }
  std::size_t output_dim() const { return out_; }

  // Order: W1, b1, W2, b2, W3, b3.
  std::vector<Matrix>& parameters() { return params_; }
  const std::vector<Matrix>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  // Registers the six parameter matrices on `tape` and returns their handles.
  std::vector<Var> bind(Tape& tape) const;
  // Forward pass of a batch (rows = samples) using handles from bind().
  static Var forward(const std::vector<Var>& bound, Var x);

  // Numeric forward without gradient bookkeeping the caller cares about.
  Matrix evaluate(const Matrix& x) const;

 private:
  std::size_t in_ = 0;
  std::size_t hidden_ = 0;
  std::size_t out_ = 0;
  std::vector<Matrix> params_;
};

}  // namespace infoalign::diff
