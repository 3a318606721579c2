#pragma once

#include <cstddef>
#include <vector>

#include "infoalign/diff/matrix.hpp"

namespace infoalign::diff {

enum class Method { kPlain, kAdam };

struct OptimizerConfig {
  Method method = Method::kPlain;
  double step_size = 0.05;
  double moment_decay_1 = 0.9;
  double moment_decay_2 = 0.999;
  double epsilon = 1e-8;
};

// First-order optimizer. Adam moments are allocated lazily on the first step
// and keyed by position, so the parameter list must keep its order and shapes.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  // Refuses (throws NumericError, parameters untouched) if any gradient is
  // non-finite; throws DomainError on a shape mismatch.
  void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads);

  const OptimizerConfig& config() const { return config_; }
  std::size_t steps_taken() const { return t_; }

 private:
  OptimizerConfig config_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace infoalign::diff
