#include "infoalign/diff/optimizer.hpp"

#include <cmath>
#include <string>

#include "infoalign/errors.hpp"

namespace infoalign::diff {

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.step_size > 0.0) || !std::isfinite(config_.step_size)) {
    throw ConfigError("optimizer step_size must be positive and finite");
  }
  if (config_.method == Method::kAdam) {
    if (!(config_.moment_decay_1 >= 0.0 && config_.moment_decay_1 < 1.0) ||
        !(config_.moment_decay_2 >= 0.0 && config_.moment_decay_2 < 1.0) ||
        !(config_.epsilon > 0.0)) {
      throw ConfigError("adam decays must lie in [0, 1) and epsilon must be positive");
    }
  }
}

void Optimizer::step(std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  if (params.size() != grads.size()) {
    throw DomainError("optimizer: " + std::to_string(params.size()) + " parameters but " +
                      std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i])) {
      throw DomainError("optimizer: shape mismatch for parameter " + std::to_string(i));
    }
    if (!grads[i].all_finite()) {
      throw NumericError("optimizer: non-finite gradient for parameter " + std::to_string(i) +
                         "; step refused");
    }
  }

  if (config_.method == Method::kPlain) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < params[i].size(); ++j) {
        params[i][j] -= config_.step_size * grads[i][j];
      }
    }
    ++t_;
    return;
  }

  if (m_.empty()) {
    for (const Matrix& p : params) {
      m_.emplace_back(p.rows(), p.cols());
      v_.emplace_back(p.rows(), p.cols());
    }
  } else if (m_.size() != params.size()) {
    throw DomainError("optimizer: parameter count changed between steps");
  }

  ++t_;
  const double b1 = config_.moment_decay_1;
  const double b2 = config_.moment_decay_2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      params[i][j] -= config_.step_size * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace infoalign::diff
