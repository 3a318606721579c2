#pragma once

// Scalar helpers shared by the closed-form losses and estimators.

#include <algorithm>
#include <cmath>
#include <span>

namespace infoalign {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double log_sigmoid(double z) { return -softplus(-z); }

double logsumexp(std::span<const double> values);

// log(sum_i w_i e^{t_i}); entries with w_i == 0 are skipped, w_i > 0 required otherwise.
double weighted_logsumexp(std::span<const double> t, std::span<const double> w);

}  // namespace infoalign
