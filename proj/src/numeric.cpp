#include "infoalign/numeric.hpp"

#include <limits>

#include "infoalign/errors.hpp"

namespace infoalign {

double logsumexp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  double m = values[0];
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double weighted_logsumexp(std::span<const double> t, std::span<const double> w) {
  if (t.size() != w.size()) throw DomainError("weighted_logsumexp: size mismatch");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (w[i] < 0.0) throw DomainError("weighted_logsumexp: negative weight");
    if (w[i] > 0.0) m = std::max(m, t[i]);
  }
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (w[i] > 0.0) s += w[i] * std::exp(t[i] - m);
  }
  return m + std::log(s);
}

}  // namespace infoalign
