#include "infoalign/diff/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "infoalign/errors.hpp"

namespace infoalign::diff {

std::vector<double> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const double> point, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw DomainError("finite_difference_gradient: step must be positive");
  }
  std::vector<double> p(point.begin(), point.end());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + step;
    const double up = f(p);
    p[i] = orig - step;
    const double down = f(p);
    p[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_difference_gradient: non-finite value probing coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

}  // namespace infoalign::diff
