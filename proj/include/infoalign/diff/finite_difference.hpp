#pragma once

#include <functional>
#include <span>
#include <vector>

namespace infoalign::diff {

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate.
// Throws NumericError naming the coordinate if a probe value is not finite.
std::vector<double> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const double> point,
                                               double step = 1e-6);

// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero pairs from blowing up.
double relative_error(double a, double b, double floor = 1e-8);

}  // namespace infoalign::diff
