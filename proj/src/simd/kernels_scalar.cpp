#include <cmath>

#include "infoalign/simd/kernels.hpp"

namespace infoalign::simd {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dot(a + i * k, b + j * k, k);
      c[i * n + j] = accumulate ? c[i * n + j] + v : v;
    }
  }
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = c + i * k;
    if (!accumulate) {
      for (std::size_t t = 0; t < k; ++t) row[t] = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) axpy(a[i * n + j], b + j * k, row, k);
  }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate) {
  if (!accumulate) {
    for (std::size_t t = 0; t < n * k; ++t) c[t] = 0.0;
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) axpy(a[i * n + j], b + i * k, c + j * k, k);
  }
}

void tanh_kernel(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void exp_kernel(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

constexpr KernelTable kScalarTable{
    Backend::kScalar, "scalar", dot,         axpy,     matmul_nt,
    matmul_nn,        matmul_tn, tanh_kernel, exp_kernel};

}  // namespace

const KernelTable& scalar_kernels() { return kScalarTable; }

}  // namespace infoalign::simd
