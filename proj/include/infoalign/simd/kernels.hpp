#pragma once

// Dense double-precision inner loops used by the autodiff tape.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The active table is picked once at startup from CPUID
// and can be pinned with INFOALIGN_SIMD=scalar|avx2 or set_backend(). The
// two tables agree to rounding (tests/unit/simd_equivalence_test.cpp), not
// bit-for-bit: FMA contraction and lane-wise reduction reorder sums.

#include <cstddef>
#include <string_view>

namespace infoalign::simd {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  Backend backend;
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // Row-major products. `accumulate` adds into c instead of overwriting.
  //   nt: c[m x n] = a[m x k] * b[n x k]^T
  //   nn: c[m x k] = a[m x n] * b[n x k]
  //   tn: c[n x k] = a[m x n]^T * b[m x k]
  void (*matmul_nt)(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k, bool accumulate);
  void (*matmul_nn)(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k, bool accumulate);
  void (*matmul_tn)(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k, bool accumulate);

  void (*tanh)(const double* x, double* y, std::size_t n);
  void (*exp)(const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels();
// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

bool backend_supported(Backend backend);
// Throws std::invalid_argument when the backend is not supported here.
void set_backend(Backend backend);
Backend active_backend();
const KernelTable& kernels();

Backend parse_backend(std::string_view name);
std::string_view backend_name(Backend backend);

}  // namespace infoalign::simd
