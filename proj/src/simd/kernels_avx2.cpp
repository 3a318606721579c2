// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include <cmath>
#include <vector>

#include "infoalign/simd/kernels.hpp"

namespace infoalign::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four dot products against one row of a, reduced into one vector.
inline __m256d dot4(const double* a, const double* b0, const double* b1,
                    const double* b2, const double* b3, std::size_t k,
                    std::size_t k4) {
  __m256d c0 = _mm256_setzero_pd();
  __m256d c1 = _mm256_setzero_pd();
  __m256d c2 = _mm256_setzero_pd();
  __m256d c3 = _mm256_setzero_pd();
  for (std::size_t t = 0; t < k4; t += 4) {
    const __m256d va = _mm256_loadu_pd(a + t);
    c0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + t), c0);
    c1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + t), c1);
    c2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + t), c2);
    c3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + t), c3);
  }
  // [c0 c1 c2 c3] -> [sum c0, sum c1, sum c2, sum c3]
  const __m256d h01 = _mm256_hadd_pd(c0, c1);
  const __m256d h23 = _mm256_hadd_pd(c2, c3);
  const __m256d swapped = _mm256_permute2f128_pd(h01, h23, 0x21);
  const __m256d blended = _mm256_blend_pd(h01, h23, 0xC);
  __m256d r = _mm256_add_pd(swapped, blended);
  if (k4 < k) {
    alignas(32) double tail[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t t = k4; t < k; ++t) {
      tail[0] += a[t] * b0[t];
      tail[1] += a[t] * b1[t];
      tail[2] += a[t] * b2[t];
      tail[3] += a[t] * b3[t];
    }
    r = _mm256_add_pd(r, _mm256_load_pd(tail));
  }
  return r;
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate);

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate) {
  // Narrow inner dimension (first layer of a 2-input network): transpose b
  // once and broadcast instead of running many short dot products.
  if (k < 4 && n >= 16) {
    thread_local std::vector<double> bt;
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t) bt[t * n + j] = b[j * k + t];
    matmul_nn(a, bt.data(), c, m, k, n, accumulate);
    return;
  }
  const std::size_t k4 = k & ~std::size_t{3};
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::size_t j = 0;
    if (k >= 4) {
      for (; j + 4 <= n; j += 4) {
        const double* bj = b + j * k;
        __m256d r = dot4(ai, bj, bj + k, bj + 2 * k, bj + 3 * k, k, k4);
        if (accumulate) r = _mm256_add_pd(r, _mm256_loadu_pd(ci + j));
        _mm256_storeu_pd(ci + j, r);
      }
    }
    for (; j < n; ++j) {
      const double v = dot(ai, b + j * k, k);
      ci[j] = accumulate ? ci[j] + v : v;
    }
  }
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate) {
  constexpr std::size_t kChunk = 16;
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    std::size_t t = 0;
    for (; t + kChunk <= k; t += kChunk) {
      __m256d r0 = accumulate ? _mm256_loadu_pd(ci + t) : _mm256_setzero_pd();
      __m256d r1 = accumulate ? _mm256_loadu_pd(ci + t + 4) : _mm256_setzero_pd();
      __m256d r2 = accumulate ? _mm256_loadu_pd(ci + t + 8) : _mm256_setzero_pd();
      __m256d r3 = accumulate ? _mm256_loadu_pd(ci + t + 12) : _mm256_setzero_pd();
      for (std::size_t j = 0; j < n; ++j) {
        const __m256d s = _mm256_set1_pd(ai[j]);
        const double* bj = b + j * k + t;
        r0 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bj), r0);
        r1 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bj + 4), r1);
        r2 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bj + 8), r2);
        r3 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bj + 12), r3);
      }
      _mm256_storeu_pd(ci + t, r0);
      _mm256_storeu_pd(ci + t + 4, r1);
      _mm256_storeu_pd(ci + t + 8, r2);
      _mm256_storeu_pd(ci + t + 12, r3);
    }
    for (; t < k; ++t) {
      double s = accumulate ? ci[t] : 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * b[j * k + t];
      ci[t] = s;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t n, std::size_t k, bool accumulate) {
  constexpr std::size_t kChunk = 16;
  for (std::size_t j = 0; j < n; ++j) {
    double* cj = c + j * k;
    std::size_t t = 0;
    for (; t + kChunk <= k; t += kChunk) {
      __m256d r0 = accumulate ? _mm256_loadu_pd(cj + t) : _mm256_setzero_pd();
      __m256d r1 = accumulate ? _mm256_loadu_pd(cj + t + 4) : _mm256_setzero_pd();
      __m256d r2 = accumulate ? _mm256_loadu_pd(cj + t + 8) : _mm256_setzero_pd();
      __m256d r3 = accumulate ? _mm256_loadu_pd(cj + t + 12) : _mm256_setzero_pd();
      for (std::size_t i = 0; i < m; ++i) {
        const __m256d s = _mm256_set1_pd(a[i * n + j]);
        const double* bi = b + i * k + t;
        r0 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bi), r0);
        r1 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bi + 4), r1);
        r2 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bi + 8), r2);
        r3 = _mm256_fmadd_pd(s, _mm256_loadu_pd(bi + 12), r3);
      }
      _mm256_storeu_pd(cj + t, r0);
      _mm256_storeu_pd(cj + t + 4, r1);
      _mm256_storeu_pd(cj + t + 8, r2);
      _mm256_storeu_pd(cj + t + 12, r3);
    }
    for (; t < k; ++t) {
      double s = accumulate ? cj[t] : 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i * n + j] * b[i * k + t];
      cj[t] = s;
    }
  }
}

// Integral doubles in [-2^51, 2^51] to 64-bit lanes.
inline __m256i to_int64(__m256d integral) {
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 2^52 + 2^51
  return _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(integral, magic)),
                          _mm256_castpd_si256(magic));
}

inline __m256d pow2(__m256d integral) {
  const __m256i bits = _mm256_slli_epi64(
      _mm256_add_epi64(to_int64(integral), _mm256_set1_epi64x(1023)), 52);
  return _mm256_castsi256_pd(bits);
}

// Cody-Waite reduction, degree-13 Taylor polynomial on |r| <= ln2/2.
inline __m256d exp_pd(__m256d x) {
  const __m256d upper = _mm256_set1_pd(709.782712893384);
  const __m256d lower = _mm256_set1_pd(-745.1332191019412);
  const __m256d xc = _mm256_max_pd(lower, _mm256_min_pd(upper, x));
  const __m256d n = _mm256_round_pd(
      _mm256_mul_pd(xc, _mm256_set1_pd(1.4426950408889634)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125E-1), xc);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212E-6), r);

  static constexpr double kInvFact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0,
      1.0 / 3628800.0,    1.0 / 362880.0,    1.0 / 40320.0,
      1.0 / 5040.0,       1.0 / 720.0,       1.0 / 120.0,
      1.0 / 24.0,         1.0 / 6.0,         0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (std::size_t i = 1; i < sizeof(kInvFact) / sizeof(double); ++i) {
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[i]));
  }

  // Split the scale so each factor stays a normal double.
  const __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)));
  const __m256d n2 = _mm256_sub_pd(n, n1);
  __m256d y = _mm256_mul_pd(_mm256_mul_pd(p, pow2(n1)), pow2(n2));

  const __m256d over = _mm256_cmp_pd(x, upper, _CMP_GT_OQ);
  const __m256d under = _mm256_cmp_pd(x, lower, _CMP_LT_OQ);
  y = _mm256_blendv_pd(y, _mm256_set1_pd(HUGE_VAL), over);
  y = _mm256_blendv_pd(y, _mm256_setzero_pd(), under);
  return y;
}

// Rational form below 0.625 (Cephes coefficients), 1 - 2/(e^{2|x|}+1) above.
inline __m256d tanh_pd(__m256d x) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d a = _mm256_andnot_pd(sign_mask, x);
  const __m256d sign = _mm256_and_pd(sign_mask, x);

  const __m256d z = _mm256_mul_pd(a, a);
  __m256d p = _mm256_set1_pd(-9.64399179425052238628E-1);
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(-9.92877231001918586564E1));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(-1.61468768441708447952E3));
  __m256d q = _mm256_add_pd(z, _mm256_set1_pd(1.12811678491632931402E2));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(2.23548839060100448583E3));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(4.84406305325125486048E3));
  const __m256d small = _mm256_fmadd_pd(_mm256_mul_pd(a, z), _mm256_div_pd(p, q), a);

  const __m256d two_a = _mm256_min_pd(_mm256_set1_pd(700.0), _mm256_add_pd(a, a));
  const __m256d e = exp_pd(two_a);
  const __m256d large = _mm256_sub_pd(
      _mm256_set1_pd(1.0),
      _mm256_div_pd(_mm256_set1_pd(2.0), _mm256_add_pd(e, _mm256_set1_pd(1.0))));

  const __m256d use_small = _mm256_cmp_pd(a, _mm256_set1_pd(0.625), _CMP_LT_OQ);
  const __m256d mag = _mm256_blendv_pd(large, small, use_small);
  return _mm256_or_pd(mag, sign);
}

void tanh_kernel(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, tanh_pd(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t t = i; t < n; ++t) buf[t - i] = x[t];
    _mm256_store_pd(buf, tanh_pd(_mm256_load_pd(buf)));
    for (std::size_t t = i; t < n; ++t) y[t] = buf[t - i];
  }
}

void exp_kernel(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, exp_pd(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t t = i; t < n; ++t) buf[t - i] = x[t];
    _mm256_store_pd(buf, exp_pd(_mm256_load_pd(buf)));
    for (std::size_t t = i; t < n; ++t) y[t] = buf[t - i];
  }
}

constexpr KernelTable kAvx2Table{
    Backend::kAvx2, "avx2", dot,         axpy,     matmul_nt,
    matmul_nn,      matmul_tn, tanh_kernel, exp_kernel};

}  // namespace

const KernelTable* avx2_table_impl() { return &kAvx2Table; }

}  // namespace infoalign::simd
