#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "infoalign/simd/kernels.hpp"

namespace infoalign::simd {

#if defined(INFOALIGN_HAVE_AVX2)
const KernelTable* avx2_table_impl();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(INFOALIGN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const KernelTable* best = avx2_kernels();
  if (best == nullptr) best = &scalar_kernels();
  if (const char* env = std::getenv("INFOALIGN_SIMD"); env != nullptr && *env != '\0') {
    const Backend wanted = parse_backend(env);
    if (!backend_supported(wanted)) {
      throw std::invalid_argument(std::string("INFOALIGN_SIMD=") + env +
                                  " is not supported on this machine");
    }
    best = wanted == Backend::kAvx2 ? avx2_kernels() : &scalar_kernels();
  }
  return best;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(INFOALIGN_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

bool backend_supported(Backend backend) {
  return backend == Backend::kScalar || avx2_kernels() != nullptr;
}

void set_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw std::invalid_argument("SIMD backend '" + std::string(backend_name(backend)) +
                                "' is not supported on this machine");
  }
  active_slot().store(backend == Backend::kAvx2 ? avx2_kernels() : &scalar_kernels());
}

Backend active_backend() { return kernels().backend; }

const KernelTable& kernels() { return *active_slot().load(std::memory_order_relaxed); }

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  throw std::invalid_argument("unknown SIMD backend '" + std::string(name) +
                              "' (expected scalar or avx2)");
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

}  // namespace infoalign::simd
