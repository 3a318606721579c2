#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace infoalign {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Independent generator for a named stream of a root seed. The same
// (seed, name, index) always yields the same sequence, whatever the thread.
Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

// Box-Muller standard normal; used instead of std::normal_distribution so the
// sample sequence does not depend on the standard library.
class NormalSampler {
 public:
  double operator()(Rng& rng);

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng);
// Uniform integer in [0, n) by rejection, n >= 1.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

}  // namespace infoalign
