#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "flowlab/linalg.hpp"

namespace flowlab {

/// Derives an independent 64-bit seed from a master seed and a stream label.
/// Labeled hashing keeps streams stable when new subcommands are added.
uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index = 0);

/// Hash-combines a double's bit pattern into a seed (used to freeze
/// estimator streams per evaluation point).
uint64_t mix_bits(uint64_t seed, double value);

/// mt19937_64 with a project-owned normal sampler, so draw sequences do not
/// depend on the standard library's unspecified normal_distribution.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t raw() { return eng_(); }

  /// Uniform on [0, 1).
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller, pair-cached.
  double normal();

  VecD normal_vec(int d);

  /// Uniform direction on the unit sphere in R^d.
  VecD unit_vector(int d);

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n);

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Halton low-discrepancy sequence point (index >= 1), one value per axis.
VecD halton_point(uint64_t index, int dim);

}  // namespace flowlab
