#include "flowlab/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace flowlab {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index) {
  uint64_t h = splitmix64(master ^ fnv1a(label));
  h = splitmix64(h ^ (0x51ed2701a3c5e891ULL + index));
  return h;
}

uint64_t mix_bits(uint64_t seed, double value) {
  return splitmix64(seed ^ std::bit_cast<uint64_t>(value));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 kept away from 0 for the log.
  double u1 = uniform01();
  if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

VecD Rng::normal_vec(int d) {
  VecD v(d);
  for (int i = 0; i < d; ++i) v[i] = normal();
  return v;
}

VecD Rng::unit_vector(int d) {
  while (true) {
    VecD v = normal_vec(d);
    const double n = norm2(v);
    if (n > 1e-12) return scale(v, 1.0 / n);
  }
}

uint64_t Rng::below(uint64_t n) {
  // Rejection to avoid modulo bias.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = eng_();
  } while (x >= limit);
  return x % n;
}

VecD halton_point(uint64_t index, int dim) {
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
  VecD p(dim);
  for (int axis = 0; axis < dim; ++axis) {
    const int base = primes[axis % 8];
    double f = 1.0, r = 0.0;
    uint64_t i = index;
    while (i > 0) {
      f /= base;
      r += f * static_cast<double>(i % base);
      i /= base;
    }
    p[axis] = r;
  }
  return p;
}

}  // namespace flowlab
