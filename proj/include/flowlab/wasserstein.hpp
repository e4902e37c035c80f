#pragma once

#include <string>
#include <vector>

#include "flowlab/linalg.hpp"
#include "flowlab/rng.hpp"

namespace flowlab {

enum class W1Estimator { exact_1d, assignment, sliced };

struct W1Report {
  W1Estimator estimator = W1Estimator::exact_1d;
  double value = 0.0;
  int m = 0;        // sample size per side
  int n_proj = 0;   // sliced only
  uint64_t seed = 0;
};

/// Exact empirical W1 in 1D: mean absolute difference of sorted order
/// statistics.
double w1_1d(VecD a, VecD b);

/// Exact empirical W1 as an optimal bipartite matching under Euclidean cost
/// divided by m. Solved by shortest augmenting paths with dual potentials;
/// refuses m above the cap (use the sliced estimator there).
double w1_assignment(const MatD& a, const MatD& b, int cap = 512);

/// Matching indices: row i of a pairs with match[i] of b.
std::vector<int> assignment_matching(const MatD& a, const MatD& b, int cap = 512);

/// Average of w1_1d over uniform random unit-direction projections.
double sliced_w1(const MatD& a, const MatD& b, int n_proj, Rng& rng);

/// Dispatches to the chosen estimator and records the evaluation protocol.
W1Report make_w1_report(const MatD& a, const MatD& b, W1Estimator estimator, int n_proj,
                        uint64_t seed, int cap = 512);

/// sigma_min(n) = n^{-1/((d+1) + 4 alpha + 4 + eta)}.
double sigma_min_of_n(double n, int d, double alpha, double eta);

/// Reference log-log slope -(1+alpha)/(d + 4 alpha + 5 + eta); reported,
/// never asserted at desk scale.
double reference_rate_slope(int d, double alpha, double eta);

}  // namespace flowlab
