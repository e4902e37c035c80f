#include "flowlab/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowlab/errors.hpp"

namespace flowlab {

double w1_1d(VecD a, VecD b) {
  if (a.size() != b.size()) throw DomainError("w1_1d: sample sizes must match");
  if (a.empty()) throw DomainError("w1_1d: empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

namespace {

double euclid(const MatD& a, int i, const MatD& b, int j) {
  double s = 0.0;
  for (int k = 0; k < a.cols; ++k) {
    const double d = a(i, k) - b(j, k);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

std::vector<int> assignment_matching(const MatD& a, const MatD& b, int cap) {
  const int m = a.rows;
  if (m != b.rows || a.cols != b.cols) throw DomainError("assignment: shapes must match");
  if (m > cap)
    throw DomainError("assignment: sample size exceeds the exact-solver cap; use sliced_w1");

  // Jonker-Volgenant style shortest augmenting path with potentials.
  // 1-indexed internals; matched_col[j] holds the row assigned to column j.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> matched_col(m + 1, 0);
  std::vector<double> min_to(m + 1);
  std::vector<int> prev(m + 1);
  std::vector<bool> used(m + 1);

  for (int row = 1; row <= m; ++row) {
    matched_col[0] = row;
    int j0 = 0;
    std::fill(min_to.begin(), min_to.end(), inf);
    std::fill(used.begin(), used.end(), false);
    std::fill(prev.begin(), prev.end(), 0);
    do {
      used[j0] = true;
      const int i0 = matched_col[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = euclid(a, i0 - 1, b, j - 1) - u[i0] - v[j];
        if (cur < min_to[j]) {
          min_to[j] = cur;
          prev[j] = j0;
        }
        if (min_to[j] < delta) {
          delta = min_to[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[matched_col[j]] += delta;
          v[j] -= delta;
        } else {
          min_to[j] -= delta;
        }
      }
      j0 = j1;
    } while (matched_col[j0] != 0);
    // Augment along the path.
    do {
      const int j1 = prev[j0];
      matched_col[j0] = matched_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> match(m, -1);
  for (int j = 1; j <= m; ++j)
    if (matched_col[j] != 0) match[matched_col[j] - 1] = j - 1;
  return match;
}

double w1_assignment(const MatD& a, const MatD& b, int cap) {
  const std::vector<int> match = assignment_matching(a, b, cap);
  double s = 0.0;
  for (int i = 0; i < a.rows; ++i) s += euclid(a, i, b, match[i]);
  return s / a.rows;
}

double sliced_w1(const MatD& a, const MatD& b, int n_proj, Rng& rng) {
  if (n_proj < 1) throw DomainError("sliced_w1: need at least one projection");
  if (a.rows != b.rows || a.cols != b.cols) throw DomainError("sliced_w1: shapes must match");
  const int d = a.cols;
  double acc = 0.0;
  VecD pa(a.rows), pb(b.rows);
  for (int p = 0; p < n_proj; ++p) {
    const VecD dir = rng.unit_vector(d);
    for (int i = 0; i < a.rows; ++i) {
      double sa = 0.0, sb = 0.0;
      for (int k = 0; k < d; ++k) {
        sa += a(i, k) * dir[k];
        sb += b(i, k) * dir[k];
      }
      pa[i] = sa;
      pb[i] = sb;
    }
    acc += w1_1d(pa, pb);
  }
  return acc / n_proj;
}

W1Report make_w1_report(const MatD& a, const MatD& b, W1Estimator estimator, int n_proj,
                        uint64_t seed, int cap) {
  W1Report rep;
  rep.estimator = estimator;
  rep.m = a.rows;
  rep.seed = seed;
  switch (estimator) {
    case W1Estimator::exact_1d: {
      if (a.cols != 1) throw DomainError("w1 report: exact-1d estimator needs 1D samples");
      VecD av(a.rows), bv(b.rows);
      for (int i = 0; i < a.rows; ++i) {
        av[i] = a(i, 0);
        bv[i] = b(i, 0);
      }
      rep.value = w1_1d(std::move(av), std::move(bv));
      break;
    }
    case W1Estimator::assignment:
      rep.value = w1_assignment(a, b, cap);
      break;
    case W1Estimator::sliced: {
      Rng rng(seed);
      rep.n_proj = n_proj;
      rep.value = sliced_w1(a, b, n_proj, rng);
      break;
    }
  }
  return rep;
}

double sigma_min_of_n(double n, int d, double alpha, double eta) {
  if (!(n >= 2.0)) throw DomainError("sigma_min_of_n: n must be >= 2");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("sigma_min_of_n: alpha must lie in (0,1]");
  if (!(eta >= 0.0)) throw DomainError("sigma_min_of_n: eta must be >= 0");
  const double exponent = -1.0 / ((d + 1) + 4.0 * alpha + 4.0 + eta);
  return std::pow(n, exponent);
}

double reference_rate_slope(int d, double alpha, double eta) {
  return -(1.0 + alpha) / (d + 4.0 * alpha + 5.0 + eta);
}

}  // namespace flowlab
