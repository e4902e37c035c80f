#include "flowlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace flowlab {

namespace {

double simpson(double fa, double fm, double fb, double h) { return h / 6.0 * (fa + 4.0 * fm + fb); }

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(fa, flm, fm, m - a);
  const double right = simpson(fm, frm, fb, b - m);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
  const double fa = f(a);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = simpson(fa, fm, fb, b - a);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

namespace {

// Physicists' Hermite rule (weight exp(-u^2)). Positive roots are bracketed
// by a sign scan of the orthonormal polynomial on (0, sqrt(2n+1)] and then
// bisected with a Newton polish; asymptotic initial guesses lose roots for
// n around 200. Orthonormal values stay within double range up to n ~ 270.
QuadRule compute_hermite(int n) {
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  // Returns the orthonormal Hermite value h_n(z); h_{n-1} lands in `prev`.
  auto eval = [n, pim4](double z, double& prev) {
    double p1 = pim4;
    double p2 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
    }
    prev = p2;
    return p1;
  };
  auto value = [&](double z) {
    double unused;
    return eval(z, unused);
  };

  const int positive_roots = n / 2;
  const double top = std::sqrt(2.0 * n + 1.0);  // all roots lie below this
  std::vector<double> roots;
  for (int grid = 8 * n; roots.size() != static_cast<size_t>(positive_roots); grid *= 2) {
    roots.clear();
    const double lo0 = (n % 2 == 1) ? 0.5 * top / grid : 0.0;  // odd n: skip the root at 0
    double a = lo0;
    double fa = value(a);
    for (int i = 1; i <= grid; ++i) {
      const double b = lo0 + (top - lo0) * i / grid;
      const double fb = value(b);
      if (fa == 0.0) {
        roots.push_back(a);
      } else if (fa * fb < 0.0) {
        double lo = a, hi = b, flo = fa;
        for (int iter = 0; iter < 100 && hi - lo > 1e-15 * top; ++iter) {
          const double mid = 0.5 * (lo + hi);
          const double fm = value(mid);
          if (fm == 0.0) {
            lo = hi = mid;
            break;
          }
          if (flo * fm < 0.0) {
            hi = mid;
          } else {
            lo = mid;
            flo = fm;
          }
        }
        double z = 0.5 * (lo + hi);
        for (int iter = 0; iter < 4; ++iter) {  // Newton polish inside the bracket
          double prev;
          const double f = eval(z, prev);
          const double fp = std::sqrt(2.0 * n) * prev;
          const double step = f / fp;
          if (!std::isfinite(step) || z - step <= lo || z - step >= hi) break;
          z -= step;
        }
        roots.push_back(z);
      }
      a = b;
      fa = fb;
    }
    if (grid > 64 * n) break;  // give up densifying; handled by the assert below
  }
  if (roots.size() != static_cast<size_t>(positive_roots))
    throw std::logic_error("gauss_hermite: root scan failed");

  QuadRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  int idx = 0;
  if (n % 2 == 1) {
    double prev;
    eval(0.0, prev);
    r.nodes[positive_roots] = 0.0;
    const double pp = std::sqrt(2.0 * n) * prev;
    r.weights[positive_roots] = 2.0 / (pp * pp);
  }
  for (const double z : roots) {
    double prev;
    eval(z, prev);
    const double pp = std::sqrt(2.0 * n) * prev;
    const double w = 2.0 / (pp * pp);
    const int hi = (n % 2 == 1) ? positive_roots + 1 + idx : positive_roots + idx;
    const int lo = (n % 2 == 1) ? positive_roots - 1 - idx : positive_roots - 1 - idx;
    r.nodes[hi] = z;
    r.nodes[lo] = -z;
    r.weights[hi] = w;
    r.weights[lo] = w;
    ++idx;
  }
  return r;
}

QuadRule compute_legendre(int n) {
  QuadRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::fabs(dz) < 1e-15) break;
    }
    r.nodes[i] = -z;
    r.nodes[n - 1 - i] = z;
    r.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    r.weights[n - 1 - i] = r.weights[i];
  }
  return r;
}

std::mutex cache_mutex;

}  // namespace

const QuadRule& gauss_hermite(int n) {
  static std::map<int, QuadRule> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_hermite(n)).first;
  return it->second;
}

const QuadRule& gauss_legendre(int n) {
  static std::map<int, QuadRule> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_legendre(n)).first;
  return it->second;
}

QuadRule composite_legendre(double a, double b, int panels, int order) {
  const QuadRule& base = gauss_legendre(order);
  QuadRule out;
  out.nodes.reserve(static_cast<size_t>(panels) * order);
  out.weights.reserve(static_cast<size_t>(panels) * order);
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    for (int i = 0; i < order; ++i) {
      out.nodes.push_back(lo + 0.5 * h * (base.nodes[i] + 1.0));
      out.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return out;
}

double gauss_hermite_expect(const std::function<double(double)>& f, double mean, double sd, int n) {
  const QuadRule& r = gauss_hermite(n);
  const double c = std::numbers::sqrt2 * sd;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += r.weights[i] * f(mean + c * r.nodes[i]);
  return s / std::sqrt(std::numbers::pi);
}

}  // namespace flowlab
