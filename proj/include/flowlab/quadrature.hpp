#pragma once

#include <functional>
#include <vector>

namespace flowlab {

/// Adaptive Simpson on [a, b] with absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10, int max_depth = 60);

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule: sum w_i f(x_i) ~ integral f(u) exp(-u^2) du.
/// Nodes by Newton iteration on H_n; cached per n.
const QuadRule& gauss_hermite(int n);

/// Gauss-Legendre rule on [-1, 1]; cached per n.
const QuadRule& gauss_legendre(int n);

/// Composite Gauss-Legendre nodes/weights on [a, b] with `panels` panels of
/// `order` nodes each. Returned weights integrate f directly.
QuadRule composite_legendre(double a, double b, int panels, int order);

/// Expectation of f under N(mean, sd^2) via Gauss-Hermite with n nodes.
double gauss_hermite_expect(const std::function<double(double)>& f, double mean, double sd, int n);

}  // namespace flowlab
