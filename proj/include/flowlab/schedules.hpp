#pragma once

#include <utility>
#include <vector>

namespace flowlab {

enum class ScheduleKind { geometric, linear, poly };

/// Variance function sigma_t on [0,1] with sigma_0 = 1, sigma_1 = sigma_min,
/// plus the mean-shift exponent gamma for mu_t(y) = t^gamma y.
///
/// Kinds:
///   geometric: sigma_t = sigma_min^t
///   linear:    sigma_t = 1 - (1 - sigma_min) t
///   poly:      sigma_t = sum_k coeffs[k] t^k (boundary/monotonicity checked
///              at construction)
class VarianceSchedule {
 public:
  VarianceSchedule(ScheduleKind kind, double sigma_min, double gamma,
                   std::vector<double> coeffs = {});

  double sigma(double t) const;
  double dsigma(double t) const;

  /// sigma'_t / sigma_t, the log-derivative (<= 0).
  double log_quotient(double t) const;

  /// (t^gamma, gamma t^{gamma-1}) — scalar coefficients of mu_t and mu'_t.
  std::pair<double, double> mu_coeffs(double t) const;

  ScheduleKind kind() const { return kind_; }
  double sigma_min() const { return sigma_min_; }
  double gamma() const { return gamma_; }
  const std::vector<double>& coeffs() const { return coeffs_; }

  static const char* kind_name(ScheduleKind k);

 private:
  void validate() const;

  ScheduleKind kind_;
  double sigma_min_;
  double gamma_;
  std::vector<double> coeffs_;
};

struct ScheduleAudit {
  double integral = 0.0;  // quadrature of |sigma'/sigma| on [0,1]
  double expected = 0.0;  // log(1/sigma_min)
  double tstar = 0.0;     // solves sigma'/sigma = log(sigma_min)
  bool quotient_constant = false;
  bool monotone = false;
};

/// Integrates |sigma'/sigma| (must equal log(1/sigma_min) within quad_tol),
/// locates t* with sigma'_{t*}/sigma_{t*} = log(sigma_min) by bisection, and
/// checks monotonicity on a dense grid. A constant quotient makes every t a
/// valid t*; 0.5 is returned by convention in that case.
ScheduleAudit audit_schedule(const VarianceSchedule& schedule, double quad_tol = 1e-10);

}  // namespace flowlab
