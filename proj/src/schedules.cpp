#include "flowlab/schedules.hpp"

#include <cmath>
#include <utility>

#include "flowlab/errors.hpp"
#include "flowlab/quadrature.hpp"

namespace flowlab {

namespace {

void require_unit_interval(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("schedule: t must lie in [0,1]");
}

double poly_eval(const std::vector<double>& c, double t) {
  double v = 0.0;
  for (size_t k = c.size(); k-- > 0;) v = v * t + c[k];
  return v;
}

double poly_eval_deriv(const std::vector<double>& c, double t) {
  double v = 0.0;
  for (size_t k = c.size(); k-- > 1;) v = v * t + static_cast<double>(k) * c[k];
  return v;
}

}  // namespace

VarianceSchedule::VarianceSchedule(ScheduleKind kind, double sigma_min, double gamma,
                                   std::vector<double> coeffs)
    : kind_(kind), sigma_min_(sigma_min), gamma_(gamma), coeffs_(std::move(coeffs)) {
  validate();
}

void VarianceSchedule::validate() const {
  if (!(sigma_min_ > 0.0 && sigma_min_ < 1.0))
    throw ConstructionError("schedule: sigma_min must lie in (0,1)");
  if (!(gamma_ >= 1.0)) throw ConstructionError("schedule: gamma must be >= 1");
  if (kind_ == ScheduleKind::poly) {
    if (coeffs_.size() < 2) throw ConstructionError("poly schedule: need at least two coefficients");
    const double s0 = poly_eval(coeffs_, 0.0);
    const double s1 = poly_eval(coeffs_, 1.0);
    if (std::fabs(s0 - 1.0) > 1e-12)
      throw ConstructionError("poly schedule: sigma_0 must equal 1");
    if (std::fabs(s1 - sigma_min_) > 1e-12)
      throw ConstructionError("poly schedule: sigma_1 must equal sigma_min");
    // Positivity and monotone decrease on a dense grid.
    const int grid = 10001;
    for (int i = 0; i < grid; ++i) {
      const double t = static_cast<double>(i) / (grid - 1);
      if (!(poly_eval(coeffs_, t) > 0.0))
        throw ConstructionError("poly schedule: sigma_t must stay positive");
      if (poly_eval_deriv(coeffs_, t) > 1e-12)
        throw ConstructionError("poly schedule: sigma_t must be non-increasing");
    }
  } else if (!coeffs_.empty()) {
    throw ConstructionError("schedule: coefficients are only valid for the poly kind");
  }
}

double VarianceSchedule::sigma(double t) const {
  require_unit_interval(t);
  switch (kind_) {
    case ScheduleKind::geometric:
      return std::pow(sigma_min_, t);
    case ScheduleKind::linear:
      return 1.0 - (1.0 - sigma_min_) * t;
    case ScheduleKind::poly:
      return poly_eval(coeffs_, t);
  }
  throw DomainError("schedule: unknown kind");
}

double VarianceSchedule::dsigma(double t) const {
  require_unit_interval(t);
  switch (kind_) {
    case ScheduleKind::geometric:
      return std::log(sigma_min_) * std::pow(sigma_min_, t);
    case ScheduleKind::linear:
      return -(1.0 - sigma_min_);
    case ScheduleKind::poly:
      return poly_eval_deriv(coeffs_, t);
  }
  throw DomainError("schedule: unknown kind");
}

double VarianceSchedule::log_quotient(double t) const {
  if (kind_ == ScheduleKind::geometric) {
    require_unit_interval(t);
    return std::log(sigma_min_);  // constant in t
  }
  return dsigma(t) / sigma(t);
}

std::pair<double, double> VarianceSchedule::mu_coeffs(double t) const {
  require_unit_interval(t);
  // gamma >= 1 is enforced at construction, so t^{gamma-1} is finite at 0
  // (with the 0^0 = 1 convention for gamma = 1).
  const double mu = std::pow(t, gamma_);
  const double dmu = (gamma_ == 1.0) ? 1.0 : gamma_ * std::pow(t, gamma_ - 1.0);
  return {mu, dmu};
}

const char* VarianceSchedule::kind_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::geometric:
      return "geometric";
    case ScheduleKind::linear:
      return "linear";
    case ScheduleKind::poly:
      return "poly";
  }
  return "?";
}

ScheduleAudit audit_schedule(const VarianceSchedule& schedule, double quad_tol) {
  ScheduleAudit audit;
  audit.expected = std::log(1.0 / schedule.sigma_min());
  audit.integral = adaptive_simpson(
      [&](double t) { return std::fabs(schedule.log_quotient(t)); }, 0.0, 1.0, quad_tol);

  // Monotonicity: sigma > 0 and sigma' <= 0 on a dense grid.
  audit.monotone = true;
  const int grid = 10001;
  for (int i = 0; i < grid; ++i) {
    const double t = static_cast<double>(i) / (grid - 1);
    if (!(schedule.sigma(t) > 0.0) || schedule.dsigma(t) > 1e-12) {
      audit.monotone = false;
      break;
    }
  }

  // t* by bisection on g(t) = sigma'/sigma - log(sigma_min).
  const double target = std::log(schedule.sigma_min());
  auto g = [&](double t) { return schedule.log_quotient(t) - target; };
  const double g0 = g(0.0);
  const double g1 = g(1.0);
  if (std::fabs(g0) < 1e-14 && std::fabs(g1) < 1e-14) {
    audit.quotient_constant = true;
    audit.tstar = 0.5;
    return audit;
  }
  if (g0 * g1 > 0.0)
    throw DomainError("audit_schedule: no sign change for t* (schedule violates boundary identity)");
  double lo = 0.0, hi = 1.0, flo = g0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    const double fm = g(mid);
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
  audit.tstar = 0.5 * (lo + hi);
  return audit;
}

}  // namespace flowlab
