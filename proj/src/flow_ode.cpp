#include "flowlab/flow_ode.hpp"

#include <cmath>

#include "flowlab/errors.hpp"

namespace flowlab {

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

VecD eval_checked(const VelocityField& field, double t, std::span<const double> x) {
  VecD v = field(t, x);
  if (!all_finite(v)) throw IntegrationError("flow: field returned a non-finite value", t);
  return v;
}

void rk4_step(const VelocityField& field, double t, double h, VecD& x) {
  const VecD k1 = eval_checked(field, t, x);
  VecD tmp = x;
  axpy(0.5 * h, k1, tmp);
  const VecD k2 = eval_checked(field, t + 0.5 * h, tmp);
  tmp = x;
  axpy(0.5 * h, k2, tmp);
  const VecD k3 = eval_checked(field, t + 0.5 * h, tmp);
  tmp = x;
  axpy(h, k3, tmp);
  const VecD k4 = eval_checked(field, t + h, tmp);
  for (size_t i = 0; i < x.size(); ++i)
    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void euler_step(const VelocityField& field, double t, double h, VecD& x) {
  const VecD k = eval_checked(field, t, x);
  axpy(h, k, x);
}

}  // namespace

VecD integrate(const VelocityField& field, std::span<const double> x0,
               const IntegratorConfig& cfg) {
  if (cfg.steps < 1) throw DomainError("integrate: steps must be >= 1");
  VecD x(x0.begin(), x0.end());
  const double h = 1.0 / cfg.steps;
  for (int i = 0; i < cfg.steps; ++i) {
    const double t = static_cast<double>(i) * h;
    if (cfg.method == OdeMethod::rk4) {
      rk4_step(field, t, h, x);
    } else {
      euler_step(field, t, h, x);
    }
  }
  return x;
}

std::vector<std::pair<double, VecD>> trajectory(const VelocityField& field,
                                                std::span<const double> x0,
                                                const IntegratorConfig& cfg) {
  if (cfg.steps < 1) throw DomainError("trajectory: steps must be >= 1");
  std::vector<std::pair<double, VecD>> out;
  out.reserve(cfg.steps + 1);
  VecD x(x0.begin(), x0.end());
  const double h = 1.0 / cfg.steps;
  out.emplace_back(0.0, x);
  for (int i = 0; i < cfg.steps; ++i) {
    const double t = static_cast<double>(i) * h;
    if (cfg.method == OdeMethod::rk4) {
      rk4_step(field, t, h, x);
    } else {
      euler_step(field, t, h, x);
    }
    out.emplace_back(static_cast<double>(i + 1) * h, x);
  }
  return out;
}

MatD push_samples(const VelocityField& field, Rng& rng, int m, const IntegratorConfig& cfg) {
  if (m < 1) throw DomainError("push_samples: m must be >= 1");
  const int d = field.dim();
  MatD out(m, d);
  for (int row = 0; row < m; ++row) {
    VecD z = rng.normal_vec(d);
    VecD x1 = integrate(field, z, cfg);
    for (int j = 0; j < d; ++j) out(row, j) = x1[j];
  }
  return out;
}

}  // namespace flowlab
