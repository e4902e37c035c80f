#include "flowlab/lipschitz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "flowlab/errors.hpp"

namespace flowlab {

namespace {

double max_entry_abs(const MatD& m) {
  double r = 0.0;
  for (double v : m.a) r = std::max(r, std::fabs(v));
  return r;
}

/// Least-squares slope of y against x.
bool fit_slope(const VecD& x, const VecD& y, double& slope) {
  const size_t n = x.size();
  if (n < 4) return false;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::fabs(denom) < 1e-300) return false;
  slope = (n * sxy - sx * sy) / denom;
  return true;
}

}  // namespace

BMatrixResult b_matrix(double t, const MomentModel& model, const std::vector<VecD>& x_probes) {
  if (x_probes.empty()) throw DomainError("b_matrix: probe set must not be empty");
  const int d = model.dim();
  const auto& schedule = model.schedule();
  const double q = schedule.log_quotient(t);
  const double s = schedule.sigma(t);
  const auto [mu, dmu] = schedule.mu_coeffs(t);
  const double coef = (dmu - q * mu) * mu / (s * s);

  BMatrixResult out;
  out.b = MatD(d, d);
  MatD half_a(d, d), half_b(d, d);
  const bool exact = model.is_exact();
  for (size_t p = 0; p < x_probes.size(); ++p) {
    const PosteriorMoments m = model.moments(t, x_probes[p]);
    if (m.degenerate) out.degenerate_probes.push_back(static_cast<int>(p));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double entry = (i == j ? q : 0.0) + coef * m.cov(i, j);
        out.b(i, j) = std::max(out.b(i, j), std::fabs(entry));
      }
    if (!exact) {
      const auto [ma, mb] = model.moments_split(t, x_probes[p]);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          const double ea = (i == j ? q : 0.0) + coef * ma.cov(i, j);
          const double eb = (i == j ? q : 0.0) + coef * mb.cov(i, j);
          half_a(i, j) = std::max(half_a(i, j), std::fabs(ea));
          half_b(i, j) = std::max(half_b(i, j), std::fabs(eb));
        }
    }
  }
  if (!exact) out.se = 0.5 * std::fabs(max_entry_abs(half_a) - max_entry_abs(half_b));
  return out;
}

std::pair<double, double> gamma_bounds(double t, const MomentModel& model,
                                       const std::vector<VecD>& x_probes) {
  const BMatrixResult r = b_matrix(t, model, x_probes);
  const double bmax = max_entry_abs(r.b);
  return {bmax, model.dim() * bmax};
}

std::pair<double, double> integral_gamma(const MomentModel& model, const VecD& t_grid,
                                         const std::vector<VecD>& x_probes) {
  VecD lower(t_grid.size()), upper(t_grid.size());
  for (size_t i = 0; i < t_grid.size(); ++i) {
    const auto [lo, hi] = gamma_bounds(t_grid[i], model, x_probes);
    lower[i] = lo;
    upper[i] = hi;
  }
  double ilo = 0.0, ihi = 0.0;
  for (size_t i = 1; i < t_grid.size(); ++i) {
    const double h = t_grid[i] - t_grid[i - 1];
    ilo += 0.5 * h * (lower[i] + lower[i - 1]);
    ihi += 0.5 * h * (upper[i] + upper[i - 1]);
  }
  return {ilo, ihi};
}

GronwallFactor gronwall_factor(double integral_upper) {
  if (!(integral_upper >= 0.0)) throw DomainError("gronwall_factor: integral must be >= 0");
  GronwallFactor g;
  // exp overflows just below 710; flag at 700 where the factor stops being
  // a usable number.
  if (integral_upper >= 700.0) {
    g.value = std::numeric_limits<double>::infinity();
    g.overflow = true;
    return g;
  }
  g.value = std::sqrt(2.0 * std::numbers::e) * std::exp(integral_upper);
  if (!std::isfinite(g.value)) {
    g.value = std::numeric_limits<double>::infinity();
    g.overflow = true;
  }
  return g;
}

LipschitzReport lipschitz_scan(const MomentModel& model, const VecD& t_grid,
                               const std::vector<VecD>& x_probes) {
  LipschitzReport rep;
  rep.t_grid = t_grid;
  const int d = model.dim();
  rep.b_max.resize(t_grid.size());
  rep.lower.resize(t_grid.size());
  rep.upper.resize(t_grid.size());
  rep.se.resize(t_grid.size());
  for (size_t i = 0; i < t_grid.size(); ++i) {
    const BMatrixResult r = b_matrix(t_grid[i], model, x_probes);
    rep.b_max[i] = max_entry_abs(r.b);
    rep.lower[i] = rep.b_max[i];
    rep.upper[i] = d * rep.b_max[i];
    rep.se[i] = r.se;
  }
  for (size_t i = 1; i < t_grid.size(); ++i) {
    const double h = t_grid[i] - t_grid[i - 1];
    rep.integral_lower += 0.5 * h * (rep.lower[i] + rep.lower[i - 1]);
    rep.integral_upper += 0.5 * h * (rep.upper[i] + rep.upper[i - 1]);
  }
  const GronwallFactor g = gronwall_factor(rep.integral_upper);
  rep.gronwall = g.value;
  rep.gronwall_overflow = g.overflow;
  return rep;
}

VecD chebyshev_grid(int n) {
  VecD t(n);
  for (int i = 0; i < n; ++i)
    t[i] = 0.5 * (1.0 - std::cos(std::numbers::pi * i / (n - 1)));
  return t;
}

double probe_box_radius(const TargetModel& target) {
  double mean_radius = 0.0;
  if (const auto* m = std::get_if<GaussianMixture>(&target)) {
    for (const VecD& mk : m->means()) mean_radius = std::max(mean_radius, norm2(mk));
  }
  return 3.0 + 3.0 * mean_radius;
}

std::vector<VecD> make_probe_set(const MomentModel& model, int n_grid, int n_target_samples,
                                 uint64_t seed) {
  const int d = model.dim();
  const double r = probe_box_radius(model.target());
  std::vector<VecD> probes;
  probes.reserve(n_grid + n_target_samples);
  for (int i = 1; i <= n_grid; ++i) {
    VecD u = halton_point(i, d);
    for (int j = 0; j < d; ++j) u[j] = (2.0 * u[j] - 1.0) * r;
    probes.push_back(std::move(u));
  }
  // Posterior covariance peaks on the decision boundary between mixture
  // modes at large t; seed the scan with the modes, their pairwise blends
  // and offsets perpendicular to each pair axis.
  if (const auto* mix = std::get_if<GaussianMixture>(&model.target())) {
    const auto& means = mix->means();
    for (const VecD& m : means) probes.push_back(m);
    for (size_t a = 0; a < means.size(); ++a)
      for (size_t b = a + 1; b < means.size(); ++b) {
        VecD dir = sub(means[b], means[a]);
        const double len = norm2(dir);
        if (len > 1e-12)
          for (double& v : dir) v /= len;
        for (double w : {0.2, 0.35, 0.5, 0.65, 0.8}) {
          VecD mid(d);
          for (int j = 0; j < d; ++j) mid[j] = w * means[a][j] + (1.0 - w) * means[b][j];
          probes.push_back(mid);
          for (int axis = 0; axis < d; ++axis) {
            VecD perp(d, 0.0);
            perp[axis] = 1.0;
            axpy(-dir[axis], dir, perp);  // project e_axis off the pair axis
            const double pn = norm2(perp);
            if (pn < 1e-9) continue;
            for (double& v : perp) v /= pn;
            for (double off : {-2.5, -1.5, -0.75, 0.75, 1.5, 2.5}) {
              VecD p = mid;
              axpy(off, perp, p);
              probes.push_back(std::move(p));
            }
          }
        }
      }
  }
  if (n_target_samples > 0) {
    Rng rng(derive_seed(seed, "probe-samples"));
    MatD s = target_sample(model.target(), rng, n_target_samples);
    for (int i = 0; i < s.rows; ++i) {
      VecD row(d);
      for (int j = 0; j < d; ++j) row[j] = s(i, j);
      probes.push_back(std::move(row));
    }
  }
  return probes;
}

EmpiricalLipschitz empirical_lipschitz(const VelocityField& field, double t, double box_radius,
                                       int n_pairs, Rng& rng) {
  const int d = field.dim();
  const int batches = 10;
  const int per_batch = std::max(1, n_pairs / batches);
  VecD batch_max(batches, 0.0);
  VecD x(d);
  for (int b = 0; b < batches; ++b) {
    for (int k = 0; k < per_batch; ++k) {
      for (int j = 0; j < d; ++j) x[j] = rng.uniform(-box_radius, box_radius);
      const VecD u = rng.unit_vector(d);
      const double delta = 1e-3 * (1.0 + norm2(x));
      VecD x2(d);
      for (int j = 0; j < d; ++j) x2[j] = x[j] + delta * u[j];
      const VecD v1 = field(t, x);
      const VecD v2 = field(t, x2);
      const double quot = norm2(sub(v2, v1)) / delta;
      batch_max[b] = std::max(batch_max[b], quot);
    }
  }
  EmpiricalLipschitz out;
  double mean = 0.0;
  for (int b = 0; b < batches; ++b) {
    out.max_quotient = std::max(out.max_quotient, batch_max[b]);
    mean += batch_max[b];
  }
  mean /= batches;
  double var = 0.0;
  for (int b = 0; b < batches; ++b) var += (batch_max[b] - mean) * (batch_max[b] - mean);
  out.se = std::sqrt(var / (batches - 1));
  return out;
}

double default_tstar(const VarianceSchedule& schedule) {
  // sigma is monotone, so bisection on sigma_t = 1/2 is safe; if sigma stays
  // above 1/2 throughout (large sigma_min) the lower clamp applies anyway.
  const double floor = std::pow(2.0, -1.0 / schedule.gamma());
  if (schedule.sigma(1.0) >= 0.5) return floor;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (schedule.sigma(mid) > 0.5) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double t_half = 0.5 * (lo + hi);
  return std::min(std::max(t_half, floor), 1.0 - 1e-9);
}

CovarianceAudit covariance_decay_audit(const MomentModel& model,
                                       const std::vector<VecD>& x_probes, const VecD& t_grid,
                                       double tstar) {
  const auto& schedule = model.schedule();
  const double floor = std::pow(2.0, -1.0 / schedule.gamma());
  if (!(tstar >= floor && tstar < 1.0))
    throw DomainError("covariance_decay_audit: tstar must lie in [2^{-1/gamma}, 1)");
  const int d = model.dim();

  CovarianceAudit audit;
  audit.tstar = tstar;
  for (double t : t_grid) {
    if (t <= 0.0) continue;  // sigma_t / t^gamma blows up at 0
    const double mu = schedule.mu_coeffs(t).first;
    const double ratio = schedule.sigma(t) / mu;
    const double ratio2 = ratio * ratio;
    double max_off = 0.0, max_abs_dev = 0.0, max_rel_dev = 0.0, uni = 0.0;
    for (const VecD& x : x_probes) {
      const PosteriorMoments m = model.moments(t, x);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          uni = std::max(uni, std::fabs(m.cov(i, j)));
          if (i != j) max_off = std::max(max_off, std::fabs(m.cov(i, j)));
        }
        max_abs_dev = std::max(max_abs_dev, std::fabs(m.cov(i, i) - ratio2));
        max_rel_dev = std::max(max_rel_dev, std::fabs(m.cov(i, i) / ratio2 - 1.0));
      }
    }
    audit.t_grid.push_back(t);
    audit.max_offdiag.push_back(max_off);
    audit.max_var_dev_abs.push_back(max_abs_dev);
    audit.max_var_dev_rel.push_back(max_rel_dev);
    audit.uniform_max.push_back(uni);
  }

  VecD lx_off, ly_off, lx_var, ly_var;
  for (size_t i = 0; i < audit.t_grid.size(); ++i) {
    const double t = audit.t_grid[i];
    if (t <= tstar) {
      audit.early_uniform_bound = std::max(audit.early_uniform_bound, audit.uniform_max[i]);
      continue;
    }
    const double mu = schedule.mu_coeffs(t).first;
    const double lratio = std::log(schedule.sigma(t) / mu);
    if (audit.max_offdiag[i] > 1e-13) {
      lx_off.push_back(lratio);
      ly_off.push_back(std::log(audit.max_offdiag[i]));
    }
    if (audit.max_var_dev_rel[i] > 1e-13) {
      lx_var.push_back(lratio);
      ly_var.push_back(std::log(audit.max_var_dev_rel[i]));
    }
  }
  audit.slope_offdiag_available = fit_slope(lx_off, ly_off, audit.slope_offdiag);
  audit.slope_var_dev_available = fit_slope(lx_var, ly_var, audit.slope_var_dev);
  return audit;
}

}  // namespace flowlab
