#pragma once

#include <utility>
#include <vector>

#include "flowlab/field.hpp"
#include "flowlab/linalg.hpp"

namespace flowlab {

/// Probe-set approximation of the entrywise sup defining the B matrix.
struct BMatrixResult {
  MatD b;
  std::vector<int> degenerate_probes;  // probe indices with flagged estimates
  double se = 0.0;                     // half-split noise scale of max entry (0 when exact)
};

/// entry (i,j) = max over probes of |sigma'/sigma 1_{i=j}
///   + (gamma t^{gamma-1} - sigma' t^gamma / sigma)(t^gamma / sigma^2) Cov_ij|.
BMatrixResult b_matrix(double t, const MomentModel& model,
                       const std::vector<VecD>& x_probes);

/// (max_ij B, d * max_ij B): the sandwich around the spatial Lipschitz
/// constant of the marginal field.
std::pair<double, double> gamma_bounds(double t, const MomentModel& model,
                                       const std::vector<VecD>& x_probes);

struct LipschitzReport {
  VecD t_grid;
  VecD b_max;   // per-t max entry of the B matrix over the probe set
  VecD lower;   // = b_max
  VecD upper;   // = d * b_max
  VecD se;      // per-t estimator noise scale (0 for exact targets)
  double integral_lower = 0.0;
  double integral_upper = 0.0;
  double gronwall = 0.0;
  bool gronwall_overflow = false;
};

/// Trapezoid integrals of the lower/upper Lipschitz envelopes on the grid.
std::pair<double, double> integral_gamma(const MomentModel& model, const VecD& t_grid,
                                         const std::vector<VecD>& x_probes);

struct GronwallFactor {
  double value = 0.0;
  bool overflow = false;
};

/// sqrt(2e) * exp(integral_upper); flagged +inf when the exponent overflows.
GronwallFactor gronwall_factor(double integral_upper);

LipschitzReport lipschitz_scan(const MomentModel& model, const VecD& t_grid,
                               const std::vector<VecD>& x_probes);

/// 128 Chebyshev-spaced points on [0, 1] by default (dense near the ends,
/// where sigma_t is small).
VecD chebyshev_grid(int n = 128);

/// Deterministic low-discrepancy probe set over [-R, R]^d with
/// R = 3 + 3 * (target mean radius), plus `n_target_samples` target draws.
std::vector<VecD> make_probe_set(const MomentModel& model, int n_grid, int n_target_samples,
                                 uint64_t seed);

/// Half-width R of the probe box used by make_probe_set.
double probe_box_radius(const TargetModel& target);

struct EmpiricalLipschitz {
  double max_quotient = 0.0;
  double se = 0.0;  // standard deviation of batch maxima
};

/// Max difference quotient |v(t, x + delta u) - v(t, x)| / delta over random
/// (point, direction) pairs inside the probe box. SE is the spread of the
/// per-batch maxima (10 batches).
EmpiricalLipschitz empirical_lipschitz(const VelocityField& field, double t, double box_radius,
                                       int n_pairs, Rng& rng);

struct CovarianceAudit {
  VecD t_grid;             // audited grid (t = 0 excluded)
  VecD max_offdiag;        // per-t max over probes of |Cov_ij|, i != j
  VecD max_var_dev_abs;    // per-t max_i |Var_i - (sigma_t/t^gamma)^2|
  VecD max_var_dev_rel;    // per-t max_i |Var_i / (sigma_t/t^gamma)^2 - 1|
  VecD uniform_max;        // per-t max over all i,j of |Cov_ij|
  double tstar = 0.0;
  double slope_offdiag = 0.0;      // log-log fit vs sigma_t/t^gamma, t > t*
  bool slope_offdiag_available = false;
  double slope_var_dev = 0.0;      // fit of the relative variance deviation
  bool slope_var_dev_available = false;
  double early_uniform_bound = 0.0;  // max of uniform_max over t <= t*
};

/// Numerical audit of the covariance decay regimes: late-regime log-log
/// slopes (expected >= 3 off-diagonal and >= 1 for the variance deviation)
/// and the early-regime uniform bound to compare against e^{4L}.
CovarianceAudit covariance_decay_audit(const MomentModel& model,
                                       const std::vector<VecD>& x_probes, const VecD& t_grid,
                                       double tstar);

/// Default regime boundary: the sigma_{t*} = 1/2 point, clamped into
/// [2^{-1/gamma}, 1) as the decay conditions require.
double default_tstar(const VarianceSchedule& schedule);

}  // namespace flowlab
