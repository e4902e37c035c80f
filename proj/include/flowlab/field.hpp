#pragma once

#include <functional>
#include <span>
#include <string>

#include "flowlab/linalg.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/schedules.hpp"
#include "flowlab/targets.hpp"

namespace flowlab {

/// Mean and covariance of the reweighted variable Y^{x,t} with density
/// proportional to p_t(x|.) p*(.), plus estimator quality.
struct PosteriorMoments {
  VecD mean;
  MatD cov;
  double ess = 0.0;     // effective sample size; ignored when exact
  bool exact = false;   // closed form (no estimator noise)
  bool degenerate = false;  // ess below 1% of the sample budget
};

enum class FieldTag { exact_mixture, is_perturbed, learned, conditional };

/// Anything evaluable as (t, x) -> velocity vector. Evaluation is
/// deterministic given (t, x) and, for estimated fields, the frozen seed.
class VelocityField {
 public:
  using Fn = std::function<VecD(double, std::span<const double>)>;

  VelocityField(FieldTag tag, int dim, Fn fn) : tag_(tag), dim_(dim), fn_(std::move(fn)) {}

  VecD operator()(double t, std::span<const double> x) const { return fn_(t, x); }
  FieldTag tag() const { return tag_; }
  int dim() const { return dim_; }

 private:
  FieldTag tag_;
  int dim_;
  Fn fn_;
};

/// Conditional field v_t(x|y) = (sigma'/sigma)(x - t^gamma y) + gamma t^{gamma-1} y.
VecD conditional_velocity(const VarianceSchedule& schedule, double t, std::span<const double> x,
                          std::span<const double> y);

/// Draw from the conditional path: t^gamma y + sigma_t * eps.
VecD conditional_path_sample(const VarianceSchedule& schedule, double t,
                             std::span<const double> y, Rng& rng);

/// Exact posterior moments for a Gaussian mixture target. Each component's
/// posterior is Gaussian (conjugacy); moments combine by the law of total
/// covariance with responsibilities proportional to
/// w_k N(x; t^gamma m_k, sigma_t^2 I + t^{2gamma} S_k).
PosteriorMoments mixture_posterior_moments(const VarianceSchedule& schedule, double t,
                                           std::span<const double> x,
                                           const GaussianMixture& mixture);

/// Marginal field for a mixture: (sigma'/sigma)(x - t^gamma mean) +
/// gamma t^{gamma-1} mean with the exact posterior mean.
VecD mixture_velocity(const VarianceSchedule& schedule, double t, std::span<const double> x,
                      const GaussianMixture& mixture);

/// Marginal density p_t(x) = sum_k w_k N(x; t^gamma m_k, sigma_t^2 I + t^{2gamma} S_k).
double mixture_marginal_density(const VarianceSchedule& schedule, double t,
                                std::span<const double> x, const GaussianMixture& mixture);

/// Parameters of the unperturbed Gaussian posterior used as the proposal:
/// mean t^gamma x / (t^{2gamma} + sigma_t^2), covariance
/// sigma_t^2 / (t^{2gamma} + sigma_t^2) I.
struct GaussianPosterior {
  VecD mean;
  double variance = 0.0;  // isotropic
};
GaussianPosterior unperturbed_posterior(const VarianceSchedule& schedule, double t,
                                        std::span<const double> x);

/// Self-normalized importance sampling of the posterior moments for a
/// perturbed-Gaussian target: proposal = unperturbed Gaussian posterior,
/// weights exp(-a(y)), ess = (sum w)^2 / sum w^2.
PosteriorMoments is_posterior_moments(const VarianceSchedule& schedule, double t,
                                      std::span<const double> x,
                                      const PerturbedGaussian& target, int n_samples, Rng& rng);

/// Same estimator driven by externally supplied standard-normal innovations
/// (one row per sample). Freezing innovations per t keeps the estimated
/// field smooth in x, which difference-quotient diagnostics rely on.
PosteriorMoments is_posterior_moments_from(const VarianceSchedule& schedule, double t,
                                           std::span<const double> x,
                                           const PerturbedGaussian& target, const MatD& innovations);

/// Velocity from posterior moments (mixture or estimated).
VecD velocity_from_mean(const VarianceSchedule& schedule, double t, std::span<const double> x,
                        std::span<const double> posterior_mean);

/// D_x v_t = (sigma'/sigma) I + (gamma t^{gamma-1} - sigma' t^gamma / sigma)
///           * (t^gamma / sigma^2) * Cov(Y^{x,t}).
MatD jacobian_from_moments(const VarianceSchedule& schedule, double t,
                           const PosteriorMoments& moments);

/// Central-difference Jacobian, column j = (v(t, x+h e_j) - v(t, x-h e_j)) / 2h.
MatD fd_jacobian(const VelocityField& field, double t, std::span<const double> x, double h);

/// Step recommendation for fd_jacobian: 1e-4 (1 + |x|).
double fd_step(std::span<const double> x);

/// Exact marginal field of a Gaussian mixture target.
VelocityField make_mixture_field(const VarianceSchedule& schedule, const GaussianMixture& mixture);

/// Importance-sampled marginal field of a perturbed-Gaussian target with a
/// frozen estimator seed; innovations are derived per t.
VelocityField make_is_field(const VarianceSchedule& schedule, const PerturbedGaussian& target,
                            int n_samples, uint64_t seed);

/// Posterior-moment evaluator for either target family; backs the Lipschitz
/// diagnostics.
class MomentModel {
 public:
  MomentModel(VarianceSchedule schedule, TargetModel target, int is_samples, uint64_t seed);

  PosteriorMoments moments(double t, std::span<const double> x) const;

  /// Two independent half-budget estimates (noise probes); exact targets
  /// return the same moments twice.
  std::pair<PosteriorMoments, PosteriorMoments> moments_split(double t,
                                                              std::span<const double> x) const;

  VecD velocity(double t, std::span<const double> x) const;
  VelocityField field() const;

  int dim() const { return target_dim(target_); }
  const VarianceSchedule& schedule() const { return schedule_; }
  const TargetModel& target() const { return target_; }
  bool is_exact() const;
  int is_samples() const { return is_samples_; }

 private:
  VarianceSchedule schedule_;
  TargetModel target_;
  int is_samples_;
  uint64_t seed_;
};

}  // namespace flowlab
