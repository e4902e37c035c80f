#include "flowlab/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "flowlab/errors.hpp"

namespace flowlab {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

void require_unit_interval(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("field: t must lie in [0,1]");
}

/// Innovations for the frozen estimator stream of a given t.
MatD frozen_innovations(uint64_t seed, double t, int n_samples, int dim) {
  Rng rng(mix_bits(seed, t));
  MatD eps(n_samples, dim);
  for (int i = 0; i < n_samples; ++i)
    for (int j = 0; j < dim; ++j) eps(i, j) = rng.normal();
  return eps;
}

}  // namespace

VecD conditional_velocity(const VarianceSchedule& schedule, double t, std::span<const double> x,
                          std::span<const double> y) {
  require_unit_interval(t);
  const double q = schedule.log_quotient(t);
  const auto [mu, dmu] = schedule.mu_coeffs(t);
  VecD v(x.size());
  for (size_t i = 0; i < x.size(); ++i) v[i] = q * (x[i] - mu * y[i]) + dmu * y[i];
  return v;
}

VecD conditional_path_sample(const VarianceSchedule& schedule, double t,
                             std::span<const double> y, Rng& rng) {
  require_unit_interval(t);
  const double s = schedule.sigma(t);
  const double mu = schedule.mu_coeffs(t).first;
  VecD x(y.size());
  for (size_t i = 0; i < y.size(); ++i) x[i] = mu * y[i] + s * rng.normal();
  return x;
}

PosteriorMoments mixture_posterior_moments(const VarianceSchedule& schedule, double t,
                                           std::span<const double> x,
                                           const GaussianMixture& mixture) {
  require_unit_interval(t);
  const int d = mixture.dim();
  const int kc = mixture.components();
  const double s2 = schedule.sigma(t) * schedule.sigma(t);
  const double mu = schedule.mu_coeffs(t).first;
  const double mu2_over_s2 = mu * mu / s2;

  // Per-component posterior: precision S_k^{-1} + (t^{2g}/s^2) I; the
  // responsibilities come from the component marginals
  // N(x; mu m_k, s^2 I + mu^2 S_k).
  std::vector<VecD> pmeans(kc);
  std::vector<MatD> pcovs(kc);
  VecD logr(kc);
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kc; ++k) {
    const MatD& s_k = mixture.covariances()[k];
    const VecD& m_k = mixture.means()[k];

    MatD marginal(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) marginal(i, j) = mu * mu * s_k(i, j) + (i == j ? s2 : 0.0);
    auto lm = cholesky(marginal);
    if (!lm) throw DomainError("mixture posterior: singular marginal covariance");
    VecD centered(d);
    for (int i = 0; i < d; ++i) centered[i] = x[i] - mu * m_k[i];
    VecD z(d);
    for (int i = 0; i < d; ++i) {
      double sum = centered[i];
      for (int j = 0; j < i; ++j) sum -= (*lm)(i, j) * z[j];
      z[i] = sum / (*lm)(i, i);
    }
    logr[k] = std::log(mixture.weights()[k]) -
              0.5 * (d * kLog2Pi + cholesky_logdet(*lm) + dot(z, z));
    best = std::max(best, logr[k]);

    MatD spk_inv = spd_inverse(s_k);
    MatD prec = spk_inv;
    for (int i = 0; i < d; ++i) prec(i, i) += mu2_over_s2;
    pcovs[k] = spd_inverse(prec);
    VecD rhs = matvec(spk_inv, m_k);
    for (int i = 0; i < d; ++i) rhs[i] += mu / s2 * x[i];
    pmeans[k] = matvec(pcovs[k], rhs);
  }

  double norm = 0.0;
  for (int k = 0; k < kc; ++k) norm += std::exp(logr[k] - best);

  PosteriorMoments out;
  out.exact = true;
  out.ess = std::numeric_limits<double>::infinity();
  out.mean.assign(d, 0.0);
  VecD resp(kc);
  for (int k = 0; k < kc; ++k) {
    resp[k] = std::exp(logr[k] - best) / norm;
    axpy(resp[k], pmeans[k], out.mean);
  }
  out.cov = MatD(d, d);
  for (int k = 0; k < kc; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out.cov(i, j) += resp[k] * (pcovs[k](i, j) +
                                    (pmeans[k][i] - out.mean[i]) * (pmeans[k][j] - out.mean[j]));
  symmetrize(out.cov);
  return out;
}

VecD velocity_from_mean(const VarianceSchedule& schedule, double t, std::span<const double> x,
                        std::span<const double> posterior_mean) {
  const double q = schedule.log_quotient(t);
  const auto [mu, dmu] = schedule.mu_coeffs(t);
  VecD v(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    v[i] = q * (x[i] - mu * posterior_mean[i]) + dmu * posterior_mean[i];
  return v;
}

VecD mixture_velocity(const VarianceSchedule& schedule, double t, std::span<const double> x,
                      const GaussianMixture& mixture) {
  const PosteriorMoments m = mixture_posterior_moments(schedule, t, x, mixture);
  return velocity_from_mean(schedule, t, x, m.mean);
}

double mixture_marginal_density(const VarianceSchedule& schedule, double t,
                                std::span<const double> x, const GaussianMixture& mixture) {
  require_unit_interval(t);
  const int d = mixture.dim();
  const double s2 = schedule.sigma(t) * schedule.sigma(t);
  const double mu = schedule.mu_coeffs(t).first;
  double p = 0.0;
  for (int k = 0; k < mixture.components(); ++k) {
    MatD marginal(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        marginal(i, j) = mu * mu * mixture.covariances()[k](i, j) + (i == j ? s2 : 0.0);
    auto lm = cholesky(marginal);
    if (!lm) throw DomainError("mixture marginal: singular covariance");
    VecD centered(d);
    for (int i = 0; i < d; ++i) centered[i] = x[i] - mu * mixture.means()[k][i];
    VecD z(d);
    for (int i = 0; i < d; ++i) {
      double sum = centered[i];
      for (int j = 0; j < i; ++j) sum -= (*lm)(i, j) * z[j];
      z[i] = sum / (*lm)(i, i);
    }
    p += mixture.weights()[k] *
         std::exp(-0.5 * (d * kLog2Pi + cholesky_logdet(*lm) + dot(z, z)));
  }
  return p;
}

GaussianPosterior unperturbed_posterior(const VarianceSchedule& schedule, double t,
                                        std::span<const double> x) {
  require_unit_interval(t);
  const double s2 = schedule.sigma(t) * schedule.sigma(t);
  const double mu = schedule.mu_coeffs(t).first;
  const double denom = mu * mu + s2;
  GaussianPosterior g;
  g.variance = s2 / denom;
  g.mean.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) g.mean[i] = mu * x[i] / denom;
  return g;
}

PosteriorMoments is_posterior_moments_from(const VarianceSchedule& schedule, double t,
                                           std::span<const double> x,
                                           const PerturbedGaussian& target,
                                           const MatD& innovations) {
  const int d = target.dim();
  const int n = innovations.rows;
  if (n < 100) throw DomainError("is_posterior_moments: need at least 100 samples");
  const GaussianPosterior prop = unperturbed_posterior(schedule, t, x);
  const double sd = std::sqrt(prop.variance);

  // Self-normalized weights exp(-a(y)); stabilized by the max log-weight.
  VecD logw(n);
  MatD ys(n, d);
  double best = -std::numeric_limits<double>::infinity();
  VecD y(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      y[j] = prop.mean[j] + sd * innovations(i, j);
      ys(i, j) = y[j];
    }
    logw[i] = -target.perturbation().value(y);
    best = std::max(best, logw[i]);
  }
  double wsum = 0.0, w2sum = 0.0;
  VecD mean(d, 0.0);
  VecD w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = std::exp(logw[i] - best);
    wsum += w[i];
    w2sum += w[i] * w[i];
    for (int j = 0; j < d; ++j) mean[j] += w[i] * ys(i, j);
  }
  for (int j = 0; j < d; ++j) mean[j] /= wsum;

  MatD cov(d, d);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) {
      const double da = ys(i, a) - mean[a];
      for (int b = a; b < d; ++b) cov(a, b) += w[i] * da * (ys(i, b) - mean[b]);
    }
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      cov(a, b) /= wsum;
      cov(b, a) = cov(a, b);
    }

  PosteriorMoments out;
  out.mean = std::move(mean);
  out.cov = psd_floor(cov);
  out.ess = wsum * wsum / w2sum;
  out.exact = false;
  out.degenerate = out.ess < 0.01 * n;
  return out;
}

PosteriorMoments is_posterior_moments(const VarianceSchedule& schedule, double t,
                                      std::span<const double> x, const PerturbedGaussian& target,
                                      int n_samples, Rng& rng) {
  MatD eps(n_samples, target.dim());
  for (int i = 0; i < n_samples; ++i)
    for (int j = 0; j < target.dim(); ++j) eps(i, j) = rng.normal();
  return is_posterior_moments_from(schedule, t, x, target, eps);
}

MatD jacobian_from_moments(const VarianceSchedule& schedule, double t,
                           const PosteriorMoments& moments) {
  const int d = static_cast<int>(moments.mean.size());
  const double q = schedule.log_quotient(t);
  const double s = schedule.sigma(t);
  const auto [mu, dmu] = schedule.mu_coeffs(t);
  const double coef = (dmu - q * mu) * mu / (s * s);
  MatD j(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) j(a, b) = (a == b ? q : 0.0) + coef * moments.cov(a, b);
  return j;
}

MatD fd_jacobian(const VelocityField& field, double t, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw DomainError("fd_jacobian: step must be positive");
  const int d = field.dim();
  MatD j(d, d);
  VecD xp(x.begin(), x.end());
  for (int col = 0; col < d; ++col) {
    const double keep = xp[col];
    xp[col] = keep + h;
    VecD vp = field(t, xp);
    xp[col] = keep - h;
    VecD vm = field(t, xp);
    xp[col] = keep;
    for (int row = 0; row < d; ++row) j(row, col) = (vp[row] - vm[row]) / (2.0 * h);
  }
  return j;
}

double fd_step(std::span<const double> x) { return 1e-4 * (1.0 + norm2(x)); }

VelocityField make_mixture_field(const VarianceSchedule& schedule, const GaussianMixture& mixture) {
  return VelocityField(FieldTag::exact_mixture, mixture.dim(),
                       [schedule, mixture](double t, std::span<const double> x) {
                         return mixture_velocity(schedule, t, x, mixture);
                       });
}

VelocityField make_is_field(const VarianceSchedule& schedule, const PerturbedGaussian& target,
                            int n_samples, uint64_t seed) {
  return VelocityField(
      FieldTag::is_perturbed, target.dim(),
      [schedule, target, n_samples, seed](double t, std::span<const double> x) {
        const MatD eps = frozen_innovations(seed, t, n_samples, target.dim());
        const PosteriorMoments m = is_posterior_moments_from(schedule, t, x, target, eps);
        return velocity_from_mean(schedule, t, x, m.mean);
      });
}

MomentModel::MomentModel(VarianceSchedule schedule, TargetModel target, int is_samples,
                         uint64_t seed)
    : schedule_(std::move(schedule)),
      target_(std::move(target)),
      is_samples_(is_samples),
      seed_(seed) {}

bool MomentModel::is_exact() const { return std::holds_alternative<GaussianMixture>(target_); }

PosteriorMoments MomentModel::moments(double t, std::span<const double> x) const {
  if (const auto* m = std::get_if<GaussianMixture>(&target_))
    return mixture_posterior_moments(schedule_, t, x, *m);
  const auto& pg = std::get<PerturbedGaussian>(target_);
  const MatD eps = frozen_innovations(seed_, t, is_samples_, pg.dim());
  return is_posterior_moments_from(schedule_, t, x, pg, eps);
}

std::pair<PosteriorMoments, PosteriorMoments> MomentModel::moments_split(
    double t, std::span<const double> x) const {
  if (const auto* m = std::get_if<GaussianMixture>(&target_)) {
    auto mm = mixture_posterior_moments(schedule_, t, x, *m);
    return {mm, mm};
  }
  const auto& pg = std::get<PerturbedGaussian>(target_);
  const int half = std::max(100, is_samples_ / 2);
  const MatD eps_a = frozen_innovations(seed_, t, half, pg.dim());
  const MatD eps_b = frozen_innovations(derive_seed(seed_, "moments-split"), t, half, pg.dim());
  return {is_posterior_moments_from(schedule_, t, x, pg, eps_a),
          is_posterior_moments_from(schedule_, t, x, pg, eps_b)};
}

VecD MomentModel::velocity(double t, std::span<const double> x) const {
  return velocity_from_mean(schedule_, t, x, moments(t, x).mean);
}

VelocityField MomentModel::field() const {
  if (const auto* m = std::get_if<GaussianMixture>(&target_))
    return make_mixture_field(schedule_, *m);
  return make_is_field(schedule_, std::get<PerturbedGaussian>(target_), is_samples_, seed_);
}

}  // namespace flowlab
