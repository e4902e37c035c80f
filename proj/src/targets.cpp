#include "flowlab/targets.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "flowlab/errors.hpp"

namespace flowlab {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

double gaussian_log_density(std::span<const double> x, std::span<const double> mean,
                            const MatD& chol) {
  const int d = static_cast<int>(mean.size());
  VecD diff(d);
  for (int i = 0; i < d; ++i) diff[i] = x[i] - mean[i];
  // Solve L z = diff; quadratic form is |z|^2.
  VecD z(d);
  for (int i = 0; i < d; ++i) {
    double s = diff[i];
    for (int k = 0; k < i; ++k) s -= chol(i, k) * z[k];
    z[i] = s / chol(i, i);
  }
  return -0.5 * (d * kLog2Pi + cholesky_logdet(chol) + dot(z, z));
}

}  // namespace

GaussianMixture::GaussianMixture(VecD weights, std::vector<VecD> means,
                                 std::vector<MatD> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covariances)) {
  if (weights_.empty() || weights_.size() != means_.size() || weights_.size() != covs_.size())
    throw ConstructionError("mixture: weights, means and covariances must align");
  dim_ = static_cast<int>(means_[0].size());
  double wsum = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw ConstructionError("mixture: weights must be positive");
    wsum += w;
  }
  if (std::fabs(wsum - 1.0) > 1e-12) throw ConstructionError("mixture: weights must sum to 1");
  for (size_t k = 0; k < covs_.size(); ++k) {
    if (static_cast<int>(means_[k].size()) != dim_ || covs_[k].rows != dim_ || covs_[k].cols != dim_)
      throw ConstructionError("mixture: inconsistent dimensions");
    auto l = cholesky(covs_[k]);
    if (!l) throw ConstructionError("mixture: covariance is not symmetric positive definite");
    chols_.push_back(*l);
  }
}

double GaussianMixture::log_density(std::span<const double> x) const {
  if (!all_finite(x)) throw DomainError("mixture: non-finite input");
  // log-sum-exp over components.
  double best = -std::numeric_limits<double>::infinity();
  VecD logs(components());
  for (int k = 0; k < components(); ++k) {
    logs[k] = std::log(weights_[k]) + gaussian_log_density(x, means_[k], chols_[k]);
    best = std::max(best, logs[k]);
  }
  double s = 0.0;
  for (double v : logs) s += std::exp(v - best);
  return best + std::log(s);
}

VecD GaussianMixture::grad_log_density(std::span<const double> x) const {
  if (!all_finite(x)) throw DomainError("mixture: non-finite input");
  // grad log p = sum_k r_k(x) * Sigma_k^{-1} (m_k - x), responsibilities r_k.
  VecD logs(components());
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < components(); ++k) {
    logs[k] = std::log(weights_[k]) + gaussian_log_density(x, means_[k], chols_[k]);
    best = std::max(best, logs[k]);
  }
  double norm = 0.0;
  for (double v : logs) norm += std::exp(v - best);
  VecD g(dim_, 0.0);
  for (int k = 0; k < components(); ++k) {
    const double r = std::exp(logs[k] - best) / norm;
    VecD diff(dim_);
    for (int i = 0; i < dim_; ++i) diff[i] = means_[k][i] - x[i];
    VecD v = cholesky_solve(chols_[k], diff);
    axpy(r, v, g);
  }
  return g;
}

MatD GaussianMixture::sample(Rng& rng, int n) const {
  if (n < 1) throw DomainError("mixture: sample count must be >= 1");
  MatD out(n, dim_);
  for (int row = 0; row < n; ++row) {
    const double u = rng.uniform01();
    int k = 0;
    double acc = 0.0;
    for (; k < components(); ++k) {
      acc += weights_[k];
      if (u < acc) break;
    }
    if (k == components()) k = components() - 1;
    VecD z = rng.normal_vec(dim_);
    for (int i = 0; i < dim_; ++i) {
      double v = means_[k][i];
      for (int j = 0; j <= i; ++j) v += chols_[k](i, j) * z[j];
      out(row, i) = v;
    }
  }
  return out;
}

VecD GaussianMixture::mean() const {
  VecD m(dim_, 0.0);
  for (int k = 0; k < components(); ++k) axpy(weights_[k], means_[k], m);
  return m;
}

MatD GaussianMixture::covariance() const {
  // Law of total covariance over components.
  const VecD m = mean();
  MatD c(dim_, dim_);
  for (int k = 0; k < components(); ++k) {
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j)
        c(i, j) += weights_[k] *
                   (covs_[k](i, j) + (means_[k][i] - m[i]) * (means_[k][j] - m[j]));
  }
  return c;
}

Perturbation make_perturbation(const std::string& name, double amplitude, int dim) {
  Perturbation p;
  p.name = name;
  p.amplitude = amplitude;
  if (amplitude < 0.0) throw ConstructionError("perturbation: amplitude must be >= 0");
  const double c = amplitude;
  if (name == "zero") {
    p.bound = 0.0;
    p.value = [](std::span<const double>) { return 0.0; };
    p.gradient = [dim](std::span<const double>) { return VecD(dim, 0.0); };
    p.hessian = [dim](std::span<const double>) { return MatD(dim, dim); };
  } else if (name == "sin") {
    p.bound = c;
    p.value = [c](std::span<const double> x) { return c * std::sin(x[0]); };
    p.gradient = [c, dim](std::span<const double> x) {
      VecD g(dim, 0.0);
      g[0] = c * std::cos(x[0]);
      return g;
    };
    p.hessian = [c, dim](std::span<const double> x) {
      MatD h(dim, dim);
      h(0, 0) = -c * std::sin(x[0]);
      return h;
    };
  } else if (name == "cos_sum") {
    p.bound = c * dim;
    p.value = [c](std::span<const double> x) {
      double s = 0.0;
      for (double v : x) s += std::cos(v);
      return c * s;
    };
    p.gradient = [c, dim](std::span<const double> x) {
      VecD g(dim);
      for (int i = 0; i < dim; ++i) g[i] = -c * std::sin(x[i]);
      return g;
    };
    p.hessian = [c, dim](std::span<const double> x) {
      MatD h(dim, dim);
      for (int i = 0; i < dim; ++i) h(i, i) = -c * std::cos(x[i]);
      return h;
    };
  } else if (name == "gauss_bump") {
    // a = c exp(-|x|^2/2): |a| <= c, |grad a|_inf <= c e^{-1/2},
    // |hess a|_inf <= c, so the shared bound is c.
    p.bound = c;
    auto bump = [c](std::span<const double> x) {
      return c * std::exp(-0.5 * dot(x, x));
    };
    p.value = bump;
    p.gradient = [bump, dim](std::span<const double> x) {
      const double b = bump(x);
      VecD g(dim);
      for (int i = 0; i < dim; ++i) g[i] = -x[i] * b;
      return g;
    };
    p.hessian = [bump, dim](std::span<const double> x) {
      const double b = bump(x);
      MatD h(dim, dim);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) h(i, j) = (x[i] * x[j] - (i == j ? 1.0 : 0.0)) * b;
      return h;
    };
  } else {
    throw ConstructionError("perturbation: unknown catalog entry '" + name + "'");
  }
  return p;
}

PerturbedGaussian::PerturbedGaussian(int dim, Perturbation perturbation)
    : dim_(dim), pert_(std::move(perturbation)) {
  if (dim_ < 1) throw ConstructionError("perturbed target: dimension must be >= 1");
  if (!pert_.value) throw ConstructionError("perturbed target: perturbation needs a value callable");
  // Probe the declared bound at the origin and at random points.
  Rng probe_rng(0x9e3779b97f4a7c15ULL);
  const double tol = 1e-9;
  for (int i = 0; i < 100; ++i) {
    VecD x = (i == 0) ? VecD(dim_, 0.0) : probe_rng.normal_vec(dim_);
    if (std::fabs(pert_.value(x)) > pert_.bound + tol)
      throw ConstructionError("perturbed target: |a| exceeds the declared bound");
    if (pert_.gradient) {
      for (double g : pert_.gradient(x))
        if (std::fabs(g) > pert_.bound + tol)
          throw ConstructionError("perturbed target: |grad a| exceeds the declared bound");
    }
    if (pert_.hessian) {
      if (max_abs(pert_.hessian(x)) > pert_.bound + tol)
        throw ConstructionError("perturbed target: |hess a| exceeds the declared bound");
    }
  }
}

double PerturbedGaussian::log_density_unnorm(std::span<const double> x) const {
  if (!all_finite(x)) throw DomainError("perturbed target: non-finite input");
  return -0.5 * dot(x, x) - pert_.value(x);
}

VecD PerturbedGaussian::grad_log_density(std::span<const double> x) const {
  if (!all_finite(x)) throw DomainError("perturbed target: non-finite input");
  if (!pert_.gradient)
    throw CapabilityError("perturbed target: perturbation lacks a gradient callable");
  VecD g = pert_.gradient(x);
  for (int i = 0; i < dim_; ++i) g[i] = -x[i] - g[i];
  return g;
}

MatD PerturbedGaussian::sample(Rng& rng, int n) const {
  if (n < 1) throw DomainError("perturbed target: sample count must be >= 1");
  MatD out(n, dim_);
  const double l = pert_.bound;
  for (int row = 0; row < n; ++row) {
    // Accept with probability exp(-a(y) - L) in [e^{-2L}, 1]; geometric
    // number of proposals, so this always terminates.
    while (true) {
      VecD y = rng.normal_vec(dim_);
      const double accept = std::exp(-pert_.value(y) - l);
      if (rng.uniform01() < accept) {
        for (int i = 0; i < dim_; ++i) out(row, i) = y[i];
        break;
      }
    }
  }
  return out;
}

std::pair<long, long> PerturbedGaussian::acceptance_trial(Rng& rng, long proposals) const {
  long accepted = 0;
  const double l = pert_.bound;
  for (long i = 0; i < proposals; ++i) {
    VecD y = rng.normal_vec(dim_);
    if (rng.uniform01() < std::exp(-pert_.value(y) - l)) ++accepted;
  }
  return {accepted, proposals};
}

int target_dim(const TargetModel& target) {
  return std::visit([](const auto& t) { return t.dim(); }, target);
}

double target_log_density_unnorm(const TargetModel& target, std::span<const double> x) {
  if (const auto* m = std::get_if<GaussianMixture>(&target)) return m->log_density(x);
  return std::get<PerturbedGaussian>(target).log_density_unnorm(x);
}

VecD target_grad_log_density(const TargetModel& target, std::span<const double> x) {
  if (const auto* m = std::get_if<GaussianMixture>(&target)) return m->grad_log_density(x);
  return std::get<PerturbedGaussian>(target).grad_log_density(x);
}

MatD target_sample(const TargetModel& target, Rng& rng, int n) {
  if (const auto* m = std::get_if<GaussianMixture>(&target)) return m->sample(rng, n);
  return std::get<PerturbedGaussian>(target).sample(rng, n);
}

}  // namespace flowlab
