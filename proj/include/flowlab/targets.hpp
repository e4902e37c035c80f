#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "flowlab/linalg.hpp"
#include "flowlab/rng.hpp"

namespace flowlab {

/// Explicit Gaussian mixture; the exact-oracle target family.
class GaussianMixture {
 public:
  GaussianMixture(VecD weights, std::vector<VecD> means, std::vector<MatD> covariances);

  int dim() const { return dim_; }
  int components() const { return static_cast<int>(weights_.size()); }
  const VecD& weights() const { return weights_; }
  const std::vector<VecD>& means() const { return means_; }
  const std::vector<MatD>& covariances() const { return covs_; }
  const std::vector<MatD>& cholesky_factors() const { return chols_; }

  double log_density(std::span<const double> x) const;
  VecD grad_log_density(std::span<const double> x) const;
  MatD sample(Rng& rng, int n) const;

  VecD mean() const;
  MatD covariance() const;

 private:
  int dim_;
  VecD weights_;
  std::vector<VecD> means_;
  std::vector<MatD> covs_;
  std::vector<MatD> chols_;
};

/// C^2 perturbation with analytic gradient/Hessian and a declared bound L
/// covering sup|a|, sup|da_i| and sup|d2a_ij|.
struct Perturbation {
  std::string name;
  double amplitude = 0.0;
  double bound = 0.0;  // L
  std::function<double(std::span<const double>)> value;
  std::function<VecD(std::span<const double>)> gradient;   // may be empty
  std::function<MatD(std::span<const double>)> hessian;    // may be empty
};

/// Built-in perturbation catalog: zero | sin | cos_sum | gauss_bump.
///   zero:       a = 0                         L = 0
///   sin:        a = c sin(x_1)                L = c
///   cos_sum:    a = c sum_i cos(x_i)          L = c d
///   gauss_bump: a = c exp(-|x|^2 / 2)         L = c
Perturbation make_perturbation(const std::string& name, double amplitude, int dim);

/// Density proportional to exp(-|x|^2/2 - a(x)) with bounded perturbation a.
class PerturbedGaussian {
 public:
  PerturbedGaussian(int dim, Perturbation perturbation);

  int dim() const { return dim_; }
  double bound() const { return pert_.bound; }
  const Perturbation& perturbation() const { return pert_; }

  /// -|x|^2/2 - a(x); unnormalized.
  double log_density_unnorm(std::span<const double> x) const;
  VecD grad_log_density(std::span<const double> x) const;

  /// Rejection sampling with a standard-normal proposal; acceptance
  /// probability exp(-a(y) - L) lies in [e^{-2L}, 1].
  MatD sample(Rng& rng, int n) const;

  /// Accepted count vs proposal count for a fixed number of proposals.
  std::pair<long, long> acceptance_trial(Rng& rng, long proposals) const;

 private:
  int dim_;
  Perturbation pert_;
};

using TargetModel = std::variant<GaussianMixture, PerturbedGaussian>;

int target_dim(const TargetModel& target);
double target_log_density_unnorm(const TargetModel& target, std::span<const double> x);
VecD target_grad_log_density(const TargetModel& target, std::span<const double> x);
MatD target_sample(const TargetModel& target, Rng& rng, int n);

}  // namespace flowlab
