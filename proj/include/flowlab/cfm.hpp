#pragma once

#include <vector>

#include "flowlab/field.hpp"
#include "flowlab/mlp.hpp"
#include "flowlab/schedules.hpp"
#include "flowlab/targets.hpp"

namespace flowlab {

struct TrainConfig {
  int n = 0;                // training sample count
  double sigma_min = 0.0;   // 0 => derive from n (see sigma_min_of_n)
  int batch = 128;
  int steps = 5000;
  double lr = 1e-3;
  double lr_final = -1.0;   // < 0 => constant at lr
  std::vector<int> hidden = {64, 64, 64};
  double perturbation_bound = 0.0;  // L entering the output cap; 0 for mixtures
  uint64_t seed = 0;
};

/// One step's worth of regression data: per row a time t_i, a path point
/// X_{t_i} and the conditional-velocity target.
struct CfmBatch {
  VecD t;
  MatD x;
  MatD target;
};

/// Draws t ~ U[0,1] and X_t = t y + sigma_t eps per batch row (gamma = 1,
/// geometric schedule), with targets from the conditional field.
CfmBatch draw_cfm_batch(const MatD& data, std::span<const int> rows,
                        const VarianceSchedule& schedule, Rng& rng);

/// Mean squared velocity mismatch over the batch. The targets are constants;
/// gradients only flow through the network.
double cfm_loss(const MlpNetwork& net, const CfmBatch& batch);
double cfm_loss_grad(const MlpNetwork& net, const CfmBatch& batch,
                     MlpNetwork::Gradients& grads);

/// Convenience wrapper: sample the batch internally and return loss +
/// gradients in one call.
double cfm_step_loss(const MlpNetwork& net, const MatD& data_batch,
                     const VarianceSchedule& schedule, Rng& rng,
                     MlpNetwork::Gradients& grads);

struct TrainResult {
  MlpNetwork net;
  VecD loss_trace;
  bool diverged = false;
  int divergence_step = -1;
};

/// Minibatch Adam on the empirical conditional objective. Enforces the
/// geometric schedule with gamma = 1. Deterministic given config.seed.
TrainResult train_cfm(const MatD& data, const TrainConfig& config,
                      const VarianceSchedule& schedule);

/// Wraps a trained network as a velocity field.
VelocityField make_learned_field(const MlpNetwork& net);

struct ObjectiveGap {
  double fm = 0.0;    // marginal-field objective
  double cfm = 0.0;   // conditional objective
  double cvar = 0.0;  // conditional-variance term
  double gap = 0.0;   // |fm - (cfm - cvar)|
  bool converged = false;  // gap < quad_tol
};

/// Quadrature evaluation of the three objectives for a 1D mixture target.
/// The identity fm = cfm - cvar must close within quad_tol.
ObjectiveGap objective_gap_check(const VelocityField& net_field, const GaussianMixture& mixture,
                                 const VarianceSchedule& schedule, double quad_tol,
                                 int hermite_nodes = 200);

}  // namespace flowlab
