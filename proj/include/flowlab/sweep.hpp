#pragma once

#include <string>
#include <vector>

#include "flowlab/cfm.hpp"
#include "flowlab/flow_ode.hpp"
#include "flowlab/targets.hpp"
#include "flowlab/wasserstein.hpp"

namespace flowlab {

struct SweepConfig {
  std::vector<int> n_grid;
  int n_seeds = 3;
  double alpha = 1.0;
  double eta = 1.0;
  bool exact_field_control = false;  // skip training, push through the exact field
  TrainConfig train;                 // template; n, sigma_min, seed set per cell
  IntegratorConfig integrator;
  int eval_m = 2000;
  int n_proj = 64;
  uint64_t seed = 0;
};

struct SweepRow {
  int n = 0;
  double sigma_min = 0.0;
  uint64_t seed = 0;
  double w1 = 0.0;
  bool ok = false;
  std::string estimator;
};

struct SweepSummaryRow {
  int n = 0;
  double median = 0.0;
  double iqr = 0.0;
  double ref_slope = 0.0;
  int valid_runs = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSummaryRow> summary;
  double ref_slope = 0.0;
  double fitted_slope = 0.0;
  bool fitted_slope_available = false;
};

/// For each n: subsample training data, pick sigma_min(n), train (or use the
/// exact field in the control arm), push latent samples and measure W1
/// against held-out target draws. Failed cells are recorded, not fatal.
SweepResult rate_sweep(const TargetModel& target, const SweepConfig& cfg);

}  // namespace flowlab
