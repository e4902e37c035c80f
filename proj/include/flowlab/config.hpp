#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowlab/cfm.hpp"
#include "flowlab/flow_ode.hpp"
#include "flowlab/schedules.hpp"
#include "flowlab/sweep.hpp"
#include "flowlab/targets.hpp"

namespace flowlab {

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::geometric;
  double sigma_min = 0.1;
  double gamma = 1.0;
  VecD coeffs;  // poly only
};

struct MixtureComponentSpec {
  double weight = 1.0;
  VecD mean;
  MatD cov;
};

struct TargetSpec {
  std::string type = "mixture";  // mixture | perturbed
  int dim = 1;
  std::vector<MixtureComponentSpec> components;
  std::string perturbation = "zero";
  double amplitude = 0.0;
};

struct TrainSpec {
  int n = 2000;
  bool sigma_min_auto = true;
  double sigma_min = 0.0;  // used when !sigma_min_auto
  int batch = 128;
  int steps = 5000;
  double lr = 1e-3;
  double lr_final = -1.0;
  std::vector<int> hidden = {64, 64, 64};
};

struct IntegrateSpec {
  int steps = 256;
  std::string method = "rk4";  // rk4 | euler
};

struct EvalSpec {
  int m = 2000;
  int n_proj = 64;
  std::string estimator = "auto";  // auto | exact1d | assignment | sliced
  int assignment_cap = 512;
};

struct LipschitzSpec {
  int t_nodes = 128;
  int is_samples = 4000;
  int probe_grid = 128;
  int probe_samples = 100;
  bool tstar_auto = true;
  double tstar = 0.0;
  int pairs = 10000;
};

struct SweepSpec {
  std::vector<int> n_grid = {250, 1000, 4000};
  int seeds = 3;
  double alpha = 1.0;
  double eta = 1.0;
  std::string mode = "trained";  // trained | exact
};

/// Whole experiment description; round-trips losslessly through
/// serialize/parse and rejects unknown keys.
struct ExperimentConfig {
  uint64_t seed = 0;
  std::string out = "out";
  ScheduleSpec schedule;
  TargetSpec target;
  TrainSpec train;
  IntegrateSpec integrate;
  EvalSpec eval;
  LipschitzSpec lipschitz;
  SweepSpec sweep;

  VarianceSchedule make_schedule() const;
  VarianceSchedule make_training_schedule() const;  // geometric, gamma 1, resolved sigma_min
  TargetModel make_target() const;
  TrainConfig make_train_config() const;
  IntegratorConfig make_integrator() const;
  SweepConfig make_sweep_config() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// FNV-1a over the canonical serialization.
uint64_t config_hash(const ExperimentConfig& cfg);

/// Cross-checks spanning sections (batch <= n, perturbed dims, ...); the
/// individual constructors enforce their own invariants on top.
void validate_config(const ExperimentConfig& cfg);

}  // namespace flowlab
