#include "flowlab/cli.hpp"

#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "flowlab/config.hpp"
#include "flowlab/errors.hpp"
#include "flowlab/field.hpp"
#include "flowlab/lipschitz.hpp"
#include "flowlab/sweep.hpp"

namespace flowlab::cli {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Buffers whole files and commits them together, so a failing subcommand
/// leaves no partial outputs behind.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) {
    files_.emplace_back(name, std::move(content));
  }

  void commit() {
    std::filesystem::create_directories(dir_);
    std::vector<std::filesystem::path> written;
    for (const auto& [name, content] : files_) {
      const std::filesystem::path p = dir_ / name;
      std::ofstream f(p, std::ios::binary | std::ios::trunc);
      if (f) f << content;
      if (!f) {
        for (const auto& w : written) std::filesystem::remove(w);
        throw std::runtime_error("cannot write output file: " + p.string());
      }
      written.push_back(p);
    }
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string csv_header(const ExperimentConfig& cfg) {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "# config_hash=%016" PRIx64 " seed=%" PRIu64 "\n",
                config_hash(cfg), cfg.seed);
  return buf;
}

struct ProbeRow {
  double t;
  VecD x;
};

std::vector<ProbeRow> load_probes(const std::string& path, int dim) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open probe file: " + path);
  std::vector<ProbeRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    bool blank = true;
    for (char c : line)
      if (!isspace(static_cast<unsigned char>(c))) blank = false;
    if (blank) continue;
    std::stringstream ss(line);
    ProbeRow row;
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != dim + 1)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected t plus " +
                        std::to_string(dim) + " coordinates");
    row.t = vals[0];
    row.x.assign(vals.begin() + 1, vals.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

int run_schedule_audit(const ExperimentConfig& cfg) {
  const VarianceSchedule schedule = cfg.make_schedule();
  const ScheduleAudit audit = audit_schedule(schedule);
  std::string csv = csv_header(cfg);
  csv += "kind,sigma_min,integral,expected,tstar,monotone\n";
  csv += std::string(VarianceSchedule::kind_name(schedule.kind())) + "," +
         fmt(schedule.sigma_min()) + "," + fmt(audit.integral) + "," + fmt(audit.expected) + "," +
         fmt(audit.tstar) + "," + (audit.monotone ? "1" : "0") + "\n";
  OutputSet out(cfg.out);
  out.add("schedule_audit.csv", csv);
  out.commit();
  return 0;
}

int run_field_probe(const ExperimentConfig& cfg, const std::string& probes_path) {
  const MomentModel model(cfg.make_schedule(), cfg.make_target(), cfg.lipschitz.is_samples,
                          derive_seed(cfg.seed, "field-is"));
  const int d = model.dim();
  const std::vector<ProbeRow> probes = load_probes(probes_path, d);
  std::string csv = csv_header(cfg);
  csv += "t";
  for (int i = 0; i < d; ++i) csv += ",x" + std::to_string(i);
  for (int i = 0; i < d; ++i) csv += ",v" + std::to_string(i);
  csv += ",ess\n";
  for (const ProbeRow& p : probes) {
    const PosteriorMoments m = model.moments(p.t, p.x);
    const VecD v = velocity_from_mean(model.schedule(), p.t, p.x, m.mean);
    csv += fmt(p.t);
    for (double xi : p.x) csv += "," + fmt(xi);
    for (double vi : v) csv += "," + fmt(vi);
    csv += ",";
    csv += m.exact ? "exact" : fmt(m.ess);
    csv += "\n";
  }
  OutputSet out(cfg.out);
  out.add("field_probe.csv", csv);
  out.commit();
  return 0;
}

int run_lipschitz_scan(const ExperimentConfig& cfg) {
  const MomentModel model(cfg.make_schedule(), cfg.make_target(), cfg.lipschitz.is_samples,
                          derive_seed(cfg.seed, "lipschitz-is"));
  const VecD grid = chebyshev_grid(cfg.lipschitz.t_nodes);
  const std::vector<VecD> probes = make_probe_set(model, cfg.lipschitz.probe_grid,
                                                  cfg.lipschitz.probe_samples,
                                                  derive_seed(cfg.seed, "probes"));
  const LipschitzReport rep = lipschitz_scan(model, grid, probes);
  std::string csv = csv_header(cfg);
  csv += "t,B_max,lower,upper\n";
  for (size_t i = 0; i < rep.t_grid.size(); ++i)
    csv += fmt(rep.t_grid[i]) + "," + fmt(rep.b_max[i]) + "," + fmt(rep.lower[i]) + "," +
           fmt(rep.upper[i]) + "\n";
  csv += "# summary {\"integral_lower\": " + fmt(rep.integral_lower) +
         ", \"integral_upper\": " + fmt(rep.integral_upper) +
         ", \"gronwall\": " + fmt(rep.gronwall) + "}\n";
  OutputSet out(cfg.out);
  out.add("lipschitz_scan.csv", csv);
  out.commit();
  return 0;
}

int run_train(const ExperimentConfig& cfg) {
  const TargetModel target = cfg.make_target();
  const VarianceSchedule schedule = cfg.make_training_schedule();
  const TrainConfig tc = cfg.make_train_config();
  Rng data_rng(derive_seed(cfg.seed, "train-data"));
  const MatD data = target_sample(target, data_rng, tc.n);
  const TrainResult res = train_cfm(data, tc, schedule);
  if (res.diverged) {
    std::cerr << "train: loss diverged at step " << res.divergence_step << "; last losses:";
    const size_t from = res.loss_trace.size() > 5 ? res.loss_trace.size() - 5 : 0;
    for (size_t i = from; i < res.loss_trace.size(); ++i) std::cerr << " " << res.loss_trace[i];
    std::cerr << "\n";
    return 1;
  }
  std::string csv = csv_header(cfg);
  csv += "step,loss\n";
  for (size_t i = 0; i < res.loss_trace.size(); ++i)
    csv += std::to_string(i) + "," + fmt(res.loss_trace[i]) + "\n";
  OutputSet out(cfg.out);
  out.add("loss_trace.csv", csv);
  out.add("checkpoint.bin", res.net.serialize());
  out.commit();
  return 0;
}

VelocityField field_for_generation(const ExperimentConfig& cfg, const TargetModel& target,
                                   const std::string& checkpoint) {
  if (!checkpoint.empty()) return make_learned_field(MlpNetwork::load(checkpoint));
  if (const auto* mix = std::get_if<GaussianMixture>(&target))
    return make_mixture_field(cfg.make_schedule(), *mix);
  return make_is_field(cfg.make_schedule(), std::get<PerturbedGaussian>(target),
                       cfg.lipschitz.is_samples, derive_seed(cfg.seed, "field-is"));
}

int run_sample(const ExperimentConfig& cfg, const std::string& checkpoint) {
  const TargetModel target = cfg.make_target();
  const VelocityField field = field_for_generation(cfg, target, checkpoint);
  Rng rng(derive_seed(cfg.seed, "sample"));
  const MatD pts = push_samples(field, rng, cfg.eval.m, cfg.make_integrator());
  std::string csv = csv_header(cfg);
  for (int j = 0; j < pts.cols; ++j) csv += (j ? ",x" : "x") + std::to_string(j);
  csv += "\n";
  for (int i = 0; i < pts.rows; ++i) {
    for (int j = 0; j < pts.cols; ++j) {
      if (j) csv += ",";
      csv += fmt(pts(i, j));
    }
    csv += "\n";
  }
  OutputSet out(cfg.out);
  out.add("samples.csv", csv);
  out.commit();
  return 0;
}

int run_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint) {
  const TargetModel target = cfg.make_target();
  const VelocityField field = field_for_generation(cfg, target, checkpoint);
  Rng push_rng(derive_seed(cfg.seed, "push"));
  Rng eval_rng(derive_seed(cfg.seed, "eval"));
  const int m = cfg.eval.m;
  const MatD generated = push_samples(field, push_rng, m, cfg.make_integrator());
  const MatD held_out = target_sample(target, eval_rng, m);

  std::string estimator = cfg.eval.estimator;
  const int d = generated.cols;
  if (estimator == "auto")
    estimator = d == 1 ? "exact1d" : (m <= cfg.eval.assignment_cap ? "assignment" : "sliced");
  if (estimator == "exact1d" && d != 1)
    throw ConfigError("evaluate: exact1d estimator needs a 1D target");
  const W1Estimator est = estimator == "exact1d"
                              ? W1Estimator::exact_1d
                              : (estimator == "assignment" ? W1Estimator::assignment
                                                           : W1Estimator::sliced);
  const W1Report rep = make_w1_report(generated, held_out, est, cfg.eval.n_proj,
                                      derive_seed(cfg.seed, "projections"),
                                      cfg.eval.assignment_cap);
  std::string csv = csv_header(cfg);
  csv += "estimator,m,n_proj,w1\n";
  csv += estimator + "," + std::to_string(rep.m) + "," + std::to_string(rep.n_proj) + "," +
         fmt(rep.value) + "\n";
  OutputSet out(cfg.out);
  out.add("evaluate.csv", csv);
  out.commit();
  return 0;
}

int run_rate_sweep(const ExperimentConfig& cfg) {
  const TargetModel target = cfg.make_target();
  const SweepResult res = rate_sweep(target, cfg.make_sweep_config());
  std::string runs = csv_header(cfg);
  runs += "n,sigma_min,seed,w1,estimator\n";
  for (const SweepRow& r : res.rows) {
    runs += std::to_string(r.n) + "," + fmt(r.sigma_min) + "," + std::to_string(r.seed) + ",";
    runs += r.ok ? fmt(r.w1) : std::string("missing");
    runs += "," + (r.ok ? r.estimator : std::string("-")) + "\n";
  }
  std::string summary = csv_header(cfg);
  summary += "n,median,iqr,ref_slope\n";
  for (const SweepSummaryRow& s : res.summary)
    summary += std::to_string(s.n) + "," + fmt(s.median) + "," + fmt(s.iqr) + "," +
               fmt(s.ref_slope) + "\n";
  if (res.fitted_slope_available)
    summary += "# fitted_loglog_slope=" + fmt(res.fitted_slope) + "\n";
  OutputSet out(cfg.out);
  out.add("sweep_runs.csv", runs);
  out.add("sweep_summary.csv", summary);
  out.commit();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Gaussian-path flow matching laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed_override = 0;
  bool seed_set = false;
  std::string out_override;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--seed", seed_override, "master seed override")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--out", out_override, "output directory override");
  };

  CLI::App* audit = app.add_subcommand("schedule-audit", "variance schedule identities");
  add_common(audit);

  CLI::App* probe = app.add_subcommand("field-probe", "velocity field at (t,x) probes");
  std::string probes_path;
  add_common(probe);
  probe->add_option("--probes", probes_path, "CSV of t,x... probe rows")->required();

  CLI::App* lip = app.add_subcommand("lipschitz-scan", "B-matrix bounds over the t grid");
  add_common(lip);

  CLI::App* train = app.add_subcommand("train", "conditional flow matching training");
  int train_steps = -1, train_n = -1, train_batch = -1;
  add_common(train);
  train->add_option("--steps", train_steps, "training steps override");
  train->add_option("--n", train_n, "training sample count override");
  train->add_option("--batch", train_batch, "batch size override");

  CLI::App* sample = app.add_subcommand("sample", "push latent draws to t=1");
  int sample_steps = -1, sample_m = -1;
  std::string sample_method, sample_ckpt;
  add_common(sample);
  sample->add_option("--steps", sample_steps, "integrator steps override");
  sample->add_option("--method", sample_method, "integrator method override (rk4|euler)");
  sample->add_option("--m", sample_m, "number of samples override");
  sample->add_option("--checkpoint", sample_ckpt, "trained network checkpoint");

  CLI::App* eval = app.add_subcommand("evaluate", "W1 between generated and target samples");
  std::string eval_ckpt;
  add_common(eval);
  eval->add_option("--checkpoint", eval_ckpt, "trained network checkpoint");

  CLI::App* sweep = app.add_subcommand("rate-sweep", "W1 against n with sigma_min(n)");
  add_common(sweep);

  std::vector<const char*> argv;
  argv.push_back("flowlab");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (seed_set) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.out = out_override;
    if (train_steps > 0) cfg.train.steps = train_steps;
    if (train_n > 0) cfg.train.n = train_n;
    if (train_batch > 0) cfg.train.batch = train_batch;
    if (sample_steps > 0) cfg.integrate.steps = sample_steps;
    if (!sample_method.empty()) {
      if (sample_method != "rk4" && sample_method != "euler")
        throw ConfigError("--method must be rk4|euler");
      cfg.integrate.method = sample_method;
    }
    if (sample_m > 0) cfg.eval.m = sample_m;
    validate_config(cfg);

    if (*audit) return run_schedule_audit(cfg);
    if (*probe) return run_field_probe(cfg, probes_path);
    if (*lip) return run_lipschitz_scan(cfg);
    if (*train) return run_train(cfg);
    if (*sample) return run_sample(cfg, sample_ckpt);
    if (*eval) return run_evaluate(cfg, eval_ckpt);
    if (*sweep) return run_rate_sweep(cfg);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace flowlab::cli
