#include "flowlab/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "flowlab/errors.hpp"
#include "flowlab/wasserstein.hpp"

namespace flowlab {

namespace {

struct Entry {
  int line = 0;
  std::string key;
  std::string value;
  bool used = false;
};

struct Block {
  int line = 0;
  std::string section;
  std::vector<Entry> entries;
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& origin, int line, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) fail(origin, line, "trailing characters in number '" + v + "'");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    fail(origin, line, "expected a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& origin, int line, const std::string& v) {
  try {
    size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) fail(origin, line, "trailing characters in integer '" + v + "'");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    fail(origin, line, "expected an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& origin, int line, const std::string& v) {
  try {
    size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) fail(origin, line, "trailing characters in integer '" + v + "'");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    fail(origin, line, "expected an unsigned integer, got '" + v + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(trim(cur));
  return parts;
}

VecD parse_vector(const std::string& origin, int line, const std::string& v) {
  VecD out;
  for (const std::string& p : split(v, ','))
    out.push_back(parse_double(origin, line, p));
  return out;
}

std::vector<int> parse_int_vector(const std::string& origin, int line, const std::string& v) {
  std::vector<int> out;
  for (const std::string& p : split(v, ','))
    out.push_back(static_cast<int>(parse_int(origin, line, p)));
  return out;
}

MatD parse_matrix(const std::string& origin, int line, const std::string& v) {
  const std::vector<std::string> rows = split(v, ';');
  MatD m;
  for (size_t r = 0; r < rows.size(); ++r) {
    const VecD vals = parse_vector(origin, line, rows[r]);
    if (r == 0) {
      m = MatD(static_cast<int>(rows.size()), static_cast<int>(vals.size()));
    } else if (static_cast<int>(vals.size()) != m.cols) {
      fail(origin, line, "ragged matrix rows");
    }
    for (size_t c = 0; c < vals.size(); ++c) m(static_cast<int>(r), static_cast<int>(c)) = vals[c];
  }
  return m;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_vector(const VecD& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt_double(v[i]);
  }
  return s;
}

std::string fmt_int_vector(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s;
}

std::string fmt_matrix(const MatD& m) {
  std::string s;
  for (int r = 0; r < m.rows; ++r) {
    if (r) s += "; ";
    for (int c = 0; c < m.cols; ++c) {
      if (c) s += ", ";
      s += fmt_double(m(r, c));
    }
  }
  return s;
}

/// Parsed file as ordered blocks; root entries live in the "" section.
std::vector<Block> lex_blocks(const std::string& text, const std::string& origin) {
  std::vector<Block> blocks;
  blocks.push_back(Block{0, "", {}});
  int current = 0;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      const bool repeated = line.size() > 1 && line[1] == '[';
      const std::string closer = repeated ? "]]" : "]";
      if (line.substr(line.size() - closer.size()) != closer)
        fail(origin, line_no, "unterminated section header");
      std::string name = line.substr(repeated ? 2 : 1,
                                     line.size() - 2 * (repeated ? 2 : 1));
      name = trim(name);
      if (name.empty()) fail(origin, line_no, "empty section name");
      if (!repeated) {
        // Singleton sections may be reopened only if absent so far.
        for (const Block& b : blocks)
          if (b.section == name)
            fail(origin, line_no, "duplicate section [" + name + "]");
      }
      blocks.push_back(Block{line_no, name, {}});
      current = static_cast<int>(blocks.size()) - 1;
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value'");
    Entry e;
    e.line = line_no;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    if (e.key.empty()) fail(origin, line_no, "empty key");
    blocks[current].entries.push_back(std::move(e));
  }
  return blocks;
}

class BlockReader {
 public:
  BlockReader(Block& block, std::string origin) : block_(block), origin_(std::move(origin)) {}

  Entry* find(const std::string& key) {
    for (Entry& e : block_.entries)
      if (e.key == key) {
        e.used = true;
        return &e;
      }
    return nullptr;
  }

  bool get(const std::string& key, double& into) {
    if (Entry* e = find(key)) {
      into = parse_double(origin_, e->line, e->value);
      return true;
    }
    return false;
  }
  bool get(const std::string& key, int& into) {
    if (Entry* e = find(key)) {
      into = static_cast<int>(parse_int(origin_, e->line, e->value));
      return true;
    }
    return false;
  }
  bool get(const std::string& key, uint64_t& into) {
    if (Entry* e = find(key)) {
      into = parse_u64(origin_, e->line, e->value);
      return true;
    }
    return false;
  }
  bool get(const std::string& key, std::string& into) {
    if (Entry* e = find(key)) {
      into = e->value;
      return true;
    }
    return false;
  }
  bool get(const std::string& key, VecD& into) {
    if (Entry* e = find(key)) {
      into = parse_vector(origin_, e->line, e->value);
      return true;
    }
    return false;
  }
  bool get(const std::string& key, std::vector<int>& into) {
    if (Entry* e = find(key)) {
      into = parse_int_vector(origin_, e->line, e->value);
      return true;
    }
    return false;
  }
  bool get(const std::string& key, MatD& into) {
    if (Entry* e = find(key)) {
      into = parse_matrix(origin_, e->line, e->value);
      return true;
    }
    return false;
  }

  void reject_unused() const {
    for (const Entry& e : block_.entries)
      if (!e.used)
        fail(origin_, e.line,
             "unknown key '" + e.key + "'" +
                 (block_.section.empty() ? "" : " in section [" + block_.section + "]"));
  }

 private:
  Block& block_;
  std::string origin_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  std::vector<Block> blocks = lex_blocks(text, origin);
  ExperimentConfig cfg;
  static const std::set<std::string> known_sections = {
      "",          "schedule", "target", "target.component", "target.perturbation",
      "train",     "integrate", "eval",  "lipschitz",         "sweep"};
  for (const Block& b : blocks)
    if (!known_sections.count(b.section))
      fail(origin, b.line, "unknown section [" + b.section + "]");

  bool saw_component = false;
  cfg.target.components.clear();
  for (Block& b : blocks) {
    BlockReader r(b, origin);
    if (b.section.empty()) {
      r.get("seed", cfg.seed);
      r.get("out", cfg.out);
    } else if (b.section == "schedule") {
      std::string kind = "geometric";
      r.get("kind", kind);
      if (kind == "geometric") {
        cfg.schedule.kind = ScheduleKind::geometric;
      } else if (kind == "linear") {
        cfg.schedule.kind = ScheduleKind::linear;
      } else if (kind == "poly") {
        cfg.schedule.kind = ScheduleKind::poly;
      } else {
        fail(origin, b.line, "schedule kind must be geometric|linear|poly");
      }
      r.get("sigma_min", cfg.schedule.sigma_min);
      r.get("gamma", cfg.schedule.gamma);
      r.get("coeffs", cfg.schedule.coeffs);
    } else if (b.section == "target") {
      r.get("type", cfg.target.type);
      r.get("dim", cfg.target.dim);
      if (cfg.target.type != "mixture" && cfg.target.type != "perturbed")
        fail(origin, b.line, "target type must be mixture|perturbed");
    } else if (b.section == "target.component") {
      saw_component = true;
      MixtureComponentSpec comp;
      if (!r.get("weight", comp.weight))
        fail(origin, b.line, "mixture component needs a weight");
      if (!r.get("mean", comp.mean))
        fail(origin, b.line, "mixture component needs a mean");
      if (!r.get("cov", comp.cov))
        fail(origin, b.line, "mixture component needs a covariance");
      cfg.target.components.push_back(std::move(comp));
    } else if (b.section == "target.perturbation") {
      r.get("name", cfg.target.perturbation);
      r.get("amplitude", cfg.target.amplitude);
    } else if (b.section == "train") {
      r.get("n", cfg.train.n);
      std::string sm;
      if (r.get("sigma_min", sm)) {
        if (sm == "auto") {
          cfg.train.sigma_min_auto = true;
        } else {
          cfg.train.sigma_min_auto = false;
          cfg.train.sigma_min = parse_double(origin, b.line, sm);
        }
      }
      r.get("batch", cfg.train.batch);
      r.get("steps", cfg.train.steps);
      r.get("lr", cfg.train.lr);
      r.get("lr_final", cfg.train.lr_final);
      r.get("hidden", cfg.train.hidden);
    } else if (b.section == "integrate") {
      r.get("steps", cfg.integrate.steps);
      r.get("method", cfg.integrate.method);
      if (cfg.integrate.method != "rk4" && cfg.integrate.method != "euler")
        fail(origin, b.line, "integrate method must be rk4|euler");
    } else if (b.section == "eval") {
      r.get("m", cfg.eval.m);
      r.get("n_proj", cfg.eval.n_proj);
      r.get("estimator", cfg.eval.estimator);
      r.get("assignment_cap", cfg.eval.assignment_cap);
      if (cfg.eval.estimator != "auto" && cfg.eval.estimator != "exact1d" &&
          cfg.eval.estimator != "assignment" && cfg.eval.estimator != "sliced")
        fail(origin, b.line, "eval estimator must be auto|exact1d|assignment|sliced");
    } else if (b.section == "lipschitz") {
      r.get("t_nodes", cfg.lipschitz.t_nodes);
      r.get("is_samples", cfg.lipschitz.is_samples);
      r.get("probe_grid", cfg.lipschitz.probe_grid);
      r.get("probe_samples", cfg.lipschitz.probe_samples);
      std::string ts;
      if (r.get("tstar", ts)) {
        if (ts == "auto") {
          cfg.lipschitz.tstar_auto = true;
        } else {
          cfg.lipschitz.tstar_auto = false;
          cfg.lipschitz.tstar = parse_double(origin, b.line, ts);
        }
      }
      r.get("pairs", cfg.lipschitz.pairs);
    } else if (b.section == "sweep") {
      r.get("n_grid", cfg.sweep.n_grid);
      r.get("seeds", cfg.sweep.seeds);
      r.get("alpha", cfg.sweep.alpha);
      r.get("eta", cfg.sweep.eta);
      r.get("mode", cfg.sweep.mode);
      if (cfg.sweep.mode != "trained" && cfg.sweep.mode != "exact")
        fail(origin, b.line, "sweep mode must be trained|exact");
    }
    r.reject_unused();
  }
  if (cfg.target.type == "mixture" && !saw_component)
    throw ConfigError(origin + ": mixture target needs at least one [[target.component]]");
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string s;
  s += "seed = " + std::to_string(cfg.seed) + "\n";
  s += "out = " + cfg.out + "\n\n";

  s += "[schedule]\n";
  s += std::string("kind = ") + VarianceSchedule::kind_name(cfg.schedule.kind) + "\n";
  s += "sigma_min = " + fmt_double(cfg.schedule.sigma_min) + "\n";
  s += "gamma = " + fmt_double(cfg.schedule.gamma) + "\n";
  if (!cfg.schedule.coeffs.empty()) s += "coeffs = " + fmt_vector(cfg.schedule.coeffs) + "\n";
  s += "\n[target]\n";
  s += "type = " + cfg.target.type + "\n";
  s += "dim = " + std::to_string(cfg.target.dim) + "\n";
  for (const MixtureComponentSpec& c : cfg.target.components) {
    s += "\n[[target.component]]\n";
    s += "weight = " + fmt_double(c.weight) + "\n";
    s += "mean = " + fmt_vector(c.mean) + "\n";
    s += "cov = " + fmt_matrix(c.cov) + "\n";
  }
  if (cfg.target.type == "perturbed") {
    s += "\n[target.perturbation]\n";
    s += "name = " + cfg.target.perturbation + "\n";
    s += "amplitude = " + fmt_double(cfg.target.amplitude) + "\n";
  }
  s += "\n[train]\n";
  s += "n = " + std::to_string(cfg.train.n) + "\n";
  s += "sigma_min = " +
       (cfg.train.sigma_min_auto ? std::string("auto") : fmt_double(cfg.train.sigma_min)) + "\n";
  s += "batch = " + std::to_string(cfg.train.batch) + "\n";
  s += "steps = " + std::to_string(cfg.train.steps) + "\n";
  s += "lr = " + fmt_double(cfg.train.lr) + "\n";
  s += "lr_final = " + fmt_double(cfg.train.lr_final) + "\n";
  s += "hidden = " + fmt_int_vector(cfg.train.hidden) + "\n";
  s += "\n[integrate]\n";
  s += "steps = " + std::to_string(cfg.integrate.steps) + "\n";
  s += "method = " + cfg.integrate.method + "\n";
  s += "\n[eval]\n";
  s += "m = " + std::to_string(cfg.eval.m) + "\n";
  s += "n_proj = " + std::to_string(cfg.eval.n_proj) + "\n";
  s += "estimator = " + cfg.eval.estimator + "\n";
  s += "assignment_cap = " + std::to_string(cfg.eval.assignment_cap) + "\n";
  s += "\n[lipschitz]\n";
  s += "t_nodes = " + std::to_string(cfg.lipschitz.t_nodes) + "\n";
  s += "is_samples = " + std::to_string(cfg.lipschitz.is_samples) + "\n";
  s += "probe_grid = " + std::to_string(cfg.lipschitz.probe_grid) + "\n";
  s += "probe_samples = " + std::to_string(cfg.lipschitz.probe_samples) + "\n";
  s += "tstar = " +
       (cfg.lipschitz.tstar_auto ? std::string("auto") : fmt_double(cfg.lipschitz.tstar)) + "\n";
  s += "pairs = " + std::to_string(cfg.lipschitz.pairs) + "\n";
  s += "\n[sweep]\n";
  s += "n_grid = " + fmt_int_vector(cfg.sweep.n_grid) + "\n";
  s += "seeds = " + std::to_string(cfg.sweep.seeds) + "\n";
  s += "alpha = " + fmt_double(cfg.sweep.alpha) + "\n";
  s += "eta = " + fmt_double(cfg.sweep.eta) + "\n";
  s += "mode = " + cfg.sweep.mode + "\n";
  return s;
}

uint64_t config_hash(const ExperimentConfig& cfg) {
  // The output directory is bookkeeping, not experiment identity: the same
  // experiment written elsewhere must produce byte-identical files.
  ExperimentConfig canon = cfg;
  canon.out = "";
  const std::string s = serialize_config(canon);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void validate_config(const ExperimentConfig& cfg) {
  if (!(cfg.schedule.sigma_min > 0.0 && cfg.schedule.sigma_min < 1.0))
    throw ConfigError("config: schedule.sigma_min must lie in (0,1)");
  if (!(cfg.schedule.gamma >= 1.0)) throw ConfigError("config: schedule.gamma must be >= 1");
  if (cfg.target.dim < 1) throw ConfigError("config: target.dim must be >= 1");
  if (cfg.train.batch > cfg.train.n)
    throw ConfigError("config: train.batch must not exceed train.n");
  if (cfg.train.batch < 1 || cfg.train.steps < 0 || cfg.train.n < 1)
    throw ConfigError("config: train sizes must be positive");
  if (!cfg.train.sigma_min_auto && !(cfg.train.sigma_min > 0.0 && cfg.train.sigma_min < 1.0))
    throw ConfigError("config: train.sigma_min must lie in (0,1)");
  if (cfg.integrate.steps < 1) throw ConfigError("config: integrate.steps must be >= 1");
  if (cfg.eval.m < 1 || cfg.eval.n_proj < 1)
    throw ConfigError("config: eval sizes must be positive");
  if (cfg.lipschitz.t_nodes < 2 || cfg.lipschitz.is_samples < 100 || cfg.lipschitz.pairs < 10)
    throw ConfigError("config: lipschitz sizes too small");
  if (cfg.sweep.seeds < 2) throw ConfigError("config: sweep.seeds must be >= 2");
  if (!(cfg.sweep.alpha > 0.0 && cfg.sweep.alpha <= 1.0))
    throw ConfigError("config: sweep.alpha must lie in (0,1]");
  if (!(cfg.sweep.eta >= 0.0)) throw ConfigError("config: sweep.eta must be >= 0");
  // Target/schedule constructors run their own checks (SPD, weights, bounds).
  cfg.make_schedule();
  cfg.make_target();
}

VarianceSchedule ExperimentConfig::make_schedule() const {
  return VarianceSchedule(schedule.kind, schedule.sigma_min, schedule.gamma, schedule.coeffs);
}

VarianceSchedule ExperimentConfig::make_training_schedule() const {
  double sm = train.sigma_min_auto
                  ? sigma_min_of_n(static_cast<double>(train.n), target.dim, sweep.alpha, sweep.eta)
                  : train.sigma_min;
  return VarianceSchedule(ScheduleKind::geometric, sm, 1.0);
}

TargetModel ExperimentConfig::make_target() const {
  if (target.type == "mixture") {
    if (target.components.empty())
      throw ConfigError("config: mixture target needs at least one component");
    VecD weights;
    std::vector<VecD> means;
    std::vector<MatD> covs;
    for (const MixtureComponentSpec& c : target.components) {
      if (static_cast<int>(c.mean.size()) != target.dim)
        throw ConfigError("config: mixture component mean has wrong dimension");
      if (c.cov.rows != target.dim || c.cov.cols != target.dim)
        throw ConfigError("config: mixture component covariance has wrong shape");
      weights.push_back(c.weight);
      means.push_back(c.mean);
      covs.push_back(c.cov);
    }
    try {
      return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
    } catch (const ConstructionError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  try {
    return PerturbedGaussian(target.dim,
                             make_perturbation(target.perturbation, target.amplitude, target.dim));
  } catch (const ConstructionError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

TrainConfig ExperimentConfig::make_train_config() const {
  TrainConfig tc;
  tc.n = train.n;
  tc.sigma_min = train.sigma_min_auto
                     ? sigma_min_of_n(static_cast<double>(train.n), target.dim, sweep.alpha,
                                      sweep.eta)
                     : train.sigma_min;
  tc.batch = train.batch;
  tc.steps = train.steps;
  tc.lr = train.lr;
  tc.lr_final = train.lr_final;
  tc.hidden = train.hidden;
  tc.perturbation_bound =
      target.type == "perturbed" ? make_perturbation(target.perturbation, target.amplitude,
                                                     target.dim)
                                       .bound
                                 : 0.0;
  tc.seed = derive_seed(seed, "train");
  return tc;
}

IntegratorConfig ExperimentConfig::make_integrator() const {
  IntegratorConfig ic;
  ic.steps = integrate.steps;
  ic.method = integrate.method == "euler" ? OdeMethod::euler : OdeMethod::rk4;
  return ic;
}

SweepConfig ExperimentConfig::make_sweep_config() const {
  SweepConfig sc;
  sc.n_grid = sweep.n_grid;
  sc.n_seeds = sweep.seeds;
  sc.alpha = sweep.alpha;
  sc.eta = sweep.eta;
  sc.exact_field_control = sweep.mode == "exact";
  sc.train = make_train_config();
  sc.integrator = make_integrator();
  sc.eval_m = eval.m;
  sc.n_proj = eval.n_proj;
  sc.seed = derive_seed(seed, "sweep");
  return sc;
}

}  // namespace flowlab
