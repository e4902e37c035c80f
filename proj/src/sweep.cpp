#include "flowlab/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "flowlab/errors.hpp"
#include "flowlab/field.hpp"

namespace flowlab {

namespace {

double quantile_sorted(const VecD& sorted, double p) {
  // Linear interpolation between order statistics.
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * (n - 1);
  const size_t lo = static_cast<size_t>(h);
  const size_t hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

}  // namespace

SweepResult rate_sweep(const TargetModel& target, const SweepConfig& cfg) {
  if (cfg.n_grid.empty()) throw DomainError("rate_sweep: empty n grid");
  if (cfg.n_seeds < 2) throw DomainError("rate_sweep: need at least 2 seeds");
  for (size_t i = 1; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] <= cfg.n_grid[i - 1])
      throw DomainError("rate_sweep: n grid must be strictly increasing");

  const int d = target_dim(target);
  SweepResult out;
  out.ref_slope = reference_rate_slope(d, cfg.alpha, cfg.eta);

  for (size_t gi = 0; gi < cfg.n_grid.size(); ++gi) {
    const int n = cfg.n_grid[gi];
    const double sigma_min = sigma_min_of_n(n, d, cfg.alpha, cfg.eta);
    const VarianceSchedule schedule(ScheduleKind::geometric, sigma_min, 1.0);
    VecD cell_w1;
    for (int si = 0; si < cfg.n_seeds; ++si) {
      const uint64_t cell_seed =
          derive_seed(cfg.seed, "sweep-cell", static_cast<uint64_t>(gi) * 1000 + si);
      SweepRow row;
      row.n = n;
      row.sigma_min = sigma_min;
      row.seed = cell_seed;
      try {
        Rng data_rng(derive_seed(cell_seed, "train-data"));
        Rng push_rng(derive_seed(cell_seed, "push"));
        Rng eval_rng(derive_seed(cell_seed, "eval"));
        Rng proj_rng(derive_seed(cell_seed, "projections"));

        VelocityField field = [&]() -> VelocityField {
          if (cfg.exact_field_control) {
            const auto* mix = std::get_if<GaussianMixture>(&target);
            if (!mix)
              throw CapabilityError("rate_sweep: exact control arm needs a mixture target");
            return make_mixture_field(schedule, *mix);
          }
          const MatD data = target_sample(target, data_rng, n);
          TrainConfig tc = cfg.train;
          tc.n = n;
          tc.sigma_min = sigma_min;
          tc.batch = std::min(tc.batch, n);
          tc.seed = derive_seed(cell_seed, "train");
          TrainResult tr = train_cfm(data, tc, schedule);
          if (tr.diverged) throw std::runtime_error("rate_sweep: training diverged");
          return make_learned_field(tr.net);
        }();

        const MatD pushed = push_samples(field, push_rng, cfg.eval_m, cfg.integrator);
        const MatD held_out = target_sample(target, eval_rng, cfg.eval_m);
        if (d == 1) {
          VecD a(cfg.eval_m), b(cfg.eval_m);
          for (int i = 0; i < cfg.eval_m; ++i) {
            a[i] = pushed(i, 0);
            b[i] = held_out(i, 0);
          }
          row.w1 = w1_1d(a, b);
          row.estimator = "exact1d";
        } else {
          row.w1 = sliced_w1(pushed, held_out, cfg.n_proj, proj_rng);
          row.estimator = "sliced";
        }
        row.ok = true;
        cell_w1.push_back(row.w1);
      } catch (const std::exception&) {
        row.ok = false;
      }
      out.rows.push_back(row);
    }
    SweepSummaryRow s;
    s.n = n;
    s.ref_slope = out.ref_slope;
    s.valid_runs = static_cast<int>(cell_w1.size());
    if (!cell_w1.empty()) {
      std::sort(cell_w1.begin(), cell_w1.end());
      s.median = quantile_sorted(cell_w1, 0.5);
      s.iqr = quantile_sorted(cell_w1, 0.75) - quantile_sorted(cell_w1, 0.25);
    }
    out.summary.push_back(s);
  }

  // Fitted log-log slope of median W1 against n; reference only.
  VecD lx, ly;
  for (const SweepSummaryRow& s : out.summary)
    if (s.valid_runs > 0 && s.median > 0.0) {
      lx.push_back(std::log(static_cast<double>(s.n)));
      ly.push_back(std::log(s.median));
    }
  if (lx.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(lx.size());
    for (size_t i = 0; i < lx.size(); ++i) {
      sx += lx[i];
      sy += ly[i];
      sxx += lx[i] * lx[i];
      sxy += lx[i] * ly[i];
    }
    out.fitted_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    out.fitted_slope_available = true;
  }
  return out;
}

}  // namespace flowlab
