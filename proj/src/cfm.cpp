#include "flowlab/cfm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "flowlab/errors.hpp"
#include "flowlab/quadrature.hpp"

namespace flowlab {

CfmBatch draw_cfm_batch(const MatD& data, std::span<const int> rows,
                        const VarianceSchedule& schedule, Rng& rng) {
  const int d = data.cols;
  const int m = static_cast<int>(rows.size());
  if (m == 0) throw DomainError("cfm batch: batch must be non-empty");
  CfmBatch b;
  b.t.resize(m);
  b.x = MatD(m, d);
  b.target = MatD(m, d);
  VecD y(d), x(d);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < d; ++j) y[j] = data(rows[i], j);
    const double t = rng.uniform01();
    b.t[i] = t;
    const double s = schedule.sigma(t);
    const auto [mu, dmu] = schedule.mu_coeffs(t);
    const double q = schedule.log_quotient(t);
    for (int j = 0; j < d; ++j) {
      x[j] = mu * y[j] + s * rng.normal();
      b.x(i, j) = x[j];
      b.target(i, j) = q * (x[j] - mu * y[j]) + dmu * y[j];
    }
  }
  return b;
}

double cfm_loss(const MlpNetwork& net, const CfmBatch& batch) {
  const int m = static_cast<int>(batch.t.size());
  const int d = batch.x.cols;
  double loss = 0.0;
  VecD x(d);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < d; ++j) x[j] = batch.x(i, j);
    const VecD out = net.forward(batch.t[i], x);
    for (int j = 0; j < d; ++j) {
      const double r = out[j] - batch.target(i, j);
      loss += r * r;
    }
  }
  return loss / m;
}

double cfm_loss_grad(const MlpNetwork& net, const CfmBatch& batch,
                     MlpNetwork::Gradients& grads) {
  const int m = static_cast<int>(batch.t.size());
  const int d = batch.x.cols;
  double loss = 0.0;
  VecD x(d), dout(d);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < d; ++j) x[j] = batch.x(i, j);
    const MlpNetwork::Trace tr = net.forward_trace(batch.t[i], x);
    for (int j = 0; j < d; ++j) {
      const double r = tr.output[j] - batch.target(i, j);
      loss += r * r;
      dout[j] = 2.0 * r / m;
    }
    net.backward(tr, dout, grads);
  }
  return loss / m;
}

double cfm_step_loss(const MlpNetwork& net, const MatD& data_batch,
                     const VarianceSchedule& schedule, Rng& rng,
                     MlpNetwork::Gradients& grads) {
  std::vector<int> rows(data_batch.rows);
  for (int i = 0; i < data_batch.rows; ++i) rows[i] = i;
  const CfmBatch b = draw_cfm_batch(data_batch, rows, schedule, rng);
  return cfm_loss_grad(net, b, grads);
}

namespace {

void require_training_schedule(const VarianceSchedule& schedule) {
  if (schedule.kind() != ScheduleKind::geometric || schedule.gamma() != 1.0)
    throw ConstructionError("train: requires the geometric schedule with gamma = 1");
}

}  // namespace

TrainResult train_cfm(const MatD& data, const TrainConfig& config,
                      const VarianceSchedule& schedule) {
  require_training_schedule(schedule);
  const int n = data.rows;
  const int d = data.cols;
  if (n < 1) throw DomainError("train: empty data");
  if (config.batch < 1 || config.batch > n)
    throw ConstructionError("train: batch must lie in [1, n]");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      if (!std::isfinite(data(i, j))) throw DomainError("train: non-finite training data");

  std::vector<int> arch;
  arch.push_back(d + 1);
  for (int h : config.hidden) arch.push_back(h);
  arch.push_back(d);
  const double box = std::max(1.0, std::log(static_cast<double>(n)));
  const double bound = output_bound_value(config.perturbation_bound, static_cast<double>(n));
  TrainResult res{MlpNetwork(arch, box, bound), {}, false, -1};

  Rng rng(config.seed);
  res.net.init_random(rng);

  MlpNetwork::Gradients grads = res.net.zero_gradients();
  MlpNetwork::Gradients m1 = res.net.zero_gradients();
  MlpNetwork::Gradients m2 = res.net.zero_gradients();
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double lr_final = config.lr_final < 0.0 ? config.lr : config.lr_final;

  res.loss_trace.reserve(config.steps);
  std::vector<int> rows(config.batch);
  for (int step = 0; step < config.steps; ++step) {
    for (int i = 0; i < config.batch; ++i) rows[i] = static_cast<int>(rng.below(n));
    const CfmBatch batch = draw_cfm_batch(data, rows, schedule, rng);

    for (MatD& g : grads.weights) std::fill(g.a.begin(), g.a.end(), 0.0);
    for (VecD& g : grads.shifts) std::fill(g.begin(), g.end(), 0.0);
    const double loss = cfm_loss_grad(res.net, batch, grads);
    res.loss_trace.push_back(loss);
    if (!std::isfinite(loss)) {
      res.diverged = true;
      res.divergence_step = step;
      return res;
    }

    const double frac = config.steps > 1 ? static_cast<double>(step) / (config.steps - 1) : 0.0;
    const double lr = config.lr + frac * (lr_final - config.lr);
    const double c1 = 1.0 - std::pow(beta1, step + 1);
    const double c2 = 1.0 - std::pow(beta2, step + 1);
    auto adam_update = [&](double g, double& m, double& v, double& p) {
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
      p -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
    };
    for (size_t li = 0; li < grads.weights.size(); ++li)
      for (size_t k = 0; k < grads.weights[li].a.size(); ++k)
        adam_update(grads.weights[li].a[k], m1.weights[li].a[k], m2.weights[li].a[k],
                    res.net.weights()[li].a[k]);
    for (size_t li = 0; li < grads.shifts.size(); ++li)
      for (size_t k = 0; k < grads.shifts[li].size(); ++k)
        adam_update(grads.shifts[li][k], m1.shifts[li][k], m2.shifts[li][k],
                    res.net.shifts()[li][k]);
  }
  return res;
}

VelocityField make_learned_field(const MlpNetwork& net) {
  return VelocityField(FieldTag::learned, net.dim(),
                       [net](double t, std::span<const double> x) { return net.forward(t, x); });
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double gauss1d_logpdf(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + z * z / var);
}

}  // namespace

ObjectiveGap objective_gap_check(const VelocityField& net_field, const GaussianMixture& mixture,
                                 const VarianceSchedule& schedule, double quad_tol,
                                 int hermite_nodes) {
  if (mixture.dim() != 1)
    throw DomainError("objective_gap_check: quadrature check is defined for 1D mixtures");
  const int kc = mixture.components();
  const QuadRule& gh = gauss_hermite(hermite_nodes);
  const QuadRule tq = composite_legendre(0.0, 1.0, 16, 8);
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);

  // All three objectives are integrated on the same grid: t-nodes shared,
  // x-nodes from the marginal mixture decomposition, and the inner
  // y-expectation by self-normalized importance quadrature whose proposal is
  // the conjugate posterior but whose weights use the raw density
  // p_t(x|y) p*(y). A wrong posterior formula would therefore surface as a
  // broken identity instead of cancelling out.
  double fm = 0.0, cfm = 0.0, cvar = 0.0;
  VecD xv(1), yv(1);
  for (size_t ti = 0; ti < tq.nodes.size(); ++ti) {
    const double t = tq.nodes[ti];
    const double tw = tq.weights[ti];
    const double s = schedule.sigma(t);
    const double s2 = s * s;
    const double q = schedule.log_quotient(t);
    const auto [mu, dmu] = schedule.mu_coeffs(t);
    const double bcoef = dmu - q * mu;  // v_t(x|y) = q x + bcoef y

    // Posterior components shared by every x at this t.
    VecD post_var(kc), marg_var(kc);
    for (int k = 0; k < kc; ++k) {
      const double sk = mixture.covariances()[k](0, 0);
      post_var[k] = 1.0 / (1.0 / sk + mu * mu / s2);
      marg_var[k] = s2 + mu * mu * sk;
    }

    double fm_t = 0.0, cfm_t = 0.0, cvar_t = 0.0;
    for (int kx = 0; kx < kc; ++kx) {
      const double xw_base = mixture.weights()[kx] * inv_sqrt_pi;
      const double xm = mu * mixture.means()[kx][0];
      const double xsd = std::sqrt(marg_var[kx]);
      for (size_t ix = 0; ix < gh.nodes.size(); ++ix) {
        const double x = xm + std::numbers::sqrt2 * xsd * gh.nodes[ix];
        const double xw = xw_base * gh.weights[ix];
        xv[0] = x;
        const double vx = mixture_velocity(schedule, t, xv, mixture)[0];
        const double nx = net_field(t, xv)[0];
        fm_t += xw * (nx - vx) * (nx - vx);

        // Posterior responsibilities at x.
        VecD logr(kc);
        double best = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < kc; ++k) {
          logr[k] = std::log(mixture.weights()[k]) +
                    gauss1d_logpdf(x, mu * mixture.means()[k][0], marg_var[k]);
          best = std::max(best, logr[k]);
        }
        double rnorm = 0.0;
        for (int k = 0; k < kc; ++k) rnorm += std::exp(logr[k] - best);

        // Importance quadrature over the posterior proposal.
        double wsum = 0.0, acc_cfm = 0.0, acc_cvar = 0.0;
        double lbest = -std::numeric_limits<double>::infinity();
        std::vector<double> lw(kc * gh.nodes.size());
        std::vector<double> ys(kc * gh.nodes.size());
        size_t idx = 0;
        for (int k = 0; k < kc; ++k) {
          const double r_k = std::exp(logr[k] - best) / rnorm;
          const double pm = post_var[k] * (mixture.means()[k][0] / mixture.covariances()[k](0, 0) +
                                           mu * x / s2);
          const double psd = std::sqrt(post_var[k]);
          for (size_t iy = 0; iy < gh.nodes.size(); ++iy, ++idx) {
            const double y = pm + std::numbers::sqrt2 * psd * gh.nodes[iy];
            ys[idx] = y;
            yv[0] = y;
            // log of GH node mass times raw density over proposal pdf
            double lprop = -std::numeric_limits<double>::infinity();
            for (int k2 = 0; k2 < kc; ++k2) {
              const double r2 = std::exp(logr[k2] - best) / rnorm;
              const double pm2 =
                  post_var[k2] * (mixture.means()[k2][0] / mixture.covariances()[k2](0, 0) +
                                  mu * x / s2);
              const double lg = std::log(r2) + gauss1d_logpdf(y, pm2, post_var[k2]);
              lprop = lprop > lg ? lprop + std::log1p(std::exp(lg - lprop))
                                 : lg + std::log1p(std::exp(lprop - lg));
            }
            const double lraw = gauss1d_logpdf(x, mu * y, s2) + mixture.log_density(yv);
            lw[idx] = std::log(r_k * gh.weights[iy] * inv_sqrt_pi) + lraw - lprop;
            lbest = std::max(lbest, lw[idx]);
          }
        }
        idx = 0;
        for (int k = 0; k < kc; ++k) {
          for (size_t iy = 0; iy < gh.nodes.size(); ++iy, ++idx) {
            const double w = std::exp(lw[idx] - lbest);
            const double vc = q * x + bcoef * ys[idx];
            wsum += w;
            acc_cfm += w * (nx - vc) * (nx - vc);
            acc_cvar += w * (vx - vc) * (vx - vc);
          }
        }
        cfm_t += xw * acc_cfm / wsum;
        cvar_t += xw * acc_cvar / wsum;
      }
    }
    fm += tw * fm_t;
    cfm += tw * cfm_t;
    cvar += tw * cvar_t;
  }

  ObjectiveGap out;
  out.fm = fm;
  out.cfm = cfm;
  out.cvar = cvar;
  out.gap = std::fabs(fm - (cfm - cvar));
  out.converged = out.gap < quad_tol;
  return out;
}

}  // namespace flowlab
