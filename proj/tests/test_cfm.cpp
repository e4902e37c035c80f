#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "flowlab/cfm.hpp"
#include "flowlab/errors.hpp"
#include "oracles.hpp"

using namespace flowlab;

namespace {

GaussianMixture std_normal_1d() {
  MatD eye(1, 1);
  eye(0, 0) = 1.0;
  return GaussianMixture({1.0}, {{0.0}}, {eye});
}

GaussianMixture two_comp_1d() {
  MatD c1(1, 1), c2(1, 1);
  c1(0, 0) = 0.5;
  c2(0, 0) = 1.2;
  return GaussianMixture({0.35, 0.65}, {{-1.2}, {1.8}}, {c1, c2});
}

double median_of(VecD v, size_t from, size_t to) {
  VecD slice(v.begin() + from, v.begin() + to);
  std::sort(slice.begin(), slice.end());
  return slice[slice.size() / 2];
}

}  // namespace

TEST_CASE("loss is zero and gradients vanish at a perfect fit") {
  Rng rng(3);
  MlpNetwork net({2, 6, 1}, 3.0, 20.0);
  net.init_random(rng);
  CfmBatch batch;
  const int m = 7;
  batch.t.resize(m);
  batch.x = MatD(m, 1);
  batch.target = MatD(m, 1);
  for (int i = 0; i < m; ++i) {
    batch.t[i] = rng.uniform01();
    batch.x(i, 0) = rng.normal();
    batch.target(i, 0) = net.forward(batch.t[i], VecD{batch.x(i, 0)})[0];
  }
  MlpNetwork::Gradients grads = net.zero_gradients();
  const double loss = cfm_loss_grad(net, batch, grads);
  CHECK(loss == 0.0);
  for (const MatD& g : grads.weights)
    for (double v : g.a) REQUIRE(v == 0.0);
  for (const VecD& g : grads.shifts)
    for (double v : g) REQUIRE(v == 0.0);
}

TEST_CASE("zero net loss equals the mean squared conditional target") {
  const VarianceSchedule s(ScheduleKind::geometric, 0.1, 1.0);
  // y = 0 data: target reduces to (sigma'/sigma) X_t
  MatD data(32, 1);
  std::vector<int> rows(32);
  for (int i = 0; i < 32; ++i) rows[i] = i;
  Rng rng(9);
  const CfmBatch batch = draw_cfm_batch(data, rows, s, rng);
  double want = 0.0;
  for (int i = 0; i < 32; ++i) {
    const double q = s.log_quotient(batch.t[i]);
    const double v = q * batch.x(i, 0);
    CHECK(batch.target(i, 0) == doctest::Approx(v).epsilon(1e-12));
    want += v * v;
  }
  want /= 32;
  MlpNetwork zero({2, 4, 1}, 3.0, 20.0);
  zero.set_zero();
  CHECK(cfm_loss(zero, batch) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("cfm gradients match finite differences") {
  const VarianceSchedule s(ScheduleKind::geometric, 0.2, 1.0);
  Rng rng(14);
  MatD data(16, 2);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 2; ++j) data(i, j) = rng.normal();
  std::vector<int> rows(16);
  for (int i = 0; i < 16; ++i) rows[i] = i;
  Rng draw_rng(15);
  const CfmBatch batch = draw_cfm_batch(data, rows, s, draw_rng);

  MlpNetwork net({3, 8, 2}, 3.0, 30.0);
  net.init_random(rng);
  MlpNetwork::Gradients grads = net.zero_gradients();
  cfm_loss_grad(net, batch, grads);

  const double h = 1e-5;
  size_t flat = 0;
  for (size_t li = 0; li < grads.weights.size(); ++li) {
    for (size_t k = 0; k < grads.weights[li].a.size(); ++k, ++flat) {
      const double keep = net.get_parameter(flat);
      net.set_parameter(flat, keep + h);
      const double up = cfm_loss(net, batch);
      net.set_parameter(flat, keep - h);
      const double dn = cfm_loss(net, batch);
      net.set_parameter(flat, keep);
      const double fd = (up - dn) / (2 * h);
      const double an = grads.weights[li].a[k];
      REQUIRE(std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-4}) < 1e-4);
    }
    if (li < grads.shifts.size()) flat += grads.shifts[li].size();
  }
}

TEST_CASE("training approaches the exact field on a standard Gaussian") {
  const GaussianMixture target = std_normal_1d();
  const VarianceSchedule s(ScheduleKind::geometric, 0.1, 1.0);
  Rng data_rng(100);
  const MatD data = target.sample(data_rng, 2000);

  TrainConfig cfg;
  cfg.n = 2000;
  cfg.batch = 64;
  cfg.steps = 1500;
  cfg.lr = 2e-3;
  cfg.hidden = {32, 32};
  cfg.seed = 7;

  // probe gap against the exact field before/after training
  auto field_gap = [&](const MlpNetwork& net) {
    Rng probe(55);
    double acc = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double t = probe.uniform01();
      const double st = s.sigma(t);
      const double x = probe.normal() * std::sqrt(t * t + st * st);
      const double want = mixture_velocity(s, t, VecD{x}, target)[0];
      const double got = net.forward(t, VecD{x})[0];
      acc += (want - got) * (want - got);
    }
    return acc / 100;
  };

  MlpNetwork init_net({2, 32, 32, 1}, std::log(2000.0), output_bound_value(0.0, 2000.0));
  {
    Rng init_rng(cfg.seed);
    init_net.init_random(init_rng);
  }
  const double gap_before = field_gap(init_net);

  const TrainResult res = train_cfm(data, cfg, s);
  REQUIRE_FALSE(res.diverged);
  const double gap_after = field_gap(res.net);
  CHECK(gap_after < 0.2 * gap_before);

  // loss decreases in the median sense
  const size_t n = res.loss_trace.size();
  const double early = median_of(res.loss_trace, 0, n / 10);
  const double late = median_of(res.loss_trace, n - n / 10, n);
  CHECK(late < early);
}

TEST_CASE("zero learning rate leaves the network at its initialization") {
  const VarianceSchedule s(ScheduleKind::geometric, 0.2, 1.0);
  Rng data_rng(1);
  const MatD data = std_normal_1d().sample(data_rng, 128);
  TrainConfig cfg;
  cfg.n = 128;
  cfg.batch = 16;
  cfg.steps = 50;
  cfg.lr = 0.0;
  cfg.hidden = {8};
  cfg.seed = 77;
  const TrainResult res = train_cfm(data, cfg, s);
  MlpNetwork want({2, 8, 1}, std::log(128.0), output_bound_value(0.0, 128.0));
  Rng init_rng(cfg.seed);
  want.init_random(init_rng);
  for (size_t p = 0; p < want.parameter_count(); ++p)
    REQUIRE(res.net.get_parameter(p) == want.get_parameter(p));
}

TEST_CASE("same seed gives identical loss traces") {
  const VarianceSchedule s(ScheduleKind::geometric, 0.2, 1.0);
  Rng data_rng(2);
  const MatD data = std_normal_1d().sample(data_rng, 256);
  TrainConfig cfg;
  cfg.n = 256;
  cfg.batch = 32;
  cfg.steps = 120;
  cfg.hidden = {16};
  cfg.seed = 31;
  const TrainResult a = train_cfm(data, cfg, s);
  const TrainResult b = train_cfm(data, cfg, s);
  REQUIRE(a.loss_trace.size() == b.loss_trace.size());
  for (size_t i = 0; i < a.loss_trace.size(); ++i) REQUIRE(a.loss_trace[i] == b.loss_trace[i]);
}

TEST_CASE("divergent training aborts with the trace") {
  const VarianceSchedule s(ScheduleKind::geometric, 0.2, 1.0);
  Rng data_rng(3);
  MatD data = std_normal_1d().sample(data_rng, 64);
  for (double& v : data.a) v *= 1e160;  // squared residuals overflow to inf
  TrainConfig cfg;
  cfg.n = 64;
  cfg.batch = 16;
  cfg.steps = 200;
  cfg.lr = 1e3;
  cfg.hidden = {8};
  cfg.seed = 5;
  const TrainResult res = train_cfm(data, cfg, s);
  CHECK(res.diverged);
  CHECK(res.divergence_step >= 0);
  CHECK(res.loss_trace.size() == static_cast<size_t>(res.divergence_step) + 1);
}

TEST_CASE("cfm_step_loss wraps batch drawing and gradient accumulation") {
  const VarianceSchedule s(ScheduleKind::geometric, 0.2, 1.0);
  Rng data_rng(41);
  const MatD data = std_normal_1d().sample(data_rng, 12);
  MlpNetwork net({2, 6, 1}, 3.0, 20.0);
  Rng init(42);
  net.init_random(init);

  Rng rng_a(99), rng_b(99);
  MlpNetwork::Gradients ga = net.zero_gradients();
  const double la = cfm_step_loss(net, data, s, rng_a, ga);

  std::vector<int> rows(12);
  for (int i = 0; i < 12; ++i) rows[i] = i;
  const CfmBatch batch = draw_cfm_batch(data, rows, s, rng_b);
  MlpNetwork::Gradients gb = net.zero_gradients();
  const double lb = cfm_loss_grad(net, batch, gb);

  CHECK(la == lb);
  for (size_t i = 0; i < ga.weights.size(); ++i)
    for (size_t k = 0; k < ga.weights[i].a.size(); ++k)
      REQUIRE(ga.weights[i].a[k] == gb.weights[i].a[k]);
}

TEST_CASE("training requires the geometric gamma-1 schedule") {
  MatD data(8, 1);
  TrainConfig cfg;
  cfg.n = 8;
  cfg.batch = 4;
  cfg.steps = 1;
  CHECK_THROWS_AS(train_cfm(data, cfg, VarianceSchedule(ScheduleKind::linear, 0.2, 1.0)),
                  ConstructionError);
  CHECK_THROWS_AS(train_cfm(data, cfg, VarianceSchedule(ScheduleKind::geometric, 0.2, 2.0)),
                  ConstructionError);
}

TEST_CASE("objective identity: fm = cfm - cvar by quadrature") {
  const GaussianMixture mix = two_comp_1d();
  const VarianceSchedule s(ScheduleKind::geometric, std::exp(-2.0), 1.0);

  SUBCASE("exact field: fm vanishes and cfm equals cvar") {
    const VelocityField exact = make_mixture_field(s, mix);
    const ObjectiveGap g = objective_gap_check(exact, mix, s, 1e-6, 120);
    CHECK(g.fm <= 1e-12);
    CHECK(g.cfm == doctest::Approx(g.cvar).epsilon(1e-9));
    CHECK(g.converged);
  }

  SUBCASE("zero net") {
    MlpNetwork zero({2, 4, 1}, 3.0, 50.0);
    zero.set_zero();
    const ObjectiveGap g = objective_gap_check(make_learned_field(zero), mix, s, 1e-6, 120);
    CHECK(g.gap < 1e-6);
    CHECK(g.fm > 0.1);  // zero net is far from the field
  }

  SUBCASE("random nets") {
    Rng rng(8);
    for (int trial = 0; trial < 2; ++trial) {
      MlpNetwork net({2, 10, 1}, 4.0, 30.0);
      net.init_random(rng);
      for (MatD& w : net.weights())
        for (double& v : w.a) v *= 3.0;
      const ObjectiveGap g = objective_gap_check(make_learned_field(net), mix, s, 1e-6, 120);
      REQUIRE(g.gap < 1e-6);
      CHECK(g.cfm == doctest::Approx(g.fm + g.cvar).epsilon(1e-9));
    }
  }
}

TEST_CASE("trained outputs respect the class bound") {
  const VarianceSchedule s(ScheduleKind::geometric, 0.15, 1.0);
  Rng data_rng(6);
  const MatD data = two_comp_1d().sample(data_rng, 512);
  TrainConfig cfg;
  cfg.n = 512;
  cfg.batch = 64;
  cfg.steps = 300;
  cfg.hidden = {16, 16};
  cfg.seed = 11;
  const TrainResult res = train_cfm(data, cfg, s);
  const double bound = output_bound_value(0.0, 512.0);
  Rng probe(71);
  for (int i = 0; i < 10000; ++i) {
    const VecD x{6.0 * probe.normal()};
    const VecD out = res.net.forward(probe.uniform01(), x);
    REQUIRE(std::fabs(out[0]) <= bound);
  }
}
