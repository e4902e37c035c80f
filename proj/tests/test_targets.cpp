#include <doctest.h>

#include <cmath>
#include <numbers>

#include "flowlab/errors.hpp"
#include "flowlab/quadrature.hpp"
#include "flowlab/targets.hpp"
#include "oracles.hpp"

using namespace flowlab;

namespace {

GaussianMixture std_normal_1d() {
  MatD cov(1, 1);
  cov(0, 0) = 1.0;
  return GaussianMixture({1.0}, {{0.0}}, {cov});
}

GaussianMixture two_comp_2d() {
  MatD c1(2, 2), c2(2, 2);
  c1(0, 0) = 0.8;
  c1(1, 1) = 0.5;
  c1(0, 1) = c1(1, 0) = 0.2;
  c2(0, 0) = 0.4;
  c2(1, 1) = 1.1;
  c2(0, 1) = c2(1, 0) = -0.1;
  return GaussianMixture({0.3, 0.7}, {{-1.5, 0.5}, {2.0, -0.5}}, {c1, c2});
}

}  // namespace

TEST_CASE("log density values") {
  const PerturbedGaussian flat(2, make_perturbation("zero", 0.0, 2));
  CHECK(flat.log_density_unnorm(VecD{0.0, 0.0}) == 0.0);

  const PerturbedGaussian sin01(2, make_perturbation("sin", 0.1, 2));
  CHECK(sin01.log_density_unnorm(VecD{std::numbers::pi / 2.0, 0.0}) ==
        doctest::Approx(-1.3337005501361698).epsilon(1e-14));

  CHECK(std_normal_1d().log_density(VecD{0.0}) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-14));

  CHECK_THROWS_AS(flat.log_density_unnorm(VecD{std::nan(""), 0.0}), DomainError);
}

TEST_CASE("score values") {
  const PerturbedGaussian flat(2, make_perturbation("zero", 0.0, 2));
  const VecD g = flat.grad_log_density(VecD{1.0, 2.0});
  CHECK(g[0] == doctest::Approx(-1.0));
  CHECK(g[1] == doctest::Approx(-2.0));

  const PerturbedGaussian sin01(2, make_perturbation("sin", 0.1, 2));
  const VecD g2 = sin01.grad_log_density(VecD{0.0, 0.0});
  CHECK(g2[0] == doctest::Approx(-0.1).epsilon(1e-14));
  CHECK(g2[1] == doctest::Approx(0.0));

  MatD eye(1, 1);
  eye(0, 0) = 1.0;
  const GaussianMixture single({1.0}, {{1.7}}, {eye});
  CHECK(single.grad_log_density(VecD{0.4})[0] == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("score matches finite differences of the log density") {
  Rng rng(11);
  const GaussianMixture mix = two_comp_2d();
  const PerturbedGaussian pert(2, make_perturbation("gauss_bump", 0.3, 2));
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    VecD x = rng.normal_vec(2);
    for (int j = 0; j < 2; ++j) x[j] *= 2.0;
    for (int j = 0; j < 2; ++j) {
      VecD xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd_mix = (mix.log_density(xp) - mix.log_density(xm)) / (2 * h);
      const double an_mix = mix.grad_log_density(x)[j];
      REQUIRE(std::fabs(fd_mix - an_mix) / (1.0 + std::fabs(an_mix)) < 1e-6);
      const double fd_pert =
          (pert.log_density_unnorm(xp) - pert.log_density_unnorm(xm)) / (2 * h);
      const double an_pert = pert.grad_log_density(x)[j];
      REQUIRE(std::fabs(fd_pert - an_pert) / (1.0 + std::fabs(an_pert)) < 1e-6);
    }
  }
}

TEST_CASE("mixture sampling moments") {
  MatD eye(1, 1);
  eye(0, 0) = 1.0;
  const GaussianMixture single({1.0}, {{5.0}}, {eye});
  Rng rng(1234);
  const int n = 100000;
  const MatD s = single.sample(rng, n);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += s(i, 0);
  mean /= n;
  const double se = 1.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::fabs(mean - 5.0) <= 3.0 * se);

  // two-component 2D mixture against analytic moments
  const GaussianMixture mix = two_comp_2d();
  Rng rng2(77);
  const MatD s2 = mix.sample(rng2, n);
  const VecD want_mean = mix.mean();
  const MatD want_cov = mix.covariance();
  VecD got_mean(2, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) got_mean[j] += s2(i, j);
  for (int j = 0; j < 2; ++j) got_mean[j] /= n;
  for (int j = 0; j < 2; ++j) {
    const double se_j = std::sqrt(want_cov(j, j) / n);
    CHECK(std::fabs(got_mean[j] - want_mean[j]) <= 4.0 * se_j);
  }
  MatD got_cov(2, 2);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        got_cov(a, b) += (s2(i, a) - got_mean[a]) * (s2(i, b) - got_mean[b]);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      got_cov(a, b) /= n;
      const double scale = std::sqrt(want_cov(a, a) * want_cov(b, b));
      CHECK(std::fabs(got_cov(a, b) - want_cov(a, b)) <= 4.0 * 2.0 * scale / std::sqrt(n));
    }
}

TEST_CASE("rejection sampler acceptance rate") {
  const PerturbedGaussian flat(1, make_perturbation("zero", 0.0, 1));
  Rng rng(5);
  auto [acc0, prop0] = flat.acceptance_trial(rng, 2000);
  CHECK(acc0 == prop0);  // a == 0, L == 0: accept everything

  const PerturbedGaussian p02(1, make_perturbation("sin", 0.2, 1));
  Rng rng2(6);
  const long n = 100000;
  auto [acc, prop] = p02.acceptance_trial(rng2, n);
  const double rate = static_cast<double>(acc) / prop;
  const double floor = std::exp(-0.4);
  const double se = std::sqrt(rate * (1.0 - rate) / n);
  CHECK(rate >= floor - 3.0 * se);
}

TEST_CASE("rejection sampler distribution (KS against quadrature CDF)") {
  const PerturbedGaussian target(1, make_perturbation("sin", 0.2, 1));
  auto density = [&](double y) { return std::exp(target.log_density_unnorm(VecD{y})); };
  const double lo = -10.0, hi = 10.0;
  const double z = adaptive_simpson(density, lo, hi, 1e-12);

  const int grid_n = 4001;
  VecD grid(grid_n), cdf(grid_n);
  double acc = 0.0;
  double prev = density(lo);
  grid[0] = lo;
  cdf[0] = 0.0;
  for (int i = 1; i < grid_n; ++i) {
    const double x = lo + (hi - lo) * i / (grid_n - 1);
    const double cur = density(x);
    const double mid = density(0.5 * (grid[i - 1] + x));
    acc += (x - grid[i - 1]) / 6.0 * (prev + 4.0 * mid + cur);
    grid[i] = x;
    cdf[i] = acc / z;
    prev = cur;
  }

  Rng rng(2024);
  const int n = 100000;
  const MatD s = target.sample(rng, n);
  VecD flat(n);
  for (int i = 0; i < n; ++i) flat[i] = s(i, 0);
  const double ks = oracles::ks_statistic(flat, grid, cdf);
  const double crit_1pct = 1.6276236307187293 / std::sqrt(static_cast<double>(n));
  CHECK(ks < crit_1pct);
}

TEST_CASE("construction guards") {
  MatD eye(1, 1);
  eye(0, 0) = 1.0;
  CHECK_THROWS_AS(GaussianMixture({0.5, 0.6}, {{0.0}, {1.0}}, {eye, eye}), ConstructionError);
  MatD bad(2, 2);
  bad(0, 0) = 1.0;
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(GaussianMixture({1.0}, {{0.0, 0.0}}, {bad}), ConstructionError);

  // declared bound smaller than the perturbation actually is
  Perturbation lying = make_perturbation("sin", 0.2, 1);
  lying.bound = 0.05;
  CHECK_THROWS_AS(PerturbedGaussian(1, lying), ConstructionError);

  CHECK_THROWS_AS(make_perturbation("unknown", 0.1, 1), ConstructionError);
}

TEST_CASE("catalog respects declared bounds at random probes") {
  Rng rng(31);
  for (const char* name : {"zero", "sin", "cos_sum", "gauss_bump"}) {
    const Perturbation p = make_perturbation(name, 0.25, 3);
    for (int i = 0; i < 200; ++i) {
      const VecD x = rng.normal_vec(3);
      REQUIRE(std::fabs(p.value(x)) <= p.bound + 1e-12);
      for (double g : p.gradient(x)) REQUIRE(std::fabs(g) <= p.bound + 1e-12);
      REQUIRE(max_abs(p.hessian(x)) <= p.bound + 1e-12);
    }
  }
}

TEST_CASE("perturbed target without gradient reports a capability error") {
  Perturbation p = make_perturbation("sin", 0.1, 1);
  p.gradient = nullptr;
  p.hessian = nullptr;
  const PerturbedGaussian target(1, p);
  CHECK_THROWS_AS(target.grad_log_density(VecD{0.3}), CapabilityError);
}
