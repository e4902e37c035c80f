#include <doctest.h>

#include <cmath>

#include "flowlab/errors.hpp"
#include "flowlab/wasserstein.hpp"
#include "oracles.hpp"

using namespace flowlab;

namespace {

MatD random_points(int m, int d, Rng& rng, double spread = 1.0) {
  MatD a(m, d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = spread * rng.normal();
  return a;
}

}  // namespace

TEST_CASE("w1_1d basics") {
  CHECK(w1_1d({0.3, -1.0, 2.0}, {0.3, -1.0, 2.0}) == 0.0);
  CHECK(w1_1d({0.0, 0.0}, {1.0, 1.0}) == doctest::Approx(1.0));
  CHECK(w1_1d({0.0, 2.0}, {1.0, 1.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(w1_1d({0.0}, {1.0, 2.0}), DomainError);
}

TEST_CASE("assignment estimator basics") {
  Rng rng(5);
  const MatD a = random_points(16, 2, rng);
  CHECK(w1_assignment(a, a) == doctest::Approx(0.0).epsilon(1e-14));

  MatD b = a;
  for (int i = 0; i < b.rows; ++i) b(i, 0) += 1.0;
  CHECK(w1_assignment(a, b) == doctest::Approx(1.0).epsilon(1e-12));

  const MatD big(513, 1);
  CHECK_THROWS_AS(w1_assignment(big, big), DomainError);
}

TEST_CASE("assignment equals exhaustive permutation minimum for m <= 8") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 4 + static_cast<int>(rng.below(5));  // 4..8
    const MatD a = random_points(m, 2, rng);
    const MatD b = random_points(m, 2, rng);
    const double brute = oracles::w1_bruteforce(a, b);
    const double solver = oracles::matching_cost(a, b, assignment_matching(a, b));
    REQUIRE(solver == brute);  // identical ordered sums, bit for bit
  }
}

TEST_CASE("1D sorted estimator equals the assignment estimator") {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 32;
    const MatD a = random_points(m, 1, rng);
    const MatD b = random_points(m, 1, rng, 1.4);
    VecD av(m), bv(m);
    for (int i = 0; i < m; ++i) {
      av[i] = a(i, 0);
      bv[i] = b(i, 0);
    }
    const double sorted_est = w1_1d(av, bv);
    const double assigned = w1_assignment(a, b);
    REQUIRE(sorted_est == doctest::Approx(assigned).epsilon(1e-13));
  }
}

TEST_CASE("triangle inequality for the exact estimators") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 24;
    const MatD a = random_points(m, 2, rng);
    const MatD b = random_points(m, 2, rng, 1.3);
    const MatD c = random_points(m, 2, rng, 0.7);
    const double ab = w1_assignment(a, b);
    const double bc = w1_assignment(b, c);
    const double ac = w1_assignment(a, c);
    REQUIRE(ac <= ab + bc + 1e-12);
  }
}

TEST_CASE("sliced estimator") {
  Rng rng(12);
  const MatD a = random_points(48, 3, rng);
  Rng prng(13);
  CHECK(sliced_w1(a, a, 16, prng) == 0.0);

  SUBCASE("d = 1 reduces to the sorted estimator") {
    const MatD x = random_points(40, 1, rng);
    const MatD y = random_points(40, 1, rng);
    VecD xv(40), yv(40);
    for (int i = 0; i < 40; ++i) {
      xv[i] = x(i, 0);
      yv[i] = y(i, 0);
    }
    Rng prng2(14);
    CHECK(sliced_w1(x, y, 8, prng2) == doctest::Approx(w1_1d(xv, yv)).epsilon(1e-12));
  }

  SUBCASE("translation gives |u| times the mean projection factor") {
    const VecD u{0.8, -0.6};  // |u| = 1
    MatD b = a;
    const MatD a2 = random_points(32, 2, rng);
    b = a2;
    for (int i = 0; i < b.rows; ++i) {
      b(i, 0) += u[0];
      b(i, 1) += u[1];
    }
    // each projection contributes exactly |<theta, u>|
    const int n_proj = 20000;
    Rng prng3(15);
    const double got = sliced_w1(a2, b, n_proj, prng3);
    const double wanted = 0.6366197723675814;  // 2/pi for d = 2, |u| = 1
    // sd of |cos| is about 0.31
    CHECK(std::fabs(got - wanted) <= 3.0 * 0.31 / std::sqrt(static_cast<double>(n_proj)));
  }
}

TEST_CASE("sliced standard error halves when projections quadruple") {
  Rng rng(16);
  const MatD a = random_points(64, 2, rng);
  const MatD b = random_points(64, 2, rng, 1.5);
  VecD log_np, log_se;
  int seed = 0;
  for (int np : {8, 16, 32, 64, 128}) {
    VecD vals;
    for (int rep = 0; rep < 48; ++rep) {
      Rng prng(3000 + ++seed);
      vals.push_back(sliced_w1(a, b, np, prng));
    }
    const auto ms = oracles::mean_se(vals);
    log_np.push_back(std::log(static_cast<double>(np)));
    log_se.push_back(std::log(ms.se * std::sqrt(48.0)));  // sd of a single estimate
  }
  const double slope = oracles::ls_slope(log_np, log_se);
  CHECK(slope == doctest::Approx(-0.5).epsilon(0.3));  // -0.5 +- 0.15
}

TEST_CASE("sigma_min_of_n") {
  CHECK(sigma_min_of_n(std::exp(10.0), 1, 1.0, 0.0) ==
        doctest::Approx(0.36787944117144233).epsilon(1e-12));
  CHECK(sigma_min_of_n(std::exp(11.0), 1, 1.0, 1.0) ==
        doctest::Approx(0.36787944117144233).epsilon(1e-12));
  double prev = 1.0;
  for (double n : {10.0, 100.0, 1000.0, 1e6, 1e9}) {
    const double v = sigma_min_of_n(n, 2, 1.0, 1.0);
    CHECK(v < prev);
    prev = v;
  }
  CHECK_THROWS_AS(sigma_min_of_n(1.0, 1, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(sigma_min_of_n(100.0, 1, 1.5, 1.0), DomainError);
}

TEST_CASE("reference rate slope") {
  CHECK(reference_rate_slope(1, 1.0, 1.0) == doctest::Approx(-0.18181818181818182).epsilon(1e-14));
}

TEST_CASE("w1 report records the protocol and vanishes on identical multisets") {
  Rng rng(18);
  const MatD a1 = random_points(40, 1, rng);
  const W1Report r1 = make_w1_report(a1, a1, W1Estimator::exact_1d, 0, 7);
  CHECK(r1.value == 0.0);
  CHECK(r1.m == 40);
  CHECK(r1.estimator == W1Estimator::exact_1d);

  const MatD a2 = random_points(24, 3, rng);
  const W1Report r2 = make_w1_report(a2, a2, W1Estimator::assignment, 0, 7);
  CHECK(r2.value == doctest::Approx(0.0).epsilon(1e-14));

  const MatD b2 = random_points(24, 3, rng);
  const W1Report r3 = make_w1_report(a2, b2, W1Estimator::sliced, 12, 7);
  CHECK(r3.n_proj == 12);
  CHECK(r3.seed == 7);
  CHECK(r3.value > 0.0);
  // deterministic given the seed
  const W1Report r4 = make_w1_report(a2, b2, W1Estimator::sliced, 12, 7);
  CHECK(r3.value == r4.value);
}
