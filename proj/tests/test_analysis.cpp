#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdint>

#include "unravel/analysis.hpp"
#include "unravel/rng.hpp"

using namespace unravel;

TEST_CASE("renyi entropy on known spectra", "[analysis]") {
  const std::vector<double> pure = {1.0};
  const std::vector<double> maxmix = {0.5, 0.5};
  for (double n : {0.5, 1.0, 2.0, kRenyiInf}) {
    REQUIRE(renyi_entropy(pure, n) == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(renyi_entropy(maxmix, n) ==
            Catch::Approx(std::log(2.0)).margin(1e-13));
  }

  const std::vector<double> lam = {0.9, 0.1};
  REQUIRE(renyi_entropy(lam, kRenyiInf) ==
          Catch::Approx(-std::log(0.9)).epsilon(1e-12));
  REQUIRE(renyi_entropy(lam, 2.0) ==
          Catch::Approx(-std::log(0.81 + 0.01)).epsilon(1e-12));
  REQUIRE(renyi_entropy(lam, 1.0) ==
          Catch::Approx(-(0.9 * std::log(0.9) + 0.1 * std::log(0.1)))
              .epsilon(1e-12));
  REQUIRE(renyi_entropy(lam, 0.5) ==
          Catch::Approx(2.0 * std::log(std::sqrt(0.9) + std::sqrt(0.1)))
              .epsilon(1e-12));
}

TEST_CASE("renyi entropy is non-increasing in the index", "[analysis]") {
  const std::vector<double> lam = {0.5, 0.3, 0.2};
  double prev = 1e300;
  for (double n : {0.3, 0.5, 0.9, 1.0, 1.5, 2.0, 5.0, kRenyiInf}) {
    const double s = renyi_entropy(lam, n);
    REQUIRE(s <= prev + 1e-12);
    prev = s;
  }
}

TEST_CASE("renyi entropy input hygiene", "[analysis]") {
  // tiny negative values are clipped, near-1 sums renormalized
  REQUIRE(renyi_entropy({1.0 + 1e-12, -1e-12}, 1.0) ==
          Catch::Approx(0.0).margin(1e-10));
  REQUIRE_THROWS_AS(renyi_entropy({0.5, 0.4}, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(renyi_entropy({0.5, 0.5}, -1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(renyi_entropy({1.1, -0.1}, 1.0), std::invalid_argument);
}

TEST_CASE("tripartite information arithmetic", "[analysis]") {
  REQUIRE(tripartite_i3(0, 0, 0, 0, 0, 0, 0) == 0.0);
  REQUIRE(tripartite_i3(1, 1, 1, 2, 2, 2, 3) == Catch::Approx(0.0));
  const double l2 = std::log(2.0);
  // GHZ-like pattern: every block entropy equals log 2
  REQUIRE(tripartite_i3(l2, l2, l2, l2, l2, l2, l2) == Catch::Approx(l2));
}

TEST_CASE("bootstrap basics", "[analysis]") {
  const std::vector<double> constant(50, 3.25);
  auto [m0, s0] = bootstrap(constant, mean_statistic, 100, 7);
  REQUIRE(m0 == Catch::Approx(3.25));
  REQUIRE(s0 == Catch::Approx(0.0).margin(1e-14));

  Rng rng(99, 0);
  std::vector<double> gauss(400);
  for (auto& x : gauss) x = rng.next_gaussian();
  auto [m1, s1] = bootstrap(gauss, mean_statistic, 400, 11);
  REQUIRE(std::abs(m1) < 0.15);
  // standard error of the mean is sigma/sqrt(n) = 0.05
  REQUIRE(s1 == Catch::Approx(0.05).epsilon(0.3));

  auto [m2, s2] = bootstrap(gauss, mean_statistic, 400, 11);
  REQUIRE(m2 == m1);
  REQUIRE(s2 == s1);
}

namespace {

DataTable synthetic_table(double pc, double nu, double noise,
                          std::uint64_t seed) {
  DataTable rows;
  Rng rng(seed, 0);
  for (int L : {8, 12, 16}) {
    for (int k = 0; k <= 10; ++k) {
      const double p = 0.05 + 0.02 * k;
      const double x = (p - pc) * std::pow(double(L), 1.0 / nu);
      DataRow r;
      r.L = L;
      r.p = p;
      r.renyi = 1.0;
      r.mean = -1.4 * std::tanh(x) + noise * rng.next_gaussian();
      r.se = std::max(noise, 0.02);
      r.n_traj = 100;
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("fss collapse recovers synthetic parameters", "[analysis]") {
  const double pc_true = 0.15, nu_true = 1.3;
  const DataTable rows = synthetic_table(pc_true, nu_true, 0.02, 41);
  FssOptions o;
  o.grid = 120;
  o.n_boot = 60;
  const CollapseResult fit = fss_collapse(rows, o);
  REQUIRE(std::abs(fit.p_c - pc_true) <= std::max(3.0 * fit.p_c_err, 0.01));
  REQUIRE(std::abs(fit.nu - nu_true) <= std::max(3.0 * fit.nu_err, 0.15));
  REQUIRE(fit.quality < 5.0);
  REQUIRE(fit.n_boot == 60);
  REQUIRE(fit.p_c_err > 0.0);
  REQUIRE(fit.nu_err > 0.0);
}

TEST_CASE("fss optimum beats displaced parameters", "[analysis]") {
  const DataTable rows = synthetic_table(0.15, 1.3, 0.0, 5);
  FssOptions o;
  o.grid = 120;
  o.n_boot = 2;
  const CollapseResult fit = fss_collapse(rows, o);
  const double q0 = detail::collapse_residual(rows, fit.p_c, fit.nu);
  for (double dpc : {-0.02, 0.02})
    REQUIRE(q0 < detail::collapse_residual(rows, fit.p_c + dpc, fit.nu));
  for (double dnu : {-0.25, 0.25})
    REQUIRE(q0 < detail::collapse_residual(rows, fit.p_c, fit.nu + dnu));
}

TEST_CASE("fss point estimate is row-order invariant", "[analysis]") {
  DataTable rows = synthetic_table(0.15, 1.3, 0.02, 17);
  FssOptions o;
  o.grid = 80;
  o.n_boot = 2;
  const CollapseResult a = fss_collapse(rows, o);
  std::reverse(rows.begin(), rows.end());
  const CollapseResult b = fss_collapse(rows, o);
  REQUIRE(a.p_c == Catch::Approx(b.p_c).margin(1e-9));
  REQUIRE(a.nu == Catch::Approx(b.nu).margin(1e-9));
}

TEST_CASE("fss rejects degenerate inputs", "[analysis]") {
  // two sizes only
  DataTable two;
  for (int L : {8, 12})
    for (int k = 0; k <= 10; ++k)
      two.push_back({L, 0.05 + 0.02 * k, 1.0, 0.3, 0.02, 10});
  REQUIRE_THROWS_AS(fss_collapse(two), std::invalid_argument);

  // flat observable: residual landscape carries no information
  DataTable flat;
  for (int L : {8, 12, 16})
    for (int k = 0; k <= 10; ++k)
      flat.push_back({L, 0.05 + 0.02 * k, 1.0, 0.7, 0.02, 10});
  REQUIRE_THROWS_AS(fss_collapse(flat), degenerate_collapse_error);
}
