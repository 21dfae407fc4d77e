#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "unravel/mps.hpp"

using namespace unravel;

namespace {

const TruncationPolicy kExact{0, 0.0};

// same brick pattern on both engines; returns the shared gate list
struct MiniCircuit {
  std::vector<GateOp> gates;
};

MiniCircuit random_brick(int L, int layers, std::uint64_t seed) {
  MiniCircuit c;
  Rng rng(seed, 0);
  for (int t = 0; t < layers; ++t)
    for (int i = t % 2; i + 1 < L; i += 2)
      c.gates.push_back({i, i + 1, haar_two_qubit(rng)});
  return c;
}

PureState dense_run(int L, const MiniCircuit& c) {
  PureState s = PureState::zero_state(L);
  for (const GateOp& g : c.gates) apply_two_qubit(s, g.u, g.i, g.j);
  return s;
}

MPSState mps_run(int L, const MiniCircuit& c,
                 const TruncationPolicy& pol = kExact) {
  MPSState m = MPSState::product_state(L);
  for (const GateOp& g : c.gates) apply_two_site_gate(m, g.i, g.u, pol);
  return m;
}

}  // namespace

TEST_CASE("product state initialization", "[mps]") {
  MPSState m = MPSState::product_state(4, {1, 0, 0, 1});
  REQUIRE(m.max_bond() == 1);
  REQUIRE(m.norm() == Catch::Approx(1.0));
  const PureState s = to_statevector(m);
  REQUIRE(std::abs(s.amps(0b1001) - cplx(1.0)) < 1e-15);

  REQUIRE_THROWS_AS(MPSState::product_state(4, {1, 0}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(MPSState::product_state(4, {2, 0, 0, 0}),
                    std::invalid_argument);
}

TEST_CASE("gates reproduce the dense engine", "[mps]") {
  const int L = 10;
  const MiniCircuit c = random_brick(L, 4, 303);
  const PureState dense = dense_run(L, c);
  MPSState m = mps_run(L, c);
  REQUIRE(m.norm() == Catch::Approx(1.0).epsilon(1e-12));
  const PureState back = to_statevector(m);
  REQUIRE((back.amps - dense.amps).norm() < 1e-10);
}

TEST_CASE("center moves leave the state untouched", "[mps]") {
  const int L = 8;
  const MiniCircuit c = random_brick(L, 3, 77);
  MPSState m = mps_run(L, c);
  const PureState before = to_statevector(m);
  move_center_to(m, 0);
  move_center_to(m, L - 1);
  move_center_to(m, L / 2);
  const PureState after = to_statevector(m);
  REQUIRE((before.amps - after.amps).norm() < 1e-11);

  // every bond spectrum is a normalized, descending distribution
  move_center_to(m, 0);
  move_center_to(m, L - 1);  // refreshes all bonds on the way
  for (const auto& lam : m.spectra) {
    const double sum = std::accumulate(lam.begin(), lam.end(), 0.0);
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-8));
    for (std::size_t i = 1; i < lam.size(); ++i)
      REQUIRE(lam[i] <= lam[i - 1] + 1e-12);
  }
}

TEST_CASE("local density matrices match the dense engine", "[mps]") {
  const int L = 7;
  const MiniCircuit c = random_brick(L, 3, 55);
  const PureState dense = dense_run(L, c);
  MPSState m = mps_run(L, c);
  for (int site = 0; site < L; ++site) {
    move_center_to(m, site);
    const CMatrix a = mps_site_dm(m);
    const CMatrix b = site_dm(dense, site);
    REQUIRE((a - b).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("half-chain spectrum matches the dense Schmidt values", "[mps]") {
  const int L = 8;
  const MiniCircuit c = random_brick(L, 4, 99);
  const PureState dense = dense_run(L, c);
  MPSState m = mps_run(L, c);
  auto lam_mps = half_chain_spectrum(m);
  auto lam_dense = block_spectrum(dense, contiguous_sites(0, L / 2));
  std::sort(lam_mps.rbegin(), lam_mps.rend());
  std::sort(lam_dense.rbegin(), lam_dense.rend());
  for (std::size_t i = 0; i < std::min(lam_mps.size(), lam_dense.size()); ++i)
    REQUIRE(lam_mps[i] == Catch::Approx(lam_dense[i]).margin(1e-10));
}

TEST_CASE("sampled kraus applications agree with the dense engine", "[mps]") {
  const int L = 6;
  const MiniCircuit c = random_brick(L, 3, 21);
  PureState dense = dense_run(L, c);
  MPSState m = mps_run(L, c);
  const ChannelSpec spec{ChannelKind::AmplitudeDamping, 0.35};
  const KrausSet set = conventional_kraus(spec);
  Rng r1(404, 9), r2(404, 9);
  for (int site = 0; site < L; ++site) {
    const int a = apply_kraus_sampled(dense, set, site, r1);
    const int b = apply_kraus_site_sampled(m, set, site, r2);
    REQUIRE(a == b);
  }
  const PureState back = to_statevector(m);
  REQUIRE((back.amps - dense.amps).norm() < 1e-9);
}

TEST_CASE("truncation accounting", "[mps]") {
  const int L = 10;
  const MiniCircuit c = random_brick(L, 5, 1234);

  MPSState exact = mps_run(L, c);
  REQUIRE(exact.norm() == Catch::Approx(1.0).epsilon(1e-11));

  // capped bond dimension: unit norm by construction, entropy bounded
  TruncationPolicy tight{4, 0.0};
  MPSState m4 = mps_run(L, c, tight);
  REQUIRE(m4.max_bond() <= 4);
  REQUIRE(m4.norm() == Catch::Approx(1.0).epsilon(1e-9));
  auto lam = half_chain_spectrum(m4);
  REQUIRE(renyi_entropy(lam, 1.0) <= std::log(4.0) + 1e-9);

  // discarded weight shrinks as the cap grows
  double disc4 = 0.0, disc16 = 0.0, disc_exact = 0.0;
  {
    MPSState a = MPSState::product_state(L);
    MPSState b = MPSState::product_state(L);
    MPSState e = MPSState::product_state(L);
    for (const GateOp& g : c.gates) {
      disc4 += apply_two_site_gate(a, g.i, g.u, TruncationPolicy{4, 0.0});
      disc16 += apply_two_site_gate(b, g.i, g.u, TruncationPolicy{16, 0.0});
      disc_exact += apply_two_site_gate(e, g.i, g.u, kExact);
    }
  }
  REQUIRE(disc4 > disc16);
  REQUIRE(disc16 >= disc_exact);
  REQUIRE(disc_exact == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("mps and dense mfim trajectories coincide", "[mps]") {
  MFIMConfig mc;
  mc.L = 8;
  mc.dt = 0.1;
  mc.total_time = 1.0;
  mc.gamma = 0.3;
  const std::vector<double> renyi = {1.0, 2.0};
  for (Unraveling mode : {Unraveling::Conventional, Unraveling::SpinOptimized,
                          Unraveling::Heuristic}) {
    const MFIMSeries dense =
        run_mfim_trajectory_exact(mc, mode, renyi, 2024, true);
    const MFIMSeries mps =
        run_mfim_mps_trajectory(mc, mode, renyi, 2024, kExact, true);
    REQUIRE(dense.outcomes == mps.outcomes);
    REQUIRE(dense.times == mps.times);
    REQUIRE(dense.entropy.size() == mps.entropy.size());
    for (std::size_t t = 0; t < dense.entropy.size(); ++t)
      for (std::size_t k = 0; k < renyi.size(); ++k)
        REQUIRE(dense.entropy[t][k] ==
                Catch::Approx(mps.entropy[t][k]).margin(1e-7));
    for (double d : mps.discarded) REQUIRE(d == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("closed mfim evolution matches dense exactly", "[mps]") {
  MFIMConfig mc;
  mc.L = 8;
  mc.dt = 0.05;
  mc.total_time = 1.5;
  mc.gamma = 0.0;
  const MFIMSeries dense =
      run_mfim_trajectory_exact(mc, Unraveling::Conventional, {1.0}, 5);
  const MFIMSeries mps = run_mfim_mps_trajectory(
      mc, Unraveling::Conventional, {1.0}, 5, TruncationPolicy{0, 1e-14});
  REQUIRE(dense.entropy.size() == mps.entropy.size());
  for (std::size_t t = 0; t < dense.entropy.size(); ++t)
    REQUIRE(dense.entropy[t][0] ==
            Catch::Approx(mps.entropy[t][0]).margin(1e-7));
  REQUIRE(mps.saturation == Catch::Approx(dense.saturation).margin(1e-6));
}

TEST_CASE("mps rejects unsupported configurations", "[mps]") {
  MFIMConfig mc;
  mc.L = 6;
  mc.boundary = Boundary::Periodic;
  REQUIRE_THROWS_AS(run_mfim_mps_trajectory(mc, Unraveling::Conventional,
                                            {1.0}, 1, kExact),
                    std::invalid_argument);
}
