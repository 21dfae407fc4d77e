#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "unravel/statevector.hpp"

using namespace unravel;

namespace {

PureState random_entangled_state(int L, std::uint64_t seed, int layers = 3) {
  PureState s = PureState::zero_state(L);
  Rng rng(seed, 0);
  for (int t = 0; t < layers; ++t) {
    const int start = t % 2;
    for (int i = start; i + 1 < L; i += 2)
      apply_two_qubit(s, haar_two_qubit(rng), i, i + 1);
  }
  return s;
}

CMatrix swap_gate() {
  CMatrix u = CMatrix::Zero(4, 4);
  u(0, 0) = 1.0;
  u(1, 2) = 1.0;
  u(2, 1) = 1.0;
  u(3, 3) = 1.0;
  return u;
}

}  // namespace

TEST_CASE("single-qubit gates act on the right bit", "[statevector]") {
  PureState s = PureState::zero_state(3);
  apply_one_qubit(s, pauli::X(), 1);  // |000> -> site 1 flipped
  REQUIRE(std::abs(s.amps(2) - cplx(1.0)) < 1e-15);

  // diagonal fast path and general path agree
  PureState a = random_entangled_state(4, 5);
  PureState b = a;
  apply_one_qubit(a, pauli::Z(), 2);
  CMatrix zgen(2, 2);
  zgen << 1.0, 1e-300, 1e-300, -1.0;  // forces the generic branch
  apply_one_qubit(b, zgen, 2);
  REQUIRE((a.amps - b.amps).norm() < 1e-12);
}

TEST_CASE("two-qubit gate index convention", "[statevector]") {
  // SWAP with (i=0, j=1): site 0 value is the HIGH bit of the gate index
  PureState s = PureState::zero_state(2);
  apply_one_qubit(s, pauli::X(), 0);  // index 1: site0=1, site1=0
  apply_two_qubit(s, swap_gate(), 0, 1);
  REQUIRE(std::abs(s.amps(2) - cplx(1.0)) < 1e-15);  // site0=0, site1=1

  // CNOT controlled on i, targeting j: flips j only when v_i = 1
  CMatrix cnot = CMatrix::Zero(4, 4);
  cnot(0, 0) = cnot(1, 1) = 1.0;  // v_i = 0 rows untouched
  cnot(2, 3) = cnot(3, 2) = 1.0;
  PureState c = PureState::zero_state(2);
  apply_one_qubit(c, pauli::X(), 1);        // site1 = 1 (the control stays 0)
  apply_two_qubit(c, cnot, 0, 1);    // control site 0 is 0: no flip
  REQUIRE(std::abs(c.amps(2) - cplx(1.0)) < 1e-15);
  apply_one_qubit(c, pauli::X(), 0);        // now control = 1
  apply_two_qubit(c, cnot, 0, 1);    // target site 1 flips back
  REQUIRE(std::abs(c.amps(1) - cplx(1.0)) < 1e-15);

  // unitarity: U then U^dag restores a random state
  PureState r = random_entangled_state(5, 9);
  PureState r0 = r;
  Rng rng(31, 0);
  const CMatrix u = haar_two_qubit(rng);
  apply_two_qubit(r, u, 1, 3);
  REQUIRE(r.norm() == Catch::Approx(1.0).epsilon(1e-12));
  apply_two_qubit(r, CMatrix(u.adjoint()), 1, 3);
  REQUIRE((r.amps - r0.amps).norm() < 1e-12);
}

TEST_CASE("reduced density matrices", "[statevector]") {
  // product state: site dm is the pure projector
  PureState s = PureState::zero_state(3);
  apply_one_qubit(s, pauli::X(), 2);
  const CMatrix d2 = site_dm(s, 2);
  REQUIRE(std::abs(d2(1, 1) - cplx(1.0)) < 1e-14);
  REQUIRE(std::abs(d2(0, 0)) < 1e-14);

  // Bell pair: each side is maximally mixed
  PureState bell = PureState::zero_state(2);
  bell.amps(0) = bell.amps(3) = 1.0 / std::sqrt(2.0);
  const CMatrix r0 = reduced_dm(bell, {0});
  REQUIRE(std::abs(r0(0, 0) - cplx(0.5)) < 1e-14);
  REQUIRE(std::abs(r0(1, 1) - cplx(0.5)) < 1e-14);
  REQUIRE(std::abs(r0(0, 1)) < 1e-14);
  REQUIRE(block_entropy(bell, {0}, 1.0) ==
          Catch::Approx(std::log(2.0)).epsilon(1e-12));

  // spectra from the SVD path match eigenvalues of the gathered dm
  PureState r = random_entangled_state(6, 77);
  const std::vector<int> blk = {0, 2, 5};
  auto lam_svd = block_spectrum(r, blk);
  const Eigen::VectorXd ev = herm_eigenvalues(reduced_dm(r, blk));
  std::vector<double> lam_eig(ev.data(), ev.data() + ev.size());
  std::sort(lam_svd.begin(), lam_svd.end());
  std::sort(lam_eig.begin(), lam_eig.end());
  REQUIRE(lam_svd.size() == lam_eig.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < lam_svd.size(); ++i) {
    REQUIRE(lam_svd[i] == Catch::Approx(lam_eig[i]).margin(1e-12));
    sum += lam_svd[i];
  }
  REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));

  REQUIRE_THROWS_AS(reduced_dm(r, std::vector<int>{}), std::invalid_argument);
  REQUIRE_THROWS_AS(reduced_dm(r, std::vector<int>{1, 1}),
                    std::invalid_argument);
}

TEST_CASE("haar gate sampling", "[statevector]") {
  Rng a(12, 3), b(12, 3);
  REQUIRE((haar_two_qubit(a) - haar_two_qubit(b)).norm() == 0.0);

  Rng rng(4, 0);
  const CMatrix u = haar_two_qubit(rng);
  REQUIRE(is_unitary(u, 1e-11));

  // first-moment check: E|U_00|^2 = 1/4 for the unitary group on C^4
  Rng mc(2024, 0);
  double acc = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) acc += std::norm(haar_two_qubit(mc)(0, 0));
  acc /= n;
  // Beta(1,3) has sd 0.194; 4 sigma of the mean is ~0.0055
  REQUIRE(acc == Catch::Approx(0.25).margin(0.006));
}

TEST_CASE("sampled channel application", "[statevector]") {
  const ChannelSpec spec{ChannelKind::Dephasing, 0.4};
  const KrausSet set = conventional_kraus(spec);

  // |+>: outcome probabilities are (1-p, p/2, p/2); empirical frequencies
  int counts[3] = {0, 0, 0};
  const int n = 30000;
  for (int k = 0; k < n; ++k) {
    PureState s = PureState::zero_state(1);
    apply_one_qubit(s, hadamard_like_rotation2().u, 0);
    Rng rng(555, static_cast<std::uint64_t>(k));
    counts[apply_kraus_sampled(s, set, 0, rng)]++;
    REQUIRE(s.norm() == Catch::Approx(1.0).epsilon(1e-12));
  }
  const double sd0 = std::sqrt(0.6 * 0.4 / n);   // ~0.0028
  const double sd1 = std::sqrt(0.2 * 0.8 / n);   // ~0.0023
  REQUIRE(double(counts[0]) / n == Catch::Approx(0.6).margin(4 * sd0));
  REQUIRE(double(counts[1]) / n == Catch::Approx(0.2).margin(4 * sd1));
  REQUIRE(double(counts[2]) / n == Catch::Approx(0.2).margin(4 * sd1));

  // collapse onto the projector branch leaves the basis state
  PureState s = PureState::zero_state(1);
  apply_one_qubit(s, hadamard_like_rotation2().u, 0);
  apply_one_qubit(s, set.ops[1], 0);  // sqrt(p)|0><0|
  s.normalize();
  REQUIRE(std::abs(std::abs(s.amps(0)) - 1.0) < 1e-12);
}

TEST_CASE("trajectory runs are deterministic in the seed", "[statevector]") {
  RucConfig cfg;
  cfg.L = 6;
  cfg.T = 6;
  cfg.p = 0.15;
  cfg.unraveling = Unraveling::Conventional;
  cfg.renyi_indices = {0.5, 1.0, 2.0};
  const TrajectoryRecord a = run_ruc_trajectory(cfg, 42);
  const TrajectoryRecord b = run_ruc_trajectory(cfg, 42);
  REQUIRE(a.outcomes == b.outcomes);
  REQUIRE(a.half_chain == b.half_chain);
  REQUIRE(a.outcomes.size() == std::size_t(6 * 6));

  const TrajectoryRecord c = run_ruc_trajectory(cfg, 43);
  REQUIRE(a.outcomes != c.outcomes);

  cfg.unraveling = Unraveling::Heuristic;
  const TrajectoryRecord h1 = run_ruc_trajectory(cfg, 42);
  const TrajectoryRecord h2 = run_ruc_trajectory(cfg, 42);
  REQUIRE(h1.outcomes == h2.outcomes);
  REQUIRE(h1.half_chain == h2.half_chain);
}

TEST_CASE("full dephasing disentangles every trajectory", "[statevector]") {
  RucConfig cfg;
  cfg.L = 8;
  cfg.T = 8;
  cfg.p = 1.0;
  cfg.unraveling = Unraveling::Conventional;
  cfg.renyi_indices = {0.5, 1.0, 2.0, kRenyiInf};
  const TrajectoryRecord rec = run_ruc_trajectory(cfg, 7);
  for (double s : rec.half_chain) REQUIRE(std::abs(s) < 1e-10);
  for (double v : rec.i3) REQUIRE(std::abs(v) < 1e-9);
}

TEST_CASE("tripartite information of a GHZ state", "[statevector]") {
  PureState ghz = PureState::zero_state(4);
  ghz.amps(0) = ghz.amps(15) = 1.0 / std::sqrt(2.0);
  const auto i3 = i3_from_state(ghz, {0.5, 1.0, 2.0, kRenyiInf});
  for (double v : i3) REQUIRE(v == Catch::Approx(std::log(2.0)).margin(1e-10));

  // unentangled quarters: I3 vanishes
  PureState prod = PureState::zero_state(4);
  prod.amps(0) = 1.0;
  for (double v : i3_from_state(prod, {1.0, 2.0}))
    REQUIRE(std::abs(v) < 1e-12);
}

TEST_CASE("mfim bond terms add up to the dense hamiltonian", "[statevector]") {
  for (Boundary bc : {Boundary::Open, Boundary::Periodic}) {
    MFIMConfig mc;
    mc.L = 5;
    mc.boundary = bc;
    const std::size_t dim = 32;
    CMatrix sum = CMatrix::Zero(dim, dim);
    auto bonds = even_bonds(mc.L, bc);
    const auto odd = odd_bonds(mc.L, bc);
    bonds.insert(bonds.end(), odd.begin(), odd.end());
    for (int b : bonds) {
      const CMatrix h = mfim_bond_hamiltonian(mc, b);
      // embed by applying the 4x4 block to identity columns
      for (std::size_t col = 0; col < dim; ++col) {
        PureState e;
        e.n_qubits = mc.L;
        e.amps = CVector::Zero(dim);
        e.amps(col) = 1.0;
        apply_two_qubit(e, h, b, (b + 1) % mc.L);
        sum.col(col) += e.amps;
      }
    }
    const CMatrix dense = mfim_dense_hamiltonian(mc);
    REQUIRE((sum - dense).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mfim trotter evolution tracks the exact propagator",
          "[statevector]") {
  MFIMConfig mc;
  mc.L = 8;
  mc.dt = 0.005;
  mc.total_time = 1.0;
  mc.gamma = 0.0;
  const MFIMSeries series =
      run_mfim_trajectory_exact(mc, Unraveling::Conventional, {1.0}, 1);
  REQUIRE(series.times.size() == std::size_t(200));
  REQUIRE(series.entropy.size() == series.times.size());

  // rebuild the trotterized state and compare with exp(-iHt)|0...0>
  PureState s = PureState::zero_state(mc.L);
  const auto odd = odd_bonds(mc.L, mc.boundary);
  for (int t = 0; t < mc.n_steps(); ++t) {
    for (int b : even_bonds(mc.L, mc.boundary))
      apply_two_qubit(s, mfim_bond_gate(mc, b), b, (b + 1) % mc.L);
    for (int b : odd)
      apply_two_qubit(s, mfim_bond_gate(mc, b), b, (b + 1) % mc.L);
  }
  const CMatrix h = mfim_dense_hamiltonian(mc);
  const CMatrix u = unitary_from_hermitian(h, mc.total_time);
  CVector exact = CVector::Zero(s.dim());
  exact(0) = 1.0;
  exact = u * exact;
  const double fidelity = std::abs((exact.adjoint() * s.amps).value());
  REQUIRE(fidelity > 0.9999);

  // trotterized energy stays near the initial value; <X> vanishes at t=0
  const double e0 = mc.J * double(mc.L - 1) + mc.hz * double(mc.L);
  const double e1 = mfim_energy(s, mc);
  REQUIRE(e1 == Catch::Approx(e0).margin(5e-3 * std::abs(e0)));
}

TEST_CASE("mfim dephasing trajectories are reproducible", "[statevector]") {
  MFIMConfig mc;
  mc.L = 6;
  mc.dt = 0.1;
  mc.total_time = 2.0;
  mc.gamma = 0.25;
  for (Unraveling mode :
       {Unraveling::Conventional, Unraveling::SpinOptimized}) {
    const MFIMSeries a =
        run_mfim_trajectory_exact(mc, mode, {1.0, 2.0}, 99, true);
    const MFIMSeries b =
        run_mfim_trajectory_exact(mc, mode, {1.0, 2.0}, 99, true);
    REQUIRE(a.outcomes == b.outcomes);
    REQUIRE(a.entropy == b.entropy);
    REQUIRE(a.outcomes.size() == std::size_t(20 * 6));
    REQUIRE(a.saturation >= 0.0);
    for (const auto& e : a.entropy) REQUIRE(e.size() == 2);
  }
}

TEST_CASE("outcome averages are unraveling independent", "[statevector]") {
  const FixedCircuit fc = sample_fixed_circuit(4, 2, Boundary::Periodic, 123);
  const ChannelSpec deph{ChannelKind::Dephasing, 0.37};
  const CMatrix ref = exact_average_dm(fc, deph);
  REQUIRE(std::abs(ref.trace().real() - 1.0) < 1e-12);

  const CMatrix conv =
      enumerate_average_dm(fc, fixed_basis_chooser(deph, Unraveling::Conventional));
  const CMatrix spin = enumerate_average_dm(
      fc, fixed_basis_chooser(deph, Unraveling::SpinOptimized));
  const CMatrix heur =
      enumerate_average_dm(fc, heuristic_basis_chooser(deph));
  REQUIRE((conv - ref).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE((spin - ref).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE((heur - ref).cwiseAbs().maxCoeff() < 1e-10);

  const ChannelSpec ad{ChannelKind::AmplitudeDamping, 0.3};
  const CMatrix ad_ref = exact_average_dm(fc, ad);
  const CMatrix ad_spin = enumerate_average_dm(
      fc, fixed_basis_chooser(ad, Unraveling::SpinOptimized));
  REQUIRE((ad_spin - ad_ref).cwiseAbs().maxCoeff() < 1e-10);

  const ChannelSpec dep{ChannelKind::Depolarizing, 0.2};
  const CMatrix dep_ref = exact_average_dm(fc, dep);
  const CMatrix dep_spin = enumerate_average_dm(
      fc, fixed_basis_chooser(dep, Unraveling::SpinOptimized));
  REQUIRE((dep_spin - dep_ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("quasi entropy against a hand-built branch sum", "[statevector]") {
  // one layer on two sites; gate placed as (i=1, j=0) so the raw 4x4 acts on
  // the amplitude index directly and the oracle can use plain matrices
  Rng rng(2718, 0);
  const CMatrix u = haar_two_qubit(rng);
  FixedCircuit fc;
  fc.L = 2;
  fc.layers = {{GateOp{1, 0, u}}};

  const ChannelSpec spec{ChannelKind::Dephasing, 0.5};
  for (const KrausSet& set :
       {conventional_kraus(spec), spin_optimized_kraus(spec)}) {
    CVector psi0 = CVector::Zero(4);
    psi0(0) = 1.0;
    const CVector evolved = u * psi0;
    const CMatrix eye = CMatrix::Identity(2, 2);
    std::vector<double> ps;
    std::vector<CMatrix> rhos;
    for (int a = 0; a < set.n_ops(); ++a) {
      for (int b = 0; b < set.n_ops(); ++b) {
        const CVector phi =
            kron(set.ops[b], eye) * (kron(eye, set.ops[a]) * evolved);
        const double p = phi.squaredNorm();
        if (p < 1e-30) continue;
        CMatrix rho_a = CMatrix::Zero(2, 2);
        for (int v1 = 0; v1 < 2; ++v1)
          for (int s0 = 0; s0 < 2; ++s0)
            for (int t0 = 0; t0 < 2; ++t0)
              rho_a(s0, t0) += phi(v1 * 2 + s0) * std::conj(phi(v1 * 2 + t0));
        rho_a /= p;
        ps.push_back(p);
        rhos.push_back(rho_a);
      }
    }
    for (double n : {0.5, 2.0}) {
      double num = 0.0, den = 0.0;
      for (std::size_t m = 0; m < ps.size(); ++m) {
        const double pn = std::pow(ps[m], n);
        double tr_n = 0.0;
        const Eigen::VectorXd ev = herm_eigenvalues(rhos[m]);
        for (Eigen::Index k = 0; k < ev.size(); ++k)
          if (ev(k) > 0.0) tr_n += std::pow(ev(k), n);
        num += pn * tr_n;
        den += pn;
      }
      const double expected = std::log(num / den) / (1.0 - n);
      REQUIRE(quasi_entropy_enumerated(fc, set, {0}, n) ==
              Catch::Approx(expected).margin(1e-11));
    }
    // n = 1 limit: plain trajectory-averaged entanglement entropy
    double s1 = 0.0;
    for (std::size_t m = 0; m < ps.size(); ++m) {
      const Eigen::VectorXd ev = herm_eigenvalues(rhos[m]);
      std::vector<double> lam(ev.data(), ev.data() + ev.size());
      for (double& x : lam) x = std::max(x, 0.0);
      s1 += ps[m] * renyi_entropy(lam, 1.0);
    }
    REQUIRE(quasi_entropy_enumerated(fc, set, {0}, 1.0) ==
            Catch::Approx(s1).margin(1e-11));
  }
}

TEST_CASE("quasi entropy depends on the unraveling basis", "[statevector]") {
  const FixedCircuit fc = sample_fixed_circuit(4, 2, Boundary::Periodic, 7);
  const ChannelSpec spec{ChannelKind::Dephasing, 0.5};
  const double conv =
      quasi_entropy_enumerated(fc, conventional_kraus(spec), {0, 1}, 2.0);
  const double spin =
      quasi_entropy_enumerated(fc, spin_optimized_kraus(spec), {0, 1}, 2.0);
  REQUIRE(std::abs(conv - spin) > 1e-6);
  REQUIRE_THROWS_AS(
      quasi_entropy_enumerated(sample_fixed_circuit(4, 4, Boundary::Periodic, 7),
                               conventional_kraus(spec), {0, 1}, 2.0),
      too_large_error);
}

TEST_CASE("local objective matches embedded outcome entropies",
          "[statevector]") {
  RucConfig cfg;
  cfg.L = 6;
  cfg.T = 2;
  cfg.p = 0.3;
  cfg.unraveling = Unraveling::Conventional;
  cfg.record_outcomes = false;
  // reconstruct the trajectory's final state
  const FixedCircuit fc = sample_fixed_circuit(cfg.L, cfg.T, cfg.boundary, 11);
  PureState s = PureState::zero_state(cfg.L);
  const ChannelSpec spec{cfg.kind, cfg.p};
  const KrausSet conv = conventional_kraus(spec);
  for (std::size_t t = 0; t < fc.layers.size(); ++t) {
    for (const GateOp& g : fc.layers[t]) apply_two_qubit(s, g.u, g.i, g.j);
    Rng orng(11, outcome_stream(t));
    for (int site = 0; site < cfg.L; ++site)
      apply_kraus_sampled(s, conv, site, orng);
  }

  const int site = 2;
  const KrausSet set = spin_optimized_kraus(spec);
  CMatrix rho = site_dm(s, site);
  rho /= rho.trace().real();
  const double local = outcome_average_entropy(set, rho);

  double global = 0.0;
  for (int a = 0; a < set.n_ops(); ++a) {
    PureState branch = s;
    apply_one_qubit(branch, set.ops[a], site);
    const double p = branch.amps.squaredNorm();
    if (p < 1e-14) continue;
    branch.amps /= std::sqrt(p);
    global += p * qubit_vn_entropy(site_dm(branch, site));
  }
  REQUIRE(global == Catch::Approx(local).margin(1e-10));
}
