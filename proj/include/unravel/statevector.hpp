#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "unravel/analysis.hpp"
#include "unravel/channels.hpp"
#include "unravel/heuristic.hpp"
#include "unravel/linalg.hpp"
#include "unravel/mfim.hpp"
#include "unravel/rng.hpp"

namespace unravel {

// Dense trajectory wavefunction. Site i owns bit i of the amplitude index.
struct PureState {
  int n_qubits = 0;
  CVector amps;

  static PureState zero_state(int L) {
    require(L >= 1 && L <= 26, "PureState: 1 <= L <= 26");
    PureState s;
    s.n_qubits = L;
    s.amps = CVector::Zero(std::size_t{1} << L);
    s.amps(0) = 1.0;
    return s;
  }

  std::size_t dim() const { return static_cast<std::size_t>(amps.size()); }
  double norm() const { return amps.norm(); }
  void normalize() { amps /= amps.norm(); }
};

inline void apply_one_qubit(PureState& s, const CMatrix& m, int site) {
  require(site >= 0 && site < s.n_qubits, "apply_one_qubit: site range");
  require(m.rows() == 2 && m.cols() == 2, "apply_one_qubit: need 2x2");
  const std::size_t bit = std::size_t{1} << site;
  const cplx m00 = m(0, 0), m01 = m(0, 1), m10 = m(1, 0), m11 = m(1, 1);
  cplx* a = s.amps.data();
  const std::size_t dim = s.dim();
  if (m01 == cplx(0.0) && m10 == cplx(0.0)) {
    for (std::size_t i = 0; i < dim; ++i) a[i] *= (i & bit) ? m11 : m00;
    return;
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (i & bit) continue;
    const cplx a0 = a[i], a1 = a[i | bit];
    a[i] = m00 * a0 + m01 * a1;
    a[i | bit] = m10 * a0 + m11 * a1;
  }
}

// Gate basis convention: row/column index of the 4x4 matrix is v_i * 2 + v_j.
inline void apply_two_qubit(PureState& s, const CMatrix& u, int i, int j) {
  require(i != j, "apply_two_qubit: sites must differ");
  require(i >= 0 && i < s.n_qubits && j >= 0 && j < s.n_qubits,
          "apply_two_qubit: site range");
  require(u.rows() == 4 && u.cols() == 4, "apply_two_qubit: need 4x4");
  const std::size_t bi = std::size_t{1} << i, bj = std::size_t{1} << j;
  cplx m[4][4];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m[r][c] = u(r, c);
  cplx* a = s.amps.data();
  const std::size_t dim = s.dim();
  for (std::size_t b = 0; b < dim; ++b) {
    if ((b & bi) || (b & bj)) continue;
    const std::size_t idx[4] = {b, b | bj, b | bi, b | bi | bj};
    cplx in[4], out[4];
    for (int k = 0; k < 4; ++k) in[k] = a[idx[k]];
    for (int r = 0; r < 4; ++r)
      out[r] = m[r][0] * in[0] + m[r][1] * in[1] + m[r][2] * in[2] +
               m[r][3] * in[3];
    for (int k = 0; k < 4; ++k) a[idx[k]] = out[k];
  }
}

// 2x2 reduced density matrix of one site (state need not be normalized).
inline CMatrix site_dm(const PureState& s, int site) {
  const std::size_t bit = std::size_t{1} << site;
  const cplx* a = s.amps.data();
  double r00 = 0.0, r11 = 0.0;
  cplx r01 = 0.0;
  for (std::size_t i = 0; i < s.dim(); ++i) {
    if (i & bit) continue;
    const cplx a0 = a[i], a1 = a[i | bit];
    r00 += std::norm(a0);
    r11 += std::norm(a1);
    r01 += a0 * std::conj(a1);
  }
  CMatrix rho(2, 2);
  rho << r00, r01, std::conj(r01), r11;
  return rho;
}

namespace detail {

// Amplitudes rearranged into a (2^k x 2^(L-k)) matrix: row = bits of `sites`,
// column = bits of the complement.
inline CMatrix gather_block(const PureState& s, const std::vector<int>& sites) {
  const int L = s.n_qubits;
  const int k = static_cast<int>(sites.size());
  std::vector<int> comp;
  comp.reserve(L - k);
  std::vector<char> in_a(L, 0);
  for (int q : sites) {
    require(q >= 0 && q < L, "gather_block: site range");
    require(!in_a[q], "gather_block: duplicate site");
    in_a[q] = 1;
  }
  for (int q = 0; q < L; ++q)
    if (!in_a[q]) comp.push_back(q);
  CMatrix v(std::size_t{1} << k, std::size_t{1} << (L - k));
  for (std::size_t b = 0; b < s.dim(); ++b) {
    std::size_t r = 0, c = 0;
    for (int t = 0; t < k; ++t) r |= ((b >> sites[t]) & 1u) << t;
    for (int t = 0; t < L - k; ++t) c |= ((b >> comp[t]) & 1u) << t;
    v(r, c) = s.amps(b);
  }
  return v;
}

}  // namespace detail

// Partial trace over the complement of `sites` (at most 13 sites kept).
inline CMatrix reduced_dm(const PureState& s, const std::vector<int>& sites) {
  require(!sites.empty() && sites.size() <= 13,
          "reduced_dm: keep between 1 and 13 sites");
  const CMatrix v = detail::gather_block(s, sites);
  return v * v.adjoint();
}

// Spectrum of the reduced density matrix on `sites`, from the singular
// values of the amplitude block (cheaper and more stable than forming rho).
inline std::vector<double> block_spectrum(const PureState& s,
                                          const std::vector<int>& sites) {
  const CMatrix v = detail::gather_block(s, sites);
  const SVDResult d = svd(v);
  std::vector<double> lam(d.singular_values.size());
  for (std::size_t i = 0; i < lam.size(); ++i)
    lam[i] = d.singular_values[i] * d.singular_values[i];
  return lam;
}

inline double block_entropy(const PureState& s, const std::vector<int>& sites,
                            double n) {
  return renyi_entropy(block_spectrum(s, sites), n);
}

inline CMatrix haar_two_qubit(Rng& rng) { return haar_unitary(4, rng); }

// Born-rule sampling of one channel application; the state is collapsed and
// renormalized, the drawn index returned. Exactly one uniform variate is
// consumed per call.
inline int apply_kraus_sampled(PureState& s, const KrausSet& set, int site,
                               Rng& rng) {
  require(set.dim == 2, "apply_kraus_sampled: qubit channels only");
  const CMatrix rho = site_dm(s, site);
  std::vector<double> w(set.n_ops());
  double total = 0.0;
  for (int a = 0; a < set.n_ops(); ++a) {
    const CMatrix& k = set.ops[a];
    w[a] = std::max(0.0, (k * rho * k.adjoint()).trace().real());
    total += w[a];
  }
  if (total < 1e-14)
    throw degenerate_state_error("apply_kraus_sampled: all outcomes vanish");
  const int alpha = pick_categorical(w, rng.next_double());
  apply_one_qubit(s, set.ops[alpha], site);
  const double nn = s.norm();
  if (nn < 1e-14)
    throw degenerate_state_error("apply_kraus_sampled: collapsed to zero");
  s.amps /= nn;
  return alpha;
}

// ---------------------------------------------------------------------------
// Circuits.

struct GateOp {
  int i = 0, j = 0;
  CMatrix u;
};

struct FixedCircuit {
  int L = 0;
  Boundary boundary = Boundary::Periodic;
  std::vector<std::vector<GateOp>> layers;
};

// Brick-layer circuit: even layers couple bonds (0,1),(2,3),...; odd layers
// couple (1,2),(3,4),... plus the periodic wrap bond (L-1,0). Gates for layer
// t are drawn from circuit stream 2t of the given seed.
inline FixedCircuit sample_fixed_circuit(int L, int T, Boundary boundary,
                                         std::uint64_t seed) {
  require(L >= 2 && L % 2 == 0, "sample_fixed_circuit: L must be even");
  require(T >= 1, "sample_fixed_circuit: need at least one layer");
  FixedCircuit fc;
  fc.L = L;
  fc.boundary = boundary;
  fc.layers.resize(T);
  for (int t = 0; t < T; ++t) {
    Rng rng(seed, circuit_stream(static_cast<std::uint64_t>(t)));
    const std::vector<int> bonds = (t % 2 == 0)
                                       ? even_bonds(L, boundary)
                                       : odd_bonds(L, boundary);
    for (int b : bonds)
      fc.layers[t].push_back(GateOp{b, (b + 1) % L, haar_two_qubit(rng)});
  }
  return fc;
}

// ---------------------------------------------------------------------------
// Unraveled channel application shared by the trajectory drivers.

// Heuristic mode consumes one extra 64-bit draw (the optimizer seed) before
// the outcome draw; fixed-basis modes consume only the outcome draw.
inline int apply_unraveled_channel(PureState& s, const ChannelSpec& spec,
                                   Unraveling mode, int site,
                                   Rng& outcome_rng) {
  switch (mode) {
    case Unraveling::Conventional:
      return apply_kraus_sampled(s, conventional_kraus(spec), site,
                                 outcome_rng);
    case Unraveling::SpinOptimized:
      return apply_kraus_sampled(s, spin_optimized_kraus(spec), site,
                                 outcome_rng);
    case Unraveling::Heuristic: {
      const std::uint64_t hseed = outcome_rng.next_u64();
      CMatrix rho = site_dm(s, site);
      rho /= rho.trace().real();
      const KrausSet set = heuristic_kraus(spec, rho, hseed);
      return apply_kraus_sampled(s, set, site, outcome_rng);
    }
  }
  throw std::logic_error("apply_unraveled_channel: bad mode");
}

// ---------------------------------------------------------------------------
// Random-circuit trajectories.

struct RucConfig {
  int L = 8;
  int T = 0;  // 0 means the default depth 4L
  double p = 0.1;
  ChannelKind kind = ChannelKind::Dephasing;
  Unraveling unraveling = Unraveling::Conventional;
  Boundary boundary = Boundary::Periodic;
  std::vector<double> renyi_indices = {1.0};
  bool record_outcomes = true;

  int layers() const { return T > 0 ? T : 4 * L; }
  void validate() const {
    require(L >= 2 && L % 2 == 0 && L <= 26, "ruc: L must be even, <= 26");
    require(p >= 0.0 && p <= 1.0, "ruc: p in [0,1]");
    require(!renyi_indices.empty(), "ruc: need at least one Renyi index");
  }
};

struct OutcomeEvent {
  int step = 0;
  int site = 0;
  int alpha = 0;
  friend bool operator==(const OutcomeEvent&, const OutcomeEvent&) = default;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::vector<OutcomeEvent> outcomes;
  std::vector<double> renyi_indices;
  std::vector<double> half_chain;  // final-state entropy per index
  std::vector<double> i3;          // per index; empty unless L % 4 == 0
  double wall_time_s = 0.0;
};

inline std::vector<int> contiguous_sites(int lo, int hi) {
  std::vector<int> v;
  for (int q = lo; q < hi; ++q) v.push_back(q);
  return v;
}

// I3 over contiguous quarters A,B,C (D implied). Pure state, so S_ABC = S_D.
inline std::vector<double> i3_from_state(const PureState& s,
                                         const std::vector<double>& indices) {
  const int L = s.n_qubits;
  require(L % 4 == 0, "i3_from_state: L must be divisible by 4");
  const int q = L / 4;
  const auto A = contiguous_sites(0, q), B = contiguous_sites(q, 2 * q),
             C = contiguous_sites(2 * q, 3 * q),
             D = contiguous_sites(3 * q, L);
  auto AB = contiguous_sites(0, 2 * q);
  auto BC = contiguous_sites(q, 3 * q);
  std::vector<int> AC = A;
  AC.insert(AC.end(), C.begin(), C.end());
  const std::vector<std::vector<int>> blocks = {A, B, C, AB, AC, BC, D};
  std::vector<std::vector<double>> spectra;
  spectra.reserve(blocks.size());
  for (const auto& blk : blocks) spectra.push_back(block_spectrum(s, blk));
  std::vector<double> out;
  out.reserve(indices.size());
  for (double n : indices) {
    double e[7];
    for (int k = 0; k < 7; ++k) e[k] = renyi_entropy(spectra[k], n);
    out.push_back(tripartite_i3(e[0], e[1], e[2], e[3], e[4], e[5], e[6]));
  }
  return out;
}

// Run one trajectory over an explicit circuit; channel randomness comes from
// the per-layer outcome streams of `seed`.
inline TrajectoryRecord run_trajectory_fixed(const FixedCircuit& fc,
                                             const ChannelSpec& spec,
                                             Unraveling mode,
                                             const std::vector<double>& renyi,
                                             std::uint64_t seed,
                                             bool record_outcomes = true,
                                             bool want_i3 = true) {
  const auto t0 = std::chrono::steady_clock::now();
  PureState s = PureState::zero_state(fc.L);
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.renyi_indices = renyi;
  for (std::size_t t = 0; t < fc.layers.size(); ++t) {
    for (const GateOp& g : fc.layers[t]) apply_two_qubit(s, g.u, g.i, g.j);
    Rng orng(seed, outcome_stream(t));
    for (int site = 0; site < fc.L; ++site) {
      const int alpha = apply_unraveled_channel(s, spec, mode, site, orng);
      if (record_outcomes)
        rec.outcomes.push_back({static_cast<int>(t), site, alpha});
    }
  }
  const auto half = contiguous_sites(0, fc.L / 2);
  const auto spectrum = block_spectrum(s, half);
  for (double n : renyi) rec.half_chain.push_back(renyi_entropy(spectrum, n));
  if (want_i3 && fc.L % 4 == 0) rec.i3 = i3_from_state(s, renyi);
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

// Fresh random circuit per trajectory: gates from the circuit streams, then
// the standard fixed-circuit run.
inline TrajectoryRecord run_ruc_trajectory(const RucConfig& cfg,
                                           std::uint64_t seed,
                                           bool want_i3 = true) {
  cfg.validate();
  const FixedCircuit fc =
      sample_fixed_circuit(cfg.L, cfg.layers(), cfg.boundary, seed);
  return run_trajectory_fixed(fc, ChannelSpec{cfg.kind, cfg.p},
                              cfg.unraveling, cfg.renyi_indices, seed,
                              cfg.record_outcomes, want_i3);
}

// ---------------------------------------------------------------------------
// Dense MFIM trajectories (same Trotter sequence as the MPS engine).

struct MFIMSeries {
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<double> renyi_indices;
  std::vector<std::vector<double>> entropy;  // [step][index slot], half chain
  std::vector<double> discarded;             // per step (zero for dense runs)
  std::vector<int> chi;  // half-chain Schmidt rank / max MPS bond, per step
  std::vector<OutcomeEvent> outcomes;
  double saturation = 0.0;
  double wall_time_s = 0.0;
};

// Relative change of the time-averaged series between the last two quarters.
inline double saturation_metric(const std::vector<double>& series) {
  const int n = static_cast<int>(series.size());
  if (n < 4) return 1.0;
  auto avg = [&](int lo, int hi) {
    double m = 0.0;
    for (int i = lo; i < hi; ++i) m += series[i];
    return m / std::max(1, hi - lo);
  };
  const double q3 = avg(n / 2, 3 * n / 4);
  const double q4 = avg(3 * n / 4, n);
  return std::abs(q4 - q3) / std::max(std::abs(q3), 1e-12);
}

inline MFIMSeries run_mfim_trajectory_exact(
    const MFIMConfig& mc, Unraveling mode, const std::vector<double>& renyi,
    std::uint64_t seed, bool record_outcomes = false) {
  mc.validate();
  require(mc.L <= 24, "run_mfim_trajectory_exact: dense engine caps at L=24");
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<CMatrix> bond_gate(mc.L);
  const auto evens = even_bonds(mc.L, mc.boundary);
  const auto odds = odd_bonds(mc.L, mc.boundary);
  for (int b : evens) bond_gate[b] = mfim_bond_gate(mc, b);
  for (int b : odds) bond_gate[b] = mfim_bond_gate(mc, b);

  const ChannelSpec spec{ChannelKind::Dephasing, mc.channel_p()};
  PureState s = PureState::zero_state(mc.L);
  MFIMSeries out;
  out.seed = seed;
  out.renyi_indices = renyi;
  const auto half = contiguous_sites(0, mc.L / 2);
  const int steps = mc.n_steps();
  for (int t = 0; t < steps; ++t) {
    for (int b : evens) apply_two_qubit(s, bond_gate[b], b, (b + 1) % mc.L);
    for (int b : odds) apply_two_qubit(s, bond_gate[b], b, (b + 1) % mc.L);
    if (spec.p > 0.0) {
      Rng orng(seed, outcome_stream(static_cast<std::uint64_t>(t)));
      for (int site = 0; site < mc.L; ++site) {
        const int alpha = apply_unraveled_channel(s, spec, mode, site, orng);
        if (record_outcomes) out.outcomes.push_back({t, site, alpha});
      }
    }
    out.times.push_back((t + 1) * mc.dt);
    const auto spectrum = block_spectrum(s, half);
    std::vector<double> ent;
    ent.reserve(renyi.size());
    for (double n : renyi) ent.push_back(renyi_entropy(spectrum, n));
    out.entropy.push_back(std::move(ent));
    out.discarded.push_back(0.0);
    int rank = 0;
    for (double lam : spectrum)
      if (lam > 1e-12) ++rank;
    out.chi.push_back(rank);
  }
  std::vector<double> lead;
  lead.reserve(out.entropy.size());
  for (const auto& e : out.entropy) lead.push_back(e[0]);
  out.saturation = saturation_metric(lead);
  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

// Expectation value <psi|H|psi> against the dense MFIM Hamiltonian.
inline double mfim_energy(const PureState& s, const MFIMConfig& mc) {
  const CMatrix h = mfim_dense_hamiltonian(mc);
  return (s.amps.adjoint() * h * s.amps).value().real() / s.amps.squaredNorm();
}

// ---------------------------------------------------------------------------
// Exhaustive outcome enumeration at tiny sizes.

// Per-application basis chooser: receives the (unnormalized) branch state,
// the step, and the site; returns the Kraus set to apply there.
using BasisChooser =
    std::function<KrausSet(const PureState&, int step, int site)>;

inline BasisChooser fixed_basis_chooser(const ChannelSpec& spec,
                                        Unraveling mode) {
  require(mode != Unraveling::Heuristic,
          "fixed_basis_chooser: heuristic needs heuristic_basis_chooser");
  const KrausSet set = mode == Unraveling::Conventional
                           ? conventional_kraus(spec)
                           : spin_optimized_kraus(spec);
  return [set](const PureState&, int, int) { return set; };
}

// Adaptive chooser used when enumerating the heuristic unraveling: the basis
// at each tree node follows from that branch's own reduced density matrix.
inline BasisChooser heuristic_basis_chooser(const ChannelSpec& spec) {
  return [spec](const PureState& s, int, int site) {
    CMatrix rho = site_dm(s, site);
    const double tr = rho.trace().real();
    if (tr < 1e-30) return minimal_kraus(spec);
    rho /= tr;
    return heuristic_kraus(spec, rho, 0);
  };
}

namespace detail {

struct EnumAccumulator {
  CMatrix rho;
  CMatrix batch;
  int filled = 0;
  explicit EnumAccumulator(std::size_t dim)
      : rho(CMatrix::Zero(dim, dim)), batch(CMatrix(dim, 256)) {}
  void push(const CVector& leaf) {
    batch.col(filled++) = leaf;
    if (filled == batch.cols()) flush();
  }
  void flush() {
    if (filled == 0) return;
    rho.noalias() += batch.leftCols(filled) * batch.leftCols(filled).adjoint();
    filled = 0;
  }
};

inline void enumerate_rec(const FixedCircuit& fc, const BasisChooser& choose,
                          PureState& s, int step, int site,
                          EnumAccumulator& acc) {
  if (step == static_cast<int>(fc.layers.size())) {
    acc.push(s.amps);
    return;
  }
  if (site == 0)
    for (const GateOp& g : fc.layers[step]) apply_two_qubit(s, g.u, g.i, g.j);
  if (site == fc.L) {
    enumerate_rec(fc, choose, s, step + 1, 0, acc);
    return;
  }
  if (s.amps.squaredNorm() < 1e-28) return;  // dead branch, weight ~ 0
  const KrausSet set = choose(s, step, site);
  for (int a = 0; a < set.n_ops(); ++a) {
    PureState child = s;
    apply_one_qubit(child, set.ops[a], site);
    enumerate_rec(fc, choose, child, step, site + 1, acc);
  }
}

}  // namespace detail

// Outcome-averaged density matrix Σ_m p_m ρ_m over every outcome string of
// the circuit, computed without sampling. Branch states stay unnormalized so
// each leaf contributes p_m ρ_m as an outer product.
inline CMatrix enumerate_average_dm(const FixedCircuit& fc,
                                    const BasisChooser& choose,
                                    int max_applications = 24) {
  const long apps =
      static_cast<long>(fc.layers.size()) * static_cast<long>(fc.L);
  if (apps > max_applications)
    throw too_large_error("enumerate_average_dm: too many channel uses");
  PureState s = PureState::zero_state(fc.L);
  detail::EnumAccumulator acc(s.dim());
  detail::enumerate_rec(fc, choose, s, 0, 0, acc);
  acc.flush();
  return acc.rho;
}

// Reference average: evolve the full density matrix with gates and exact
// channel applications (no unraveling at all).
inline CMatrix exact_average_dm(const FixedCircuit& fc,
                                const ChannelSpec& spec) {
  const std::size_t dim = std::size_t{1} << fc.L;
  require(fc.L <= 12, "exact_average_dm: L too large for a dense matrix");
  CMatrix rho = CMatrix::Zero(dim, dim);
  rho(0, 0) = 1.0;
  const KrausSet set = minimal_kraus(spec);

  auto apply_gate_cols = [&](CMatrix& m, const CMatrix& u, int i, int j) {
    PureState tmp;
    tmp.n_qubits = fc.L;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      tmp.amps = m.col(c);
      apply_two_qubit(tmp, u, i, j);
      m.col(c) = tmp.amps;
    }
  };
  auto apply_op_cols = [&](CMatrix& m, const CMatrix& k, int site) {
    PureState tmp;
    tmp.n_qubits = fc.L;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      tmp.amps = m.col(c);
      apply_one_qubit(tmp, k, site);
      m.col(c) = tmp.amps;
    }
  };

  for (const auto& layer : fc.layers) {
    for (const GateOp& g : layer) {
      apply_gate_cols(rho, g.u, g.i, g.j);  // U rho
      CMatrix adj = rho.adjoint();          // (U rho)^dag
      apply_gate_cols(adj, g.u, g.i, g.j);  // U rho^dag U^dag ... transposed
      rho = adj.adjoint();                  // U rho U^dag
    }
    for (int site = 0; site < fc.L; ++site) {
      CMatrix acc = CMatrix::Zero(dim, dim);
      for (const auto& k : set.ops) {
        CMatrix term = rho;
        apply_op_cols(term, k, site);
        CMatrix adj = term.adjoint();
        apply_op_cols(adj, k, site);
        acc += adj.adjoint();
      }
      rho = std::move(acc);
    }
  }
  return rho;
}

// Exact quasi-entropy of one circuit realization by full outcome enumeration:
// weights p_m^n over the 2^#applications outcome strings,
// value = log(Σ p^n tr ρ_A^n / Σ p^n) / (1-n), and the n→1 limit
// Σ p S_vN(ρ_A). The same Kraus set is applied at every site and step.
inline double quasi_entropy_enumerated(const FixedCircuit& fc,
                                       const KrausSet& set,
                                       const std::vector<int>& sites_a,
                                       double n) {
  const long apps =
      static_cast<long>(fc.layers.size()) * static_cast<long>(fc.L);
  if (apps > 12)
    throw too_large_error("quasi_entropy_enumerated: more than 12 uses");
  require(n > 0.0 && !std::isinf(n), "quasi_entropy_enumerated: finite n>0");

  double num = 0.0, den = 0.0;
  std::function<void(PureState&, int, int)> rec = [&](PureState& s, int step,
                                                      int site) {
    if (step == static_cast<int>(fc.layers.size())) {
      const double p = s.amps.squaredNorm();
      if (p < 1e-30) return;
      PureState leaf = s;
      leaf.amps /= std::sqrt(p);
      const auto lam = block_spectrum(leaf, sites_a);
      const double pn = std::abs(n - 1.0) < 1e-12 ? p : std::pow(p, n);
      if (std::abs(n - 1.0) < 1e-12) {
        num += pn * renyi_entropy(lam, 1.0);
      } else {
        double tr_n = 0.0;
        for (double x : lam)
          if (x > 0.0) tr_n += std::pow(x, n);
        num += pn * tr_n;
      }
      den += pn;
      return;
    }
    if (site == 0)
      for (const GateOp& g : fc.layers[step])
        apply_two_qubit(s, g.u, g.i, g.j);
    if (site == fc.L) {
      rec(s, step + 1, 0);
      return;
    }
    for (int a = 0; a < set.n_ops(); ++a) {
      PureState child = s;
      apply_one_qubit(child, set.ops[a], site);
      rec(child, step, site + 1);
    }
  };
  PureState s0 = PureState::zero_state(fc.L);
  rec(s0, 0, 0);
  if (std::abs(n - 1.0) < 1e-12) return num / den;
  return std::log(num / den) / (1.0 - n);
}

}  // namespace unravel
