#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "unravel/statevector.hpp"

namespace unravel {

// Matrix-product state in mixed-canonical form. Tensor i is stored as a
// (dl*2) x dr column-major matrix with row index l + dl*s; the same buffer
// reinterpreted as dl x (2*dr) (column index s + 2*r) exposes the right
// reshape for free. Tensors left of `center` are left-canonical, tensors to
// the right are right-canonical, and the center carries the state norm.
struct MPSState {
  int L = 0;
  int center = 0;
  std::vector<CMatrix> a;
  std::vector<std::vector<double>> spectra;  // normalized, per bond

  int dl(int i) const { return static_cast<int>(a[i].rows()) / 2; }
  int dr(int i) const { return static_cast<int>(a[i].cols()); }
  int max_bond() const {
    int m = 1;
    for (int i = 0; i + 1 < L; ++i) m = std::max(m, dr(i));
    return m;
  }
  double norm() const { return a[center].norm(); }
  void normalize() { a[center] /= a[center].norm(); }

  static MPSState product_state(int L, const std::vector<int>& bits = {}) {
    require(L >= 2, "MPSState: need at least 2 sites");
    require(bits.empty() || bits.size() == std::size_t(L),
            "MPSState: bits must match L");
    MPSState m;
    m.L = L;
    m.center = 0;
    m.a.resize(L);
    m.spectra.assign(L - 1, {1.0});
    for (int i = 0; i < L; ++i) {
      const int b = bits.empty() ? 0 : bits[i];
      require(b == 0 || b == 1, "MPSState: bits must be 0/1");
      m.a[i] = CMatrix::Zero(2, 1);
      m.a[i](b, 0) = 1.0;
    }
    return m;
  }
};

namespace detail {

// View of tensor i as dl x (2*dr); shares the storage layout by construction.
inline Eigen::Map<const CMatrix> right_view(const MPSState& m, int i) {
  return {m.a[i].data(), m.dl(i), 2 * static_cast<Eigen::Index>(m.dr(i))};
}

// Store a k x (2*dr) right-reshaped matrix back into the (k*2) x dr layout.
inline CMatrix from_right_view(const CMatrix& v) {
  const Eigen::Index k = v.rows(), dr = v.cols() / 2;
  CMatrix out(2 * k, dr);
  for (Eigen::Index r = 0; r < dr; ++r)
    for (int s = 0; s < 2; ++s)
      out.block(s * k, r, k, 1) = v.col(s + 2 * r);
  return out;
}

inline std::vector<double> normalized_squares(const Eigen::VectorXd& s,
                                              Eigen::Index k) {
  double tot = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) tot += s(i) * s(i);
  std::vector<double> lam(k);
  for (Eigen::Index i = 0; i < k; ++i) lam[i] = s(i) * s(i) / tot;
  return lam;
}

}  // namespace detail

// One orthogonalization step to the right: SVD the center, keep the unitary
// factor, push the rest into the next tensor, refresh the bond spectrum.
inline void push_center_right(MPSState& m) {
  const int i = m.center;
  require(i + 1 < m.L, "push_center_right: already at the last site");
  const SVDResult d = svd(m.a[i]);
  const Eigen::Index k = d.singular_values.size();
  m.a[i] = d.u;
  const CMatrix carry = d.singular_values.asDiagonal() * d.v.adjoint();
  m.a[i + 1] = detail::from_right_view(carry * detail::right_view(m, i + 1));
  m.spectra[i] = detail::normalized_squares(d.singular_values, k);
  m.center = i + 1;
}

inline void push_center_left(MPSState& m) {
  const int i = m.center;
  require(i > 0, "push_center_left: already at the first site");
  const CMatrix v = detail::right_view(m, i);
  const SVDResult d = svd(v);
  m.a[i] = detail::from_right_view(d.v.adjoint());
  const CMatrix carry = d.u * d.singular_values.asDiagonal();
  m.a[i - 1] = m.a[i - 1] * carry;
  m.spectra[i - 1] =
      detail::normalized_squares(d.singular_values, d.singular_values.size());
  m.center = i - 1;
}

inline void move_center_to(MPSState& m, int k) {
  require(k >= 0 && k < m.L, "move_center_to: site range");
  while (m.center < k) push_center_right(m);
  while (m.center > k) push_center_left(m);
}

struct TruncationPolicy {
  int chi_max = 0;       // 0 means unlimited
  double cutoff = 0.0;   // discard normalized weights below this
};

// Two-site gate on (i, i+1), gate index v_i * 2 + v_{i+1}. The kept spectrum
// is rescaled to preserve the state norm; returns the discarded weight. The
// center ends on i+1 (or i when leave_center_right is false).
inline double apply_two_site_gate(MPSState& m, int i, const CMatrix& g,
                                  const TruncationPolicy& pol,
                                  bool leave_center_right = true) {
  require(i >= 0 && i + 1 < m.L, "apply_two_site_gate: bond range");
  require(g.rows() == 4 && g.cols() == 4, "apply_two_site_gate: need 4x4");
  move_center_to(m, i);
  const int dl = m.dl(i), dr = m.dr(i + 1);

  // theta in block layout: row = l + dl*s_i, col = s_j*dr + r
  const CMatrix prod = m.a[i] * detail::right_view(m, i + 1);
  CMatrix theta(2 * dl, 2 * dr);
  for (int sj = 0; sj < 2; ++sj)
    for (int r = 0; r < dr; ++r) theta.col(sj * dr + r) = prod.col(sj + 2 * r);

  CMatrix rotated = CMatrix::Zero(2 * dl, 2 * dr);
  for (int si = 0; si < 2; ++si)
    for (int sj = 0; sj < 2; ++sj)
      for (int ti = 0; ti < 2; ++ti)
        for (int tj = 0; tj < 2; ++tj) {
          const cplx coef = g(si * 2 + sj, ti * 2 + tj);
          if (coef == cplx(0.0)) continue;
          rotated.block(si * dl, sj * dr, dl, dr) +=
              coef * theta.block(ti * dl, tj * dr, dl, dr);
        }

  const SVDResult d = svd(rotated);
  const Eigen::Index kfull = d.singular_values.size();
  double total = 0.0;
  for (Eigen::Index t = 0; t < kfull; ++t)
    total += d.singular_values(t) * d.singular_values(t);

  Eigen::Index k = kfull;
  if (pol.cutoff > 0.0) {
    while (k > 1) {
      const double w =
          d.singular_values(k - 1) * d.singular_values(k - 1) / total;
      if (w >= pol.cutoff) break;
      --k;
    }
  }
  if (pol.chi_max > 0) k = std::min<Eigen::Index>(k, pol.chi_max);
  double kept = 0.0;
  for (Eigen::Index t = 0; t < k; ++t)
    kept += d.singular_values(t) * d.singular_values(t);
  const double discarded = 1.0 - kept / total;

  // rescale so the state keeps its norm
  Eigen::VectorXd s = d.singular_values.head(k) * std::sqrt(total / kept);
  const CMatrix u = d.u.leftCols(k);
  const CMatrix vt = d.v.leftCols(k).adjoint();  // k x (2*dr), block layout

  auto pack_right = [&](const CMatrix& w) {
    CMatrix out(2 * k, dr);
    for (int sj = 0; sj < 2; ++sj)
      out.middleRows(sj * k, k) = w.middleCols(sj * dr, dr);
    return out;
  };
  if (leave_center_right) {
    m.a[i] = u;
    m.a[i + 1] = pack_right(s.asDiagonal() * vt);
    m.center = i + 1;
  } else {
    m.a[i] = u * s.asDiagonal();
    m.a[i + 1] = pack_right(vt);
    m.center = i;
  }
  m.spectra[i] = detail::normalized_squares(s, k);
  return discarded;
}

// Local density matrix of the center site: rho(s, s') = <A_{s'}, A_s>_F.
inline CMatrix mps_site_dm(const MPSState& m) {
  const int i = m.center;
  const int dl = m.dl(i);
  CMatrix rho(2, 2);
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 2; ++t)
      rho(s, t) = (m.a[i].middleRows(t * dl, dl).conjugate().cwiseProduct(
                       m.a[i].middleRows(s * dl, dl)))
                      .sum();
  return rho;
}

// Born sampling of one channel application at `site`; mirrors the dense
// engine draw-for-draw (one uniform variate per call).
inline int apply_kraus_site_sampled(MPSState& m, const KrausSet& set, int site,
                                    Rng& rng) {
  require(set.dim == 2, "apply_kraus_site_sampled: qubit channels only");
  move_center_to(m, site);
  const CMatrix rho = mps_site_dm(m);
  std::vector<double> w(set.n_ops());
  double total = 0.0;
  for (int a = 0; a < set.n_ops(); ++a) {
    const CMatrix& k = set.ops[a];
    w[a] = std::max(0.0, (k * rho * k.adjoint()).trace().real());
    total += w[a];
  }
  if (total < 1e-14)
    throw degenerate_state_error("apply_kraus_site_sampled: outcomes vanish");
  const int alpha = pick_categorical(w, rng.next_double());

  const int dl = m.dl(site);
  const CMatrix& k = set.ops[alpha];
  CMatrix next(m.a[site].rows(), m.a[site].cols());
  for (int s = 0; s < 2; ++s)
    next.middleRows(s * dl, dl) = k(s, 0) * m.a[site].middleRows(0, dl) +
                                  k(s, 1) * m.a[site].middleRows(dl, dl);
  const double nn = next.norm();
  if (nn < 1e-14)
    throw degenerate_state_error("apply_kraus_site_sampled: zero branch");
  m.a[site] = next / nn;
  return alpha;
}

// Heuristic-aware channel application with the shared draw contract.
inline int apply_unraveled_channel_mps(MPSState& m, const ChannelSpec& spec,
                                       Unraveling mode, int site,
                                       Rng& outcome_rng) {
  switch (mode) {
    case Unraveling::Conventional:
      return apply_kraus_site_sampled(m, conventional_kraus(spec), site,
                                      outcome_rng);
    case Unraveling::SpinOptimized:
      return apply_kraus_site_sampled(m, spin_optimized_kraus(spec), site,
                                      outcome_rng);
    case Unraveling::Heuristic: {
      const std::uint64_t hseed = outcome_rng.next_u64();
      move_center_to(m, site);
      CMatrix rho = mps_site_dm(m);
      rho /= rho.trace().real();
      const KrausSet set = heuristic_kraus(spec, rho, hseed);
      return apply_kraus_site_sampled(m, set, site, outcome_rng);
    }
  }
  throw std::logic_error("apply_unraveled_channel_mps: bad mode");
}

// Schmidt spectrum across the half-chain cut (bond L/2-1 | L/2), refreshed by
// an SVD of the center tensor.
inline std::vector<double> half_chain_spectrum(MPSState& m) {
  const int cut = m.L / 2 - 1;
  move_center_to(m, cut);
  const SVDResult d = svd(m.a[cut]);
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.singular_values.size(); ++i)
    total += d.singular_values(i) * d.singular_values(i);
  std::vector<double> lam(d.singular_values.size());
  for (std::size_t i = 0; i < lam.size(); ++i)
    lam[i] = d.singular_values(i) * d.singular_values(i) / total;
  return lam;
}

inline PureState to_statevector(const MPSState& m) {
  require(m.L <= 14, "to_statevector: L too large");
  PureState s;
  s.n_qubits = m.L;
  CMatrix v = m.a[0];  // (2^1) x dr with row = s_0
  for (int i = 1; i < m.L; ++i) {
    const Eigen::Index rows = v.rows();
    const int dl = m.dl(i), dr = m.dr(i);
    CMatrix next(rows * 2, dr);
    for (int s_i = 0; s_i < 2; ++s_i)
      next.middleRows(s_i * rows, rows) = v * m.a[i].middleRows(s_i * dl, dl);
    v = std::move(next);
  }
  s.amps = v.col(0);
  return s;
}

// ---------------------------------------------------------------------------
// MFIM trajectories on the MPS engine. Identical Trotter sequence, channel
// sweep order, and random-number contract as the dense runner, so outcomes
// agree draw-for-draw whenever truncation is negligible.
inline MFIMSeries run_mfim_mps_trajectory(const MFIMConfig& mc,
                                          Unraveling mode,
                                          const std::vector<double>& renyi,
                                          std::uint64_t seed,
                                          const TruncationPolicy& pol,
                                          bool record_outcomes = false) {
  mc.validate();
  require(mc.boundary == Boundary::Open,
          "run_mfim_mps_trajectory: open boundaries only");
  require(!renyi.empty(), "run_mfim_mps_trajectory: need Renyi indices");
  const auto t0 = std::chrono::steady_clock::now();

  const auto evens = even_bonds(mc.L, mc.boundary);
  const auto odds = odd_bonds(mc.L, mc.boundary);
  std::vector<CMatrix> bond_gate(mc.L);
  for (int b : evens) bond_gate[b] = mfim_bond_gate(mc, b);
  for (int b : odds) bond_gate[b] = mfim_bond_gate(mc, b);

  const ChannelSpec spec{ChannelKind::Dephasing, mc.channel_p()};
  MPSState m = MPSState::product_state(mc.L);
  MFIMSeries out;
  out.seed = seed;
  out.renyi_indices = renyi;
  const int steps = mc.n_steps();
  for (int t = 0; t < steps; ++t) {
    double disc = 0.0;
    for (int b : evens) disc += apply_two_site_gate(m, b, bond_gate[b], pol);
    for (int b : odds) disc += apply_two_site_gate(m, b, bond_gate[b], pol);
    if (spec.p > 0.0) {
      Rng orng(seed, outcome_stream(static_cast<std::uint64_t>(t)));
      for (int site = 0; site < mc.L; ++site) {
        const int alpha =
            apply_unraveled_channel_mps(m, spec, mode, site, orng);
        if (record_outcomes) out.outcomes.push_back({t, site, alpha});
      }
    }
    out.times.push_back((t + 1) * mc.dt);
    const auto spectrum = half_chain_spectrum(m);
    std::vector<double> ent;
    ent.reserve(renyi.size());
    for (double n : renyi) ent.push_back(renyi_entropy(spectrum, n));
    out.entropy.push_back(std::move(ent));
    out.discarded.push_back(disc);
    out.chi.push_back(m.max_bond());
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

}  // namespace unravel
