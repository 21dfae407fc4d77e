#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "unravel/channels.hpp"
#include "unravel/linalg.hpp"

namespace unravel {

// Mixed-field Ising chain H = -sum Z_i Z_{i+1} + 1.05 sum X_i - 0.5 sum Z_i
// evolved in Trotterized steps with per-site dephasing of rate gamma.
struct MFIMConfig {
  int L = 8;
  double dt = 0.05;
  double gamma = 0.0;
  double total_time = 1.0;
  double J = -1.0;
  double hx = 1.05;
  double hz = -0.5;
  Boundary boundary = Boundary::Open;

  int n_steps() const {
    return static_cast<int>(std::llround(total_time / dt));
  }
  double channel_p() const { return 2.0 * gamma * dt; }
  void validate() const {
    require(L >= 2, "mfim: L must be at least 2");
    require(dt > 0.0, "mfim: dt must be positive");
    require(gamma >= 0.0, "mfim: gamma must be non-negative");
    require(channel_p() <= 1.0, "mfim: 2*gamma*dt must not exceed 1");
  }
};

// Number of bonds touching a site; field terms are split across bonds with
// 1/degree weights so that summing all bond Hamiltonians rebuilds H exactly.
inline int site_degree(const MFIMConfig& c, int site) {
  if (c.boundary == Boundary::Periodic) return 2;
  return (site == 0 || site == c.L - 1) ? 1 : 2;
}

// 4x4 Hermitian generator of the bond (i, i+1 mod L).
inline CMatrix mfim_bond_hamiltonian(const MFIMConfig& c, int i) {
  const int j = (i + 1) % c.L;
  const CMatrix id = pauli::I(), x = pauli::X(), z = pauli::Z();
  CMatrix h = c.J * kron(z, z);
  h += (c.hx / site_degree(c, i)) * kron(x, id);
  h += (c.hx / site_degree(c, j)) * kron(id, x);
  h += (c.hz / site_degree(c, i)) * kron(z, id);
  h += (c.hz / site_degree(c, j)) * kron(id, z);
  return h;
}

// exp(-i h_bond dt).
inline CMatrix mfim_bond_gate(const MFIMConfig& c, int i) {
  return unitary_from_hermitian(mfim_bond_hamiltonian(c, i), c.dt);
}

// Bond index lists for one Trotter step: even bonds then odd bonds. Open
// chains never wrap; periodic chains place the wrap bond (L-1, 0) at the end
// of the odd sweep. Gates are applied sequentially, so the odd-L case (where
// the wrap shares a site with the last odd bond) is still a valid splitting.
inline std::vector<int> even_bonds(int L, Boundary b) {
  std::vector<int> out;
  for (int i = 0; i + 1 < L; i += 2) out.push_back(i);
  (void)b;
  return out;
}
inline std::vector<int> odd_bonds(int L, Boundary b) {
  std::vector<int> out;
  for (int i = 1; i + 1 < L; i += 2) out.push_back(i);
  if (b == Boundary::Periodic) out.push_back(L - 1);
  return out;
}

// First-order pair {(1 - gamma dt / 2) I, sqrt(gamma dt) Z}. Complete only to
// O(dt^2); kept as a reference object for step-error studies, never used for
// evolution.
inline KrausSet first_order_dephasing_pair(double gamma, double dt) {
  KrausSet set;
  set.dim = 2;
  set.ops = {(1.0 - 0.5 * gamma * dt) * pauli::I(), std::sqrt(gamma * dt) * pauli::Z()};
  return set;
}

// Dense 2^L x 2^L Hamiltonian, for small-L oracles.
inline CMatrix mfim_dense_hamiltonian(const MFIMConfig& c) {
  require(c.L <= 12, "mfim_dense_hamiltonian: L too large for a dense matrix");
  const std::size_t dim = std::size_t{1} << c.L;
  CMatrix h = CMatrix::Zero(dim, dim);
  auto zbit = [](std::size_t b, int s) { return (b >> s) & 1 ? -1.0 : 1.0; };
  for (std::size_t b = 0; b < dim; ++b) {
    double diag = 0.0;
    const int last = c.boundary == Boundary::Periodic ? c.L : c.L - 1;
    for (int i = 0; i < last; ++i)
      diag += c.J * zbit(b, i) * zbit(b, (i + 1) % c.L);
    for (int i = 0; i < c.L; ++i) diag += c.hz * zbit(b, i);
    h(b, b) = diag;
    for (int i = 0; i < c.L; ++i) h(b ^ (std::size_t{1} << i), b) += c.hx;
  }
  return h;
}

}  // namespace unravel
