#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "unravel/common.hpp"
#include "unravel/linalg.hpp"

namespace unravel {

enum class ChannelKind { Dephasing, AmplitudeDamping, Depolarizing };

inline const char* kind_name(ChannelKind k) {
  switch (k) {
    case ChannelKind::Dephasing: return "dephasing";
    case ChannelKind::AmplitudeDamping: return "amplitude_damping";
    case ChannelKind::Depolarizing: return "depolarizing";
  }
  return "?";
}

inline ChannelKind kind_from_name(const std::string& s) {
  if (s == "dephasing") return ChannelKind::Dephasing;
  if (s == "amplitude_damping") return ChannelKind::AmplitudeDamping;
  if (s == "depolarizing") return ChannelKind::Depolarizing;
  throw config_error("unknown channel kind: " + s);
}

struct ChannelSpec {
  ChannelKind kind = ChannelKind::Dephasing;
  double p = 0.0;  // error rate in [0, 1]

  void validate() const {
    require(p >= 0.0 && p <= 1.0, "ChannelSpec: rate p outside [0, 1]");
  }
};

// An ordered Kraus decomposition; the operator order is part of the value
// (outcome indices refer to it).
struct KrausSet {
  int dim = 2;
  std::vector<CMatrix> ops;

  int n_ops() const { return static_cast<int>(ops.size()); }
};

// Frobenius norm of (sum K^dag K - I).
inline double completeness_residual(const KrausSet& set) {
  CMatrix acc = CMatrix::Zero(set.dim, set.dim);
  for (const auto& k : set.ops) acc += k.adjoint() * k;
  return (acc - CMatrix::Identity(set.dim, set.dim)).norm();
}

namespace pauli {
inline CMatrix I() { return CMatrix::Identity(2, 2); }
inline CMatrix X() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline CMatrix Y() {
  CMatrix m(2, 2);
  m << cplx(0, 0), cplx(0, -1), cplx(0, 1), cplx(0, 0);
  return m;
}
inline CMatrix Z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
inline CMatrix unit(int r, int c) {  // |r><c|
  CMatrix m = CMatrix::Zero(2, 2);
  m(r, c) = 1.0;
  return m;
}
}  // namespace pauli

// Fewest-operator decompositions. Zero operators are kept at p = 0 so that
// outcome indices are stable across the whole rate range.
inline KrausSet minimal_kraus(const ChannelSpec& spec) {
  spec.validate();
  const double p = spec.p;
  KrausSet set;
  switch (spec.kind) {
    case ChannelKind::Dephasing:
      set.ops = {std::sqrt(1.0 - p / 2.0) * pauli::I(),
                 std::sqrt(p / 2.0) * pauli::Z()};
      break;
    case ChannelKind::AmplitudeDamping: {
      CMatrix k0(2, 2), k1(2, 2);
      k0 << 1, 0, 0, std::sqrt(1.0 - p);
      k1 << 0, std::sqrt(p), 0, 0;
      set.ops = {k0, k1};
      break;
    }
    case ChannelKind::Depolarizing:
      set.ops = {std::sqrt(1.0 - 3.0 * p / 4.0) * pauli::I(),
                 std::sqrt(p / 4.0) * pauli::X(),
                 std::sqrt(p / 4.0) * pauli::Y(),
                 std::sqrt(p / 4.0) * pauli::Z()};
      break;
  }
  return set;
}

// Textbook measurement-flavored decompositions.
inline KrausSet conventional_kraus(const ChannelSpec& spec) {
  spec.validate();
  const double p = spec.p;
  KrausSet set;
  switch (spec.kind) {
    case ChannelKind::Dephasing:
      set.ops = {std::sqrt(1.0 - p) * pauli::I(),
                 std::sqrt(p) * pauli::unit(0, 0),
                 std::sqrt(p) * pauli::unit(1, 1)};
      break;
    case ChannelKind::AmplitudeDamping:
      return minimal_kraus(spec);
    case ChannelKind::Depolarizing:
      set.ops = {std::sqrt(1.0 - p) * pauli::I(),
                 std::sqrt(p / 2.0) * pauli::unit(0, 0),
                 std::sqrt(p / 2.0) * pauli::unit(0, 1),
                 std::sqrt(p / 2.0) * pauli::unit(1, 0),
                 std::sqrt(p / 2.0) * pauli::unit(1, 1)};
      break;
  }
  return set;
}

struct SU2Params {
  double theta = 0.0, phi = 0.0, psi = 0.0;
};

// U = [[ e^{i(psi+phi)} cos(theta),   i e^{i(psi-phi)} sin(theta) ],
//      [ i e^{-i(psi-phi)} sin(theta), e^{-i(psi+phi)} cos(theta) ]]
inline CMatrix su2_matrix(const SU2Params& a) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  const cplx i(0.0, 1.0);
  CMatrix u(2, 2);
  u(0, 0) = std::exp(i * (a.psi + a.phi)) * c;
  u(0, 1) = i * std::exp(i * (a.psi - a.phi)) * s;
  u(1, 0) = i * std::exp(-i * (a.psi - a.phi)) * s;
  u(1, 1) = std::exp(-i * (a.psi + a.phi)) * c;
  return u;
}

struct BasisRotation {
  CMatrix u;  // N x N unitary mixing the Kraus operators

  int n() const { return static_cast<int>(u.rows()); }
};

// K'_a = sum_b U_{ab} K_b. Mixing the operators by any unitary leaves the
// channel itself unchanged.
inline KrausSet rotate_kraus(const KrausSet& set, const BasisRotation& rot) {
  require(rot.n() == set.n_ops(),
          "rotate_kraus: rotation size differs from operator count");
  require(is_unitary(rot.u), "rotate_kraus: rotation not unitary");
  KrausSet out;
  out.dim = set.dim;
  out.ops.resize(set.ops.size());
  for (int a = 0; a < set.n_ops(); ++a) {
    CMatrix k = CMatrix::Zero(set.dim, set.dim);
    for (int b = 0; b < set.n_ops(); ++b) k += rot.u(a, b) * set.ops[b];
    out.ops[a] = std::move(k);
  }
  return out;
}

inline BasisRotation hadamard_like_rotation2() {
  CMatrix u(2, 2);
  u << 1, 1, -1, 1;
  u /= std::sqrt(2.0);
  return BasisRotation{u};
}

// Uniform-mixing 4x4 rotation (tensor square of the 2x2 Hadamard). This is
// the stored optimized basis for the depolarizing channel: every rotated
// operator mixes all four base operators with weight 1/4, the analytic
// optimum of the measurement-effectiveness objective for this family.
inline BasisRotation depolarizing_optimized_rotation() {
  CMatrix u(4, 4);
  u << 1, 1, 1, 1,
       1, -1, 1, -1,
       1, 1, -1, -1,
       1, -1, -1, 1;
  u /= 2.0;
  return BasisRotation{u};
}

// Entanglement-minimizing fixed bases:
// dephasing/amplitude damping use the 2x2 Hadamard-like row mix; the
// depolarizing rotation is the stored artifact above (reproducible with the
// basis optimizer, see tools).
inline KrausSet spin_optimized_kraus(const ChannelSpec& spec) {
  switch (spec.kind) {
    case ChannelKind::Dephasing:
      return rotate_kraus(minimal_kraus(spec), hadamard_like_rotation2());
    case ChannelKind::AmplitudeDamping:
      return rotate_kraus(conventional_kraus(spec), hadamard_like_rotation2());
    case ChannelKind::Depolarizing:
      return rotate_kraus(minimal_kraus(spec),
                          depolarizing_optimized_rotation());
  }
  throw std::invalid_argument("spin_optimized_kraus: bad kind");
}

// Channel fingerprint: sum_a vec(K_a) vec(K_a)^dag (column-stacking vec),
// a d^2 x d^2 PSD matrix with trace d. Two Kraus sets describe the same
// channel iff their fingerprints coincide.
inline CMatrix choi_matrix(const KrausSet& set) {
  const int d2 = set.dim * set.dim;
  CMatrix c = CMatrix::Zero(d2, d2);
  for (const auto& k : set.ops) {
    CVector v = vec(k);
    c.noalias() += v * v.adjoint();
  }
  return c;
}

inline double channel_distance(const KrausSet& a, const KrausSet& b) {
  require(a.dim == b.dim, "channel_distance: dimension mismatch");
  return (choi_matrix(a) - choi_matrix(b)).norm();
}

inline bool channel_equivalence(const KrausSet& a, const KrausSet& b,
                                double tol = 1e-8) {
  return channel_distance(a, b) <= tol;
}

inline CMatrix apply_channel_dm(const KrausSet& set, const CMatrix& rho) {
  require(rho.rows() == set.dim && rho.cols() == set.dim,
          "apply_channel_dm: dimension mismatch");
  CMatrix out = CMatrix::Zero(set.dim, set.dim);
  for (const auto& k : set.ops) out.noalias() += k * rho * k.adjoint();
  return out;
}

// V = sum_a K_a (x) |a>, a (d*N) x d isometry; row index is s*N + a.
inline CMatrix dilation_isometry(const KrausSet& set) {
  const int n = set.n_ops();
  CMatrix v = CMatrix::Zero(set.dim * n, set.dim);
  for (int a = 0; a < n; ++a)
    for (int s = 0; s < set.dim; ++s)
      for (int t = 0; t < set.dim; ++t) v(s * n + a, t) = set.ops[a](s, t);
  return v;
}

// Partial trace over the record register of a (d*N) x (d*N) matrix whose
// row index is s*N + a (as produced by the dilation isometry).
inline CMatrix trace_out_record(const CMatrix& x, int d, int n) {
  require(x.rows() == d * n && x.cols() == d * n,
          "trace_out_record: dimension mismatch");
  CMatrix out = CMatrix::Zero(d, d);
  for (int s = 0; s < d; ++s)
    for (int t = 0; t < d; ++t)
      for (int a = 0; a < n; ++a) out(s, t) += x(s * n + a, t * n + a);
  return out;
}

}  // namespace unravel
