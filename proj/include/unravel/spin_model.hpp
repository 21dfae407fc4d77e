#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "unravel/channels.hpp"
#include "unravel/common.hpp"
#include "unravel/optimize.hpp"
#include "unravel/rng.hpp"

namespace unravel {

// Second-moment statistics of a Kraus set:
//   u1 = sum_a tr[(K_a^dag K_a)^2],  u2 = sum_a (tr K_a^dag K_a)^2.
// Their ratio measures how much which-outcome information the unraveling
// extracts; it controls the entanglement transition of the trajectory
// ensemble through the effective pairing model below.
inline std::pair<double, double> compute_u(const KrausSet& set) {
  double u1 = 0.0, u2 = 0.0;
  for (const auto& k : set.ops) {
    const CMatrix m = k.adjoint() * k;
    u1 += (m * m).trace().real();
    const double t = m.trace().real();
    u2 += t * t;
  }
  return {u1, u2};
}

// Effective two-body couplings of the replica pairing model on a chain with
// onsite dimension q. Throws when (u1, u2) leave the domain where both
// logarithms are defined.
inline std::pair<double, double> couplings(double u1, double u2, int q) {
  require(q >= 2, "couplings: q must be >= 2");
  const double q2 = static_cast<double>(q) * q;
  const double a = u1 * u1 - u2 * u2 / q2;  // > 0 iff u2/u1 < q
  const double b = u2 * u2 - u1 * u1 / q2;  // > 0 iff u2/u1 > 1/q
  if (a <= 0.0 || b <= 0.0)
    throw unphysical_error("couplings: log argument not positive");
  const double jd = 0.25 * std::log(a / b);
  const double num = u1 * u2 * (1.0 - 1.0 / q2);
  const double jh = 0.25 * std::log(num * num / (b * a));
  return {jd, jh};
}

// Residual of the critical-line condition 2 e^{2Jh} = e^{-2Jd} - e^{2Jd}.
inline double critical_condition_residual(double jd, double jh) {
  return 2.0 * std::exp(2.0 * jh) -
         (std::exp(-2.0 * jd) - std::exp(2.0 * jd));
}

// The critical value of u2/u1: the positive root of
// x^2 - 2 ((q^2-1)/(q^2+1)) x - 1 = 0.
inline double critical_ratio(int q) {
  require(q >= 2, "critical_ratio: q must be >= 2");
  const double q2 = static_cast<double>(q) * q;
  const double b = (q2 - 1.0) / (q2 + 1.0);
  return b + std::sqrt(b * b + 1.0);
}

using KrausFamily = std::function<KrausSet(double)>;

// Smallest rate p in (0, 1] where u2(p)/u1(p) crosses the critical ratio.
// The ratio is scanned on a 64-point grid (which both exposes
// non-monotonicity and brackets the smallest crossing), then bisected to
// 1e-9. Families that never cross (for example purely unitary unravelings,
// where u2/u1 is identically q) throw no_root_error.
inline double solve_pc2(const KrausFamily& family, int q) {
  const double target = critical_ratio(q);
  auto ratio_excess = [&](double p) {
    auto [u1, u2] = compute_u(family(p));
    require(u1 > 0.0, "solve_pc2: u1 not positive");
    return u2 / u1 - target;
  };

  constexpr int kGrid = 64;
  constexpr double kLo = 1e-6, kHi = 1.0;
  double prev_p = kLo, prev_f = ratio_excess(kLo);
  double lo = 0.0, hi = 0.0;
  bool bracketed = false;
  if (std::abs(prev_f) < 1e-15) return prev_p;
  for (int i = 1; i <= kGrid; ++i) {
    const double p = kLo + (kHi - kLo) * i / kGrid;
    const double f = ratio_excess(p);
    if (prev_f > 0.0 && f <= 0.0) {
      lo = prev_p;
      hi = p;
      bracketed = true;
      break;  // first sign change = smallest root
    }
    prev_p = p;
    prev_f = f;
  }
  if (!bracketed)
    throw no_root_error("solve_pc2: ratio never reaches the critical value");

  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (ratio_excess(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double solve_pc2_conventional(ChannelKind kind, int q = 2) {
  return solve_pc2(
      [kind](double p) { return conventional_kraus({kind, p}); }, q);
}

// Base sets the rotated families act on: the fewest-operator decompositions.
inline KrausSet family_base_kraus(ChannelKind kind, double p) {
  return minimal_kraus({kind, p});
}

// SU(4) from 6 two-level Givens rotations plus a diagonal phase block.
// Parameter layout: (theta01, phi01, theta02, phi02, theta03, phi03,
// theta12, phi12, theta13, phi13, theta23, phi23, d1, d2, d3); the rotations
// are applied in that pair order, left to right, then the phases
// diag(e^{i d1}, e^{i d2}, e^{i d3}, e^{-i(d1+d2+d3)}).
inline CMatrix su4_givens(std::span<const double> a) {
  require(a.size() == 15, "su4_givens: expected 15 parameters");
  const cplx i(0.0, 1.0);
  CMatrix u = CMatrix::Identity(4, 4);
  constexpr int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (int g = 0; g < 6; ++g) {
    const double th = a[2 * g], ph = a[2 * g + 1];
    CMatrix r = CMatrix::Identity(4, 4);
    const int p = pairs[g][0], s = pairs[g][1];
    r(p, p) = std::cos(th);
    r(s, s) = std::cos(th);
    r(p, s) = -std::exp(i * ph) * std::sin(th);
    r(s, p) = std::exp(-i * ph) * std::sin(th);
    u = u * r;
  }
  CVector d(4);
  d << std::exp(i * a[12]), std::exp(i * a[13]), std::exp(i * a[14]),
      std::exp(-i * (a[12] + a[13] + a[14]));
  return u * d.asDiagonal();
}

inline BasisRotation rotation_from_params(ChannelKind kind,
                                          std::span<const double> params) {
  if (params.size() == 3) {
    return BasisRotation{su2_matrix({params[0], params[1], params[2]})};
  }
  if (params.size() == 15) {
    require(kind == ChannelKind::Depolarizing,
            "rotation_from_params: 15 parameters need a 4-operator set");
    return BasisRotation{su4_givens(params)};
  }
  throw std::invalid_argument("rotation_from_params: expected 3 or 15 angles");
}

inline double solve_pc2_rotated(ChannelKind kind,
                                std::span<const double> params, int q = 2) {
  const BasisRotation rot = rotation_from_params(kind, params);
  return solve_pc2(
      [kind, &rot](double p) {
        return rotate_kraus(family_base_kraus(kind, p), rot);
      },
      q);
}

// Closed forms for the rotated dephasing family (any psi; it only rephases
// rows and drops out of u1, u2).
inline std::pair<double, double> dephasing_u_analytic(double p, double theta,
                                                      double phi) {
  const double c2 = std::cos(theta) * std::cos(theta);
  const double s2 = std::sin(theta) * std::sin(theta);
  const double c4s4 = c2 * c2 + s2 * s2;
  const double cs = c2 * s2;
  const double w = (1.0 - p / 2.0) * (p / 2.0);
  const double a = (1.0 - p / 2.0) * (1.0 - p / 2.0) + (p / 2.0) * (p / 2.0);
  const double s2p = std::sin(2.0 * phi) * std::sin(2.0 * phi);
  const double u1 = 2.0 * (a * c4s4 + 4.0 * w * cs * (1.0 + 2.0 * s2p));
  const double u2 = 4.0 * (a * c4s4 + 4.0 * w * cs);
  return {u1, u2};
}

// Closed forms for the rotated amplitude-damping family (theta only).
inline std::pair<double, double> ampdamp_u_analytic(double p, double theta) {
  const double c2 = std::cos(theta) * std::cos(theta);
  const double s2 = std::sin(theta) * std::sin(theta);
  const double c4s4 = c2 * c2 + s2 * s2;
  const double cs = c2 * s2;
  const double u1 = 2.0 * (1.0 - p + p * p) * c4s4 + 4.0 * p * (2.0 - p) * cs;
  const double u2 =
      2.0 * (2.0 - 2.0 * p + p * p) * c4s4 + 4.0 * p * (2.0 - p) * cs;
  return {u1, u2};
}

struct OptimizationResult {
  std::vector<double> params;
  double pc2 = 0.0;
  long objective_evals = 0;
  int n_starts = 0;
};

// Minimize the critical rate over the basis-rotation family by seeded
// multi-start Nelder-Mead. Families with no crossing get a penalty above
// any attainable rate so the search moves back into the rooted region.
inline OptimizationResult optimize_basis_spin(ChannelKind kind, int q,
                                              int n_params, std::uint64_t seed,
                                              int n_starts = 16) {
  require(n_params == 3 || n_params == 15,
          "optimize_basis_spin: expected 3 or 15 parameters");
  long evals = 0;
  auto objective = [&](const std::vector<double>& x) {
    ++evals;
    try {
      return solve_pc2_rotated(kind, x, q);
    } catch (const no_root_error&) {
      return 2.0;
    }
  };

  Rng rng(seed, 0);
  NelderMeadOptions opt;
  opt.max_iter = 6000;
  OptimizationResult best;
  best.pc2 = 2.0;
  best.n_starts = n_starts;
  for (int s = 0; s < n_starts; ++s) {
    std::vector<double> x0(n_params);
    for (int k = 0; k < n_params; ++k) {
      const bool theta_slot = (n_params == 3) ? (k == 0)
                                              : (k < 12 && k % 2 == 0);
      x0[k] = theta_slot ? rng.next_double() * (kPi / 2.0)
                         : rng.next_double() * (2.0 * kPi);
    }
    NelderMeadResult r = nelder_mead(objective, x0, opt);
    if (r.f < best.pc2) {
      best.pc2 = r.f;
      best.params = r.x;
    }
  }
  best.objective_evals = evals;
  if (best.pc2 >= 2.0)
    throw no_root_error("optimize_basis_spin: no start found a crossing");
  return best;
}

}  // namespace unravel
