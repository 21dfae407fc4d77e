#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "unravel/common.hpp"
#include "unravel/optimize.hpp"
#include "unravel/rng.hpp"

namespace unravel {

inline constexpr double kRenyiInf = std::numeric_limits<double>::infinity();
inline const std::vector<double> kDefaultRenyiIndices = {0.5, 1.0, 2.0,
                                                         kRenyiInf};

// Renyi-n entropy (natural log) of a probability spectrum. Small negative
// eigenvalues are clipped to zero and the spectrum renormalized.
inline double renyi_entropy(std::vector<double> lambda, double n) {
  require(!lambda.empty(), "renyi_entropy: empty spectrum");
  double sum = 0.0;
  for (double& x : lambda) {
    require(x >= -1e-10, "renyi_entropy: eigenvalue below -1e-10");
    if (x < 0.0) x = 0.0;
    sum += x;
  }
  require(std::abs(sum - 1.0) < 1e-8, "renyi_entropy: spectrum sum not 1");
  for (double& x : lambda) x /= sum;

  if (std::isinf(n)) {
    double mx = 0.0;
    for (double x : lambda) mx = std::max(mx, x);
    return -std::log(mx);
  }
  require(n > 0.0, "renyi_entropy: index must be positive");
  if (std::abs(n - 1.0) < 1e-12) {
    double s = 0.0;
    for (double x : lambda)
      if (x > 1e-300) s -= x * std::log(x);
    return s;
  }
  double acc = 0.0;
  for (double x : lambda) acc += std::pow(x, n);
  return std::log(acc) / (1.0 - n);
}

// I3 = S_A + S_B + S_C - S_AB - S_AC - S_BC + S_ABC.
inline double tripartite_i3(double sa, double sb, double sc, double sab,
                            double sac, double sbc, double sabc) {
  return sa + sb + sc - sab - sac - sbc + sabc;
}

// Nonparametric bootstrap of an arbitrary statistic. Returns the statistic on
// the original sample and the standard deviation across resamples.
template <class F>
inline std::pair<double, double> bootstrap(const std::vector<double>& samples,
                                           F&& statistic, int n_resamples,
                                           std::uint64_t seed) {
  require(samples.size() >= 2, "bootstrap: need at least 2 samples");
  require(n_resamples >= 2, "bootstrap: need at least 2 resamples");
  const double point = statistic(samples);
  Rng rng(seed, 0);
  std::vector<double> re(samples.size());
  std::vector<double> stats(n_resamples);
  for (int b = 0; b < n_resamples; ++b) {
    for (auto& x : re) x = samples[rng.next_u64() % samples.size()];
    stats[b] = statistic(re);
  }
  double mean = 0.0;
  for (double s : stats) mean += s;
  mean /= n_resamples;
  double var = 0.0;
  for (double s : stats) var += (s - mean) * (s - mean);
  var /= n_resamples;
  return {point, std::sqrt(var)};
}

inline double mean_statistic(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

struct DataRow {
  int L = 0;
  double p = 0.0;        // decoherence rate (or gamma)
  double renyi = 1.0;    // entropy index the row belongs to
  double mean = 0.0;     // ensemble mean of I3 (or other observable)
  double se = 0.0;       // standard error of the mean
  int n_traj = 0;
};
using DataTable = std::vector<DataRow>;

struct CollapseResult {
  double p_c = 0.0;
  double nu = 0.0;
  double quality = 0.0;
  double p_c_err = 0.0;
  double nu_err = 0.0;
  int n_boot = 0;
};

struct FssOptions {
  double nu_min = 0.3;
  double nu_max = 3.0;
  int grid = 200;
  int n_boot = 200;
  std::uint64_t seed = 12345;
};

namespace detail {

struct ScaledPoint {
  double x, y, se;
  int size_id;
};

// Master-curve residual: scale every point to x = (p - p_c) L^{1/nu}, then
// measure each point against the line through its nearest x-neighbors drawn
// from the other system sizes, normalizing by the combined variance.
inline double collapse_residual(const DataTable& rows, double pc, double nu) {
  if (nu < 0.05) return 1e12;
  std::vector<ScaledPoint> pts;
  pts.reserve(rows.size());
  std::vector<int> sizes;
  for (const auto& r : rows) {
    int id = -1;
    for (std::size_t k = 0; k < sizes.size(); ++k)
      if (sizes[k] == r.L) id = static_cast<int>(k);
    if (id < 0) {
      id = static_cast<int>(sizes.size());
      sizes.push_back(r.L);
    }
    pts.push_back({(r.p - pc) * std::pow(double(r.L), 1.0 / nu), r.mean,
                   r.se, id});
  }
  std::sort(pts.begin(), pts.end(),
            [](const ScaledPoint& a, const ScaledPoint& b) {
              return a.x < b.x;
            });
  double acc = 0.0;
  int count = 0;
  const int n = static_cast<int>(pts.size());
  for (int j = 0; j < n; ++j) {
    int l = -1, r = -1;
    for (int k = j - 1; k >= 0; --k)
      if (pts[k].size_id != pts[j].size_id) {
        l = k;
        break;
      }
    for (int k = j + 1; k < n; ++k)
      if (pts[k].size_id != pts[j].size_id) {
        r = k;
        break;
      }
    if (l < 0 || r < 0) continue;  // not interior to the other-size cloud
    const double dx = pts[r].x - pts[l].x;
    if (dx <= 1e-300) continue;
    const double w = (pts[r].x - pts[j].x) / dx;
    const double yhat = w * pts[l].y + (1.0 - w) * pts[r].y;
    const double var = pts[j].se * pts[j].se +
                       w * w * pts[l].se * pts[l].se +
                       (1.0 - w) * (1.0 - w) * pts[r].se * pts[r].se;
    acc += (pts[j].y - yhat) * (pts[j].y - yhat) / std::max(var, 1e-300);
    ++count;
  }
  if (count == 0) return 1e12;
  return acc / count;
}

inline std::pair<double, double> fit_from(const DataTable& rows, double pc0,
                                          double nu0, double pmin,
                                          double pmax, const FssOptions& o) {
  auto fn = [&](const std::vector<double>& v) {
    double pen = 0.0;
    if (v[0] < pmin) pen += 1e6 * (pmin - v[0]) * (pmin - v[0]);
    if (v[0] > pmax) pen += 1e6 * (v[0] - pmax) * (v[0] - pmax);
    if (v[1] < o.nu_min) pen += 1e6 * (o.nu_min - v[1]) * (o.nu_min - v[1]);
    if (v[1] > o.nu_max) pen += 1e6 * (v[1] - o.nu_max) * (v[1] - o.nu_max);
    return collapse_residual(rows, v[0], v[1]) + pen;
  };
  NelderMeadOptions nmo;
  nmo.init_step = 0.02;
  nmo.diameter_tol = 1e-9;
  nmo.max_iter = 2000;
  const auto res = nelder_mead(fn, {pc0, nu0}, nmo);
  return {std::clamp(res.x[0], pmin, pmax),
          std::clamp(res.x[1], o.nu_min, o.nu_max)};
}

}  // namespace detail

// Fit (p_c, nu) by minimizing the master-curve residual: full grid scan
// followed by Nelder-Mead refinement; errors from a parametric bootstrap that
// resamples each row's mean from N(mean, se).
inline CollapseResult fss_collapse(const DataTable& rows,
                                   const FssOptions& opts = {}) {
  std::vector<int> sizes;
  for (const auto& r : rows)
    if (std::find(sizes.begin(), sizes.end(), r.L) == sizes.end())
      sizes.push_back(r.L);
  require(sizes.size() >= 3, "fss_collapse: need at least 3 system sizes");
  for (int L : sizes) {
    int cnt = 0;
    for (const auto& r : rows)
      if (r.L == L) ++cnt;
    require(cnt >= 5, "fss_collapse: need at least 5 points per size");
  }
  double pmin = rows.front().p, pmax = rows.front().p;
  for (const auto& r : rows) {
    pmin = std::min(pmin, r.p);
    pmax = std::max(pmax, r.p);
  }
  require(pmax > pmin, "fss_collapse: rate values are all identical");

  double best = 1e300, worst = -1e300, best_pc = pmin, best_nu = 1.0;
  for (int i = 0; i < opts.grid; ++i)
    for (int j = 0; j < opts.grid; ++j) {
      const double pc = pmin + (pmax - pmin) * i / (opts.grid - 1);
      const double nu =
          opts.nu_min + (opts.nu_max - opts.nu_min) * j / (opts.grid - 1);
      const double q = detail::collapse_residual(rows, pc, nu);
      worst = std::max(worst, q);
      if (q < best) {
        best = q;
        best_pc = pc;
        best_nu = nu;
      }
    }
  if (worst - best < 1e-12 * std::max(1.0, std::abs(worst)))
    throw degenerate_collapse_error(
        "fss_collapse: residual landscape is flat over the whole grid");

  const auto [pc_fit, nu_fit] =
      detail::fit_from(rows, best_pc, best_nu, pmin, pmax, opts);

  Rng rng(opts.seed, 1);
  std::vector<double> pcs, nus;
  pcs.reserve(opts.n_boot);
  nus.reserve(opts.n_boot);
  for (int b = 0; b < opts.n_boot; ++b) {
    DataTable re = rows;
    for (auto& r : re) r.mean += r.se * rng.next_gaussian();
    const auto [pcb, nub] =
        detail::fit_from(re, pc_fit, nu_fit, pmin, pmax, opts);
    pcs.push_back(pcb);
    nus.push_back(nub);
  }
  auto sd = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / v.size());
  };

  CollapseResult out;
  out.p_c = pc_fit;
  out.nu = nu_fit;
  out.quality = detail::collapse_residual(rows, pc_fit, nu_fit);
  out.p_c_err = sd(pcs);
  out.nu_err = sd(nus);
  out.n_boot = opts.n_boot;
  return out;
}

}  // namespace unravel
