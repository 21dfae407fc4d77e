#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "unravel/common.hpp"

namespace unravel {

struct NelderMeadOptions {
  int max_iter = 4000;
  double diameter_tol = 1e-7;  // converged when the simplex shrinks below this
  double init_step = 0.2;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

// Deterministic downhill simplex with the standard coefficients
// (reflect 1, expand 2, contract 1/2, shrink 1/2). All scratch buffers are
// allocated up front so iterations are allocation-free; objective calls at
// a few dozen nanoseconds each stay the dominant cost.
inline NelderMeadResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& fn,
    const std::vector<double>& x0, const NelderMeadOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  require(n >= 1, "nelder_mead: empty start point");
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return fn(x);
  };

  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 0; i < n; ++i) pts[i + 1][i] += opt.init_step;
  for (int i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

  // Scratch reused across iterations; copy assignments below never resize.
  std::vector<std::vector<double>> p2(n + 1, x0);
  std::vector<double> f2(n + 1);
  std::vector<int> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);

  auto diameter = [&]() {
    double d = 0.0;
    for (int i = 1; i <= n; ++i)
      for (int k = 0; k < n; ++k)
        d = std::max(d, std::abs(pts[i][k] - pts[0][k]));
    return d;
  };

  auto blend = [&](double coef, const std::vector<double>& far,
                   std::vector<double>& x) {
    for (int k = 0; k < n; ++k)
      x[k] = centroid[k] + coef * (far[k] - centroid[k]);
  };

  bool converged = false;
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fv[a] < fv[b]; });
    for (int i = 0; i <= n; ++i) {
      p2[i] = pts[order[i]];
      f2[i] = fv[order[i]];
    }
    pts.swap(p2);
    fv.swap(f2);
    if (diameter() < opt.diameter_tol) {
      converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) centroid[k] += pts[i][k] / n;

    blend(-1.0, pts[n], xr);
    double fr = eval(xr);
    if (fr < fv[0]) {
      blend(-2.0, pts[n], xe);
      double fe = eval(xe);
      if (fe < fr) {
        pts[n] = xe;
        fv[n] = fe;
      } else {
        pts[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      pts[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      blend(outside ? -0.5 : 0.5, pts[n], xc);
      double fc = eval(xc);
      if (fc < std::min(fr, fv[n])) {
        pts[n] = xc;
        fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          for (int k = 0; k < n; ++k)
            pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
          fv[i] = eval(pts[i]);
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  return NelderMeadResult{pts[best], fv[best], evals, converged};
}

}  // namespace unravel
