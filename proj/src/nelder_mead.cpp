#include "planepose/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "planepose/error.hpp"

namespace planepose {

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const NelderMeadOptions& opts) {
  const std::size_t n = x0.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "nelder_mead needs at least one parameter");
  if (!opts.initial_step.empty() && opts.initial_step.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "initial_step size mismatch");
  }
  const double dn = static_cast<double>(n);
  const double alpha = 1.0;
  const double gamma = opts.adaptive ? 1.0 + 2.0 / dn : 2.0;
  const double rho = opts.adaptive ? 0.75 - 1.0 / (2.0 * dn) : 0.5;
  const double sigma = opts.adaptive ? 1.0 - 1.0 / dn : 0.5;

  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += opts.initial_step.empty() ? 0.05 : opts.initial_step[i];
  }
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      s2[i] = std::move(simplex[order[i]]);
      f2[i] = fv[order[i]];
    }
    simplex = std::move(s2);
    fv = std::move(f2);
  };

  auto affine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + t * (b[i] - a[i]);
    return out;
  };

  sort_simplex();
  std::vector<double> centroid(n);
  while (res.iterations < opts.max_iters) {
    double size = 0.0;
    for (std::size_t v = 1; v <= n; ++v) {
      for (std::size_t i = 0; i < n; ++i) size = std::max(size, std::abs(simplex[v][i] - simplex[0][i]));
    }
    const bool x_done = size <= opts.x_tol;
    const bool f_done = opts.f_tol > 0.0 && fv[n] - fv[0] <= opts.f_tol;
    if (x_done || f_done) {
      res.converged = true;
      break;
    }
    ++res.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v][i] / dn;
    }
    const auto xr = affine(centroid, simplex[n], -alpha);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const auto xe = affine(centroid, simplex[n], -alpha * gamma);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      const auto xc = outside ? affine(centroid, simplex[n], -alpha * rho)
                              : affine(centroid, simplex[n], rho);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[n])) {
        simplex[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t v = 1; v <= n; ++v) {
          simplex[v] = affine(simplex[0], simplex[v], sigma);
          fv[v] = eval(simplex[v]);
        }
      }
    }
    sort_simplex();
    res.best_history.push_back(fv[0]);
  }
  res.x = simplex[0];
  res.f = fv[0];
  return res;
}

}  // namespace planepose
