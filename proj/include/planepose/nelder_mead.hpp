#pragma once

#include <functional>
#include <span>
#include <vector>

namespace planepose {

struct NelderMeadOptions {
  int max_iters = 500;
  double x_tol = 1e-6;  // stop when every vertex is within x_tol of the best, per coordinate
  double f_tol = 0.0;   // also stop when the value spread falls to f_tol (0 disables)
  bool adaptive = true; // dimension-adapted coefficients (Gao & Han)
  std::vector<double> initial_step;  // per-coordinate simplex edge; defaults to 0.05
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> best_history;  // best value after each iteration
};

using Objective = std::function<double(std::span<const double>)>;

/// Minimizes `f` from `x0`. The returned value never exceeds f(x0).
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const NelderMeadOptions& opts = {});

}  // namespace planepose
