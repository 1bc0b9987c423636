#pragma once

#include "frameflow/geometry.hpp"
#include "frameflow/stochastics.hpp"
#include "frameflow/subriemannian.hpp"
#include "frameflow/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace frameflow {

struct Dataset {
  std::vector<Vec> points;
  std::optional<FramePoint> ground_truth;  // frame used to simulate, if any
  double horizon = 0.0;                    // simulation horizon, if synthetic

  int size() const { return static_cast<int>(points.size()); }
};

struct FrechetOptions {
  int max_iterations = 100;
  double grad_tol = 1e-6;
  ShootingOptions shooting;
};

/// Riemannian center of mass by gradient descent on the squared-distance
/// objective, log maps via shooting.  Throws NonConvergenceError when the
/// gradient norm stays above tolerance.
Vec frechet_mean(const ChartManifold& m, const Dataset& data,
                 const FrechetOptions& opts = {});

/// Determinant of sigma in a g-orthonormal basis: det(sigma) / det(g(x)).
double det_g(const ChartManifold& m, const SymPoint& sigma);

struct EstimateOptions {
  int max_evals = 400;      // objective evaluation budget for the simplex
  double simplex_scale = 0.2;
  double eig_floor = 1e-4;  // sigma eigenvalue clamp
  double eig_cap = 1e4;
  int polish_iterations = 20;
  std::uint64_t seed = 0;
  FiberShootingOptions shooting;
  int threads = 0;  // concurrent per-point distances inside one evaluation
};

struct EstimateResult {
  SymPoint sigma_hat;
  double objective = 0.0;
  std::vector<double> distances;  // per-point fiber distances at the optimum
  std::vector<double> objective_history;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // eigenvalue clamp active at the optimum
};

/// Joint mean/precision estimator: minimizes
///   sum_i dist_sym((x, sigma), x_i)^2 - (N/2) log det_g(sigma)
/// over chart point x and sigma = L L^T (lower-triangular L, exponential
/// diagonal), Nelder-Mead with a finite-difference Newton polish.  Inner
/// fiber shootings are warm-started across evaluations.
EstimateResult anisotropic_estimate(const ChartManifold& m, const Dataset& data,
                                    const EstimateOptions& opts = {});

/// Onsager-Machlup functional: integral of -|gamma'|_g^2 / 2 + S(gamma)/12
/// along the sampled path (midpoint energy, trapezoidal curvature term).
double onsager_machlup(const ChartManifold& m, const SampledPath& path);

struct MppOptions {
  int max_iterations = 600;
  double grad_tol = 1e-8;
  ShootingOptions shooting;  // for the geodesic initialization
};

/// Most probable path of the isotropic process: ascends the discretized
/// Onsager-Machlup functional over the interior nodes, starting from the
/// Riemannian geodesic.  `nodes` counts the total grid points.
SampledPath mpp_isotropic(const ChartManifold& m, const Vec& x0, const Vec& y,
                          int nodes, const MppOptions& opts = {});

/// Endpoint sample of the anisotropic process started at u0, with ground
/// truth attached.  Discarded paths are replaced by extra draws; throws
/// NumericalError if the discard rate makes that hopeless.
Dataset generate_synthetic(const ChartManifold& m, const FramePoint& u0,
                           double t, int N, std::uint64_t seed, int steps = 400);

}  // namespace frameflow
