#pragma once

#include "frameflow/frame_bundle.hpp"
#include "frameflow/geometry.hpp"
#include "frameflow/types.hpp"

#include <cstdint>
#include <vector>

namespace frameflow {

/// State of the Hamiltonian geodesic flow on T*FM in chart coordinates:
/// q encodes a FramePoint, p holds the covector components.
struct CotangentState {
  Vec q;
  Vec p;
};

struct GeodesicResult {
  SampledPath path;        // frame-bundle states q per node
  double length = 0.0;
  Vec initial_covector;
  double endpoint_residual = 0.0;
  bool converged = false;
};

/// Sub-Riemannian Hamiltonian H(q,p) = 1/2 sum_i <p, H_i(q)>^2.
double hamiltonian(const ChartManifold& m, const CotangentState& s);

/// RK4 integration of qd = dH/dp, pd = -dH/dq; dH/dq by central differences
/// (step 1e-6), dH/dp in closed form.  Node values are [q; p].
SampledPath geodesic_flow(const ChartManifold& m, const CotangentState& s0,
                          double T, int steps = 1000);

/// Endpoint of the normal geodesic with initial covector p0.
FramePoint sr_exp(const ChartManifold& m, const FramePoint& u0, const Vec& p0,
                  double T, int steps = 1000);

struct FiberShootingOptions {
  int steps = 200;          // integrator steps per trial geodesic
  int final_steps = 600;    // resolution of the returned minimizing path
  double ctol = 1e-9;       // endpoint residual tolerance (sup norm, chart)
  int max_iterations = 40;  // Gauss-Newton iterations per penalty stage
  int multistarts = 8;
  std::uint64_t seed = 0;
  std::vector<Vec> warm_starts;  // covectors tried before the default starts
  int threads = 1;               // concurrent starts
};

/// Shortest normal geodesic from u0 to the fiber over y: minimizes 2H(u0,p0)
/// subject to base(exp(u0,p0,1)) = y by quadratic-penalty continuation with
/// damped Gauss-Newton, followed by a projected feasibility refinement.
/// Never throws for non-convergence; inspect .converged.
GeodesicResult shoot_to_fiber(const ChartManifold& m, const FramePoint& u0,
                              const Vec& y, const FiberShootingOptions& opts = {});

/// Fiber distance from a positive 2-tensor to a base point, computed through
/// any Cholesky lift (the result does not depend on the lift).  Throws
/// NonConvergenceError when the shooting fails.
double sym_distance(const ChartManifold& m, const SymPoint& sigma, const Vec& y,
                    const FiberShootingOptions& opts = {});

/// Most probable path for the driving process: base projection of the
/// fiber-minimizing geodesic from u0 to the fiber over y.
SampledPath mpp_driving(const ChartManifold& m, const FramePoint& u0,
                        const Vec& y, const FiberShootingOptions& opts = {});

/// Numerical rank of span{H_i and iterated brackets up to `depth`} at u,
/// with brackets computed by central differences of the fields in chart
/// coordinates and rank by SVD thresholding.
int hormander_rank(const ChartManifold& m, const FramePoint& u, int depth,
                   double svd_threshold = 1e-8);

}  // namespace frameflow
