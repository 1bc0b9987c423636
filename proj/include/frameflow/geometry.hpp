#pragma once

#include "frameflow/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace frameflow {

using MetricFn = std::function<Mat(const Vec&)>;
using DomainFn = std::function<bool(const Vec&)>;
/// Christoffel symbols as a vector of matrices: gamma[k](i,j) = Gamma^k_ij.
using Christoffel = std::vector<Mat>;
using ChristoffelFn = std::function<Christoffel(const Vec&)>;

/// Riemann tensor R^l_{kij} for an n-dimensional chart.
class Tensor4 {
 public:
  explicit Tensor4(int n) : n_(n), v_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}
  int dim() const { return n_; }
  double& operator()(int l, int k, int i, int j) {
    return v_[((static_cast<std::size_t>(l) * n_ + k) * n_ + i) * n_ + j];
  }
  double operator()(int l, int k, int i, int j) const {
    return v_[((static_cast<std::size_t>(l) * n_ + k) * n_ + i) * n_ + j];
  }

 private:
  int n_;
  std::vector<double> v_;
};

/// A Riemannian manifold presented on a single coordinate chart: a metric
/// tensor field plus a domain predicate.  Christoffel symbols come from a
/// supplied closed form when available and central finite differences of
/// the metric otherwise.  Immutable after construction and safe to share
/// across threads.
class ChartManifold {
 public:
  ChartManifold(int dim, MetricFn metric, DomainFn domain = nullptr,
                ChristoffelFn christoffel = nullptr, double fd_step = 1e-5,
                std::string name = "chart");

  int dim() const { return dim_; }
  const std::string& name() const { return name_; }
  double fd_step() const { return fd_step_; }
  bool has_analytic_christoffel() const { return static_cast<bool>(christoffel_); }

  bool in_domain(const Vec& x) const;
  void require_domain(const Vec& x) const;  // throws ConfigError outside

  /// Metric matrix g(x).  Throws outside the domain or when g fails the
  /// symmetry/positivity guard.
  Mat metric(const Vec& x) const;
  Mat metric_inverse(const Vec& x) const;

  Christoffel christoffel(const Vec& x) const;
  /// Finite-difference route, always available; used to cross-check
  /// supplied closed forms.
  Christoffel christoffel_fd(const Vec& x) const;

 private:
  int dim_;
  MetricFn metric_;
  DomainFn domain_;
  ChristoffelFn christoffel_;
  double fd_step_;
  std::string name_;
};

/// Riemann tensor with the convention
///   R^l_{kij} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
///             + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik},
/// under which the unit sphere has scalar curvature +2.
Tensor4 curvature(const ChartManifold& m, const Vec& x);

double scalar_curvature(const ChartManifold& m, const Vec& x);

/// Rank of the curvature map Lambda^2(T_x M) -> so(n), assembled in a
/// g-orthonormal basis; full rank n(n-1)/2 means the map is injective.
int curvature_map_rank(const ChartManifold& m, const Vec& x,
                       double svd_threshold = 1e-8);

/// Fixed-step RK4 integration of the geodesic equation
/// xdd^k + Gamma^k_ij xd^i xd^j = 0.  Throws ChartExitError if the solution
/// leaves the chart.
SampledPath riemannian_geodesic(const ChartManifold& m, const Vec& x0,
                                const Vec& v0, double T, int steps = 1000);

struct ShootingOptions {
  int steps = 200;         // integrator steps for each trial geodesic
  double tol = 1e-8;       // endpoint residual tolerance, chart coordinates
  int max_iterations = 80;
  int multistarts = 8;
  std::uint64_t seed = 0;  // perturbation stream for extra starts
};

struct LogResult {
  Vec v0;            // initial velocity of the unit-time connecting geodesic
  double residual;
  bool converged;
};

/// Damped Gauss-Newton shooting for the Riemannian log map: finds v0 with
/// geodesic(x0, v0, 1) ending at y.
LogResult log_map(const ChartManifold& m, const Vec& x0, const Vec& y,
                  const ShootingOptions& opts = {});

/// Geodesic distance d_g(x0, y) = |log_map(x0, y)|_g.  Throws
/// NonConvergenceError (carrying the best residual) if no start converges.
double geodesic_distance(const ChartManifold& m, const Vec& x0, const Vec& y,
                         const ShootingOptions& opts = {});

/// Parallel transport of the column vectors of V0 along a sampled path,
/// integrating Vd^k = -Gamma^k_jl xd^j V^l with one RK4 step per segment.
Mat parallel_transport(const ChartManifold& m, const SampledPath& path,
                       const Mat& V0);

/// Geodesic polar map around a center point: shoots unit-speed geodesics in
/// a fan of directions and inverts the resulting mesh to evaluate d_g(center, z)
/// for z inside the covered disc.  Built once, then queried many times;
/// queries outside the mesh return +infinity.
class GeodesicPolarMap {
 public:
  GeodesicPolarMap(const ChartManifold& m, const Vec& center, double radius,
                   int n_rays = 256, int n_radial = 64);

  double radius() const { return radius_; }
  /// d_g(center, z), or +inf when z is outside the covered disc.
  double distance(const Vec& z) const;

  /// Quadrature of exp(-d_g^2 / 2h^2) against the Riemannian volume over the
  /// covered disc, cell by cell on the polar mesh.
  double volume_weighted_gaussian(const ChartManifold& m, double h) const;

 private:
  int n_rays_;
  int n_radial_;
  double radius_;
  double dr_;
  Vec center_;
  Mat g_center_chol_;               // chart->g-orthonormal change of basis
  std::vector<std::vector<Vec>> mesh_;  // mesh_[ray][radial] chart points

  Vec mesh_point(double ray_pos, double r_pos) const;  // bilinear, periodic
};

}  // namespace frameflow
