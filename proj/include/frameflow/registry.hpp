#pragma once

#include "frameflow/geometry.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace frameflow {

namespace manifolds {

ChartManifold euclidean(int n);

/// Sphere of radius r in the spherical-angle chart (theta, phi), poles
/// excluded; theta is the colatitude.
ChartManifold sphere(double r = 1.0);

/// Triaxial ellipsoid (a, b, c) in the spherical-angle chart with the
/// metric induced by the embedding.
ChartManifold ellipsoid(double a, double b, double c);

/// Flat torus presented on its universal-cover chart: identity metric,
/// unbounded domain.  Periods are recorded in the name only; all operations
/// here are local.
ChartManifold flat_torus(double Lx = 1.0, double Ly = 1.0);

ChartManifold hyperbolic_halfplane();

/// Chart built from an embedding into R^3.  When the analytic Jacobian or
/// second derivatives are not supplied they are obtained by central
/// differences of the embedding.
using EmbeddingFn = std::function<Eigen::Vector3d(const Vec&)>;
using EmbeddingJacobianFn = std::function<Eigen::Matrix<double, 3, 2>(const Vec&)>;
/// hess(x)(i, j) = second derivative of the embedding in chart directions i, j.
using EmbeddingHessianFn =
    std::function<std::array<std::array<Eigen::Vector3d, 2>, 2>(const Vec&)>;

ChartManifold embedded_surface(EmbeddingFn embedding,
                               EmbeddingJacobianFn jacobian = nullptr,
                               EmbeddingHessianFn hessian = nullptr,
                               DomainFn domain = nullptr,
                               std::string name = "embedded-surface");

}  // namespace manifolds

/// Parses a registry key such as "sphere(1)", "euclidean(2)",
/// "ellipsoid(1,1,0.6)", "flat-torus(1,1)" or "hyperbolic-halfplane" and
/// builds the manifold.  Unknown names raise ConfigError listing the keys.
ChartManifold make_manifold(const std::string& spec);

std::vector<std::string> registry_keys();

}  // namespace frameflow
