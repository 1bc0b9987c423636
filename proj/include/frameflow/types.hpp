#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace frameflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Thrown when an integration leaves the chart domain.  Carries the time at
/// which the domain predicate first failed.
class ChartExitError : public Error {
 public:
  ChartExitError(const std::string& what, double exit_time)
      : Error(what), exit_time_(exit_time) {}
  double exit_time() const { return exit_time_; }

 private:
  double exit_time_ = 0.0;
};

/// Thrown by iterative solvers that fail to reach their residual tolerance.
/// Carries the best residual seen and the best objective value so the caller
/// can decide whether the answer is still usable.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double best_residual,
                      double best_value)
      : Error(what), best_residual_(best_residual), best_value_(best_value) {}
  double best_residual() const { return best_residual_; }
  double best_value() const { return best_value_; }

 private:
  double best_residual_ = 0.0;
  double best_value_ = 0.0;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

/// A path sampled on a fixed time grid.  Node values may live in R^n
/// (Euclidean driving paths, chart points on M) or in R^{n+n^2} (frame
/// bundle states); the value dimension is uniform along one path.
struct SampledPath {
  Vec times;                 // strictly increasing, times[0] is the start
  std::vector<Vec> values;   // one value per time node

  SampledPath() = default;
  SampledPath(Vec t, std::vector<Vec> v)
      : times(std::move(t)), values(std::move(v)) {}

  int size() const { return static_cast<int>(values.size()); }
  int value_dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
  double duration() const { return times.size() > 0 ? times(times.size() - 1) - times(0) : 0.0; }
  const Vec& front() const { return values.front(); }
  const Vec& back() const { return values.back(); }

  /// Uniform grid on [0, T] with `steps` segments (steps+1 nodes), values
  /// left empty for the caller to fill.
  static Vec uniform_times(double T, int steps) {
    Vec t(steps + 1);
    for (int k = 0; k <= steps; ++k) t(k) = T * static_cast<double>(k) / steps;
    return t;
  }
};

/// Point of the frame bundle in chart coordinates: a base point x and an
/// invertible matrix alpha whose column i holds the chart coordinates of
/// frame vector u_i.
struct FramePoint {
  Vec x;
  Mat alpha;

  FramePoint() = default;
  FramePoint(Vec x_, Mat alpha_) : x(std::move(x_)), alpha(std::move(alpha_)) {}

  int dim() const { return static_cast<int>(x.size()); }

  /// Flat encoding [x; vec(alpha)] with alpha stored column-major, used as
  /// the chart coordinate vector on the frame bundle.
  Vec encode() const {
    const int n = dim();
    Vec q(n + n * n);
    q.head(n) = x;
    for (int i = 0; i < n; ++i) q.segment(n + i * n, n) = alpha.col(i);
    return q;
  }

  static FramePoint decode(const Vec& q, int n) {
    FramePoint u;
    u.x = q.head(n);
    u.alpha.resize(n, n);
    for (int i = 0; i < n; ++i) u.alpha.col(i) = q.segment(n + i * n, n);
    return u;
  }
};

/// Point of the bundle of symmetric positive definite 2-tensors: base point
/// x and the precision tensor sigma with entries sigma(d_i, d_j).
struct SymPoint {
  Vec x;
  Mat sigma;

  SymPoint() = default;
  SymPoint(Vec x_, Mat sigma_) : x(std::move(x_)), sigma(std::move(sigma_)) {}

  int dim() const { return static_cast<int>(x.size()); }
};

inline constexpr double kFrameDetFloor = 1e-12;
inline constexpr double kSymEigFloor = 1e-12;

/// det guard used by all frame-consuming operations.
void validate_frame(const FramePoint& u);
void validate_sym(const SymPoint& s);

}  // namespace frameflow
