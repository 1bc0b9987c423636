#include "frameflow/geometry.hpp"

#include "frameflow/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace frameflow {

namespace {

std::string point_str(const Vec& x) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << ")";
  return os.str();
}

}  // namespace

void validate_frame(const FramePoint& u) {
  if (u.alpha.rows() != u.dim() || u.alpha.cols() != u.dim())
    throw ConfigError("frame matrix shape does not match base dimension");
  if (std::abs(u.alpha.determinant()) <= kFrameDetFloor)
    throw NumericalError("frame is numerically singular, |det alpha| <= 1e-12");
}

void validate_sym(const SymPoint& s) {
  if (s.sigma.rows() != s.dim() || s.sigma.cols() != s.dim())
    throw ConfigError("sigma shape does not match base dimension");
  if ((s.sigma - s.sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw ConfigError("sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(s.sigma);
  if (es.eigenvalues().minCoeff() <= kSymEigFloor)
    throw NumericalError("sigma is not positive definite");
}

ChartManifold::ChartManifold(int dim, MetricFn metric, DomainFn domain,
                             ChristoffelFn christoffel, double fd_step,
                             std::string name)
    : dim_(dim),
      metric_(std::move(metric)),
      domain_(std::move(domain)),
      christoffel_(std::move(christoffel)),
      fd_step_(fd_step),
      name_(std::move(name)) {
  if (dim_ < 1) throw ConfigError("manifold dimension must be positive");
  if (fd_step_ <= 0) throw ConfigError("fd_step must be positive");
}

bool ChartManifold::in_domain(const Vec& x) const {
  if (x.size() != dim_) return false;
  if (!x.allFinite()) return false;
  return domain_ ? domain_(x) : true;
}

void ChartManifold::require_domain(const Vec& x) const {
  if (!in_domain(x))
    throw ConfigError("point " + point_str(x) + " is outside the chart domain of " + name_);
}

Mat ChartManifold::metric(const Vec& x) const {
  require_domain(x);
  Mat g = metric_(x);
  if (g.rows() != dim_ || g.cols() != dim_)
    throw NumericalError("metric function returned wrong shape");
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + g.cwiseAbs().maxCoeff()))
    throw NumericalError("metric matrix is not symmetric at " + point_str(x));
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success)
    throw NumericalError("metric matrix is not positive definite at " + point_str(x));
  return g;
}

Mat ChartManifold::metric_inverse(const Vec& x) const {
  Mat g = metric(x);
  return g.llt().solve(Mat::Identity(dim_, dim_));
}

Christoffel ChartManifold::christoffel_fd(const Vec& x) const {
  const int n = dim_;
  const double h = fd_step_;
  // dg[l](i,j) = d_l g_ij by central differences
  std::vector<Mat> dg(n);
  for (int l = 0; l < n; ++l) {
    Vec xp = x, xm = x;
    xp(l) += h;
    xm(l) -= h;
    dg[l] = (metric_(xp) - metric_(xm)) / (2.0 * h);
  }
  Mat ginv = metric_inverse(x);
  Christoffel gamma(n, Mat::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l)
          s += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        gamma[k](i, j) = 0.5 * s;
        gamma[k](j, i) = gamma[k](i, j);
      }
  return gamma;
}

Christoffel ChartManifold::christoffel(const Vec& x) const {
  require_domain(x);
  if (christoffel_) return christoffel_(x);
  return christoffel_fd(x);
}

Tensor4 curvature(const ChartManifold& m, const Vec& x) {
  const int n = m.dim();
  const double h = m.fd_step();
  // dgamma[i][k](j,l)... store as dgamma[i] = Christoffel differentiated in x^i
  std::vector<Christoffel> dgamma(n);
  for (int i = 0; i < n; ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    Christoffel gp = m.christoffel(xp);
    Christoffel gm = m.christoffel(xm);
    dgamma[i].resize(n);
    for (int k = 0; k < n; ++k) dgamma[i][k] = (gp[k] - gm[k]) / (2.0 * h);
  }
  Christoffel gamma = m.christoffel(x);
  Tensor4 R(n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double val = dgamma[i][l](j, k) - dgamma[j][l](i, k);
          for (int mm = 0; mm < n; ++mm)
            val += gamma[l](i, mm) * gamma[mm](j, k) - gamma[l](j, mm) * gamma[mm](i, k);
          R(l, k, i, j) = val;
        }
  return R;
}

double scalar_curvature(const ChartManifold& m, const Vec& x) {
  const int n = m.dim();
  Tensor4 R = curvature(m, x);
  Mat ginv = m.metric_inverse(x);
  // Ricci_kj = R^i_{kij}
  Mat ric = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += R(i, k, i, j);
      ric(k, j) = s;
    }
  return (ginv.array() * ric.array()).sum();
}

int curvature_map_rank(const ChartManifold& m, const Vec& x, double svd_threshold) {
  const int n = m.dim();
  const int npairs = n * (n - 1) / 2;
  if (npairs == 0) return 0;
  Tensor4 R = curvature(m, x);
  // Change to a g-orthonormal basis E = L^{-T}, g = L L^T, so that so(n)
  // antisymmetry holds entrywise.
  Mat g = m.metric(x);
  Mat L = g.llt().matrixL();
  Mat E = L.transpose().inverse();     // columns: orthonormal basis vectors
  Mat Einv = L.transpose();
  // Rt^a_{bcd} = Einv(a,l) R^l_{kij} E(k,b) E(i,c) E(j,d)
  Tensor4 Rt(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          double s = 0.0;
          for (int l = 0; l < n; ++l)
            for (int k = 0; k < n; ++k)
              for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                  s += Einv(a, l) * R(l, k, i, j) * E(k, b) * E(i, c) * E(j, d);
          Rt(a, b, c, d) = s;
        }
  Mat map(npairs, npairs);
  int col = 0;
  for (int c = 0; c < n; ++c)
    for (int d = c + 1; d < n; ++d, ++col) {
      int row = 0;
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b, ++row) map(row, col) = Rt(a, b, c, d);
    }
  Eigen::JacobiSVD<Mat> svd(map);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > svd_threshold) ++rank;
  return rank;
}

namespace {

// RK4 on the first-order system y' = f(t, y).
template <typename F>
Vec rk4_step(const F& f, double t, const Vec& y, double dt) {
  Vec k1 = f(t, y);
  Vec k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
  Vec k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
  Vec k4 = f(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vec geodesic_rhs(const ChartManifold& m, const Vec& state) {
  const int n = m.dim();
  Vec x = state.head(n);
  Vec v = state.tail(n);
  Christoffel gamma = m.christoffel(x);
  Vec out(2 * n);
  out.head(n) = v;
  for (int k = 0; k < n; ++k) out(n + k) = -v.dot(gamma[k] * v);
  return out;
}

}  // namespace

SampledPath riemannian_geodesic(const ChartManifold& m, const Vec& x0,
                                const Vec& v0, double T, int steps) {
  const int n = m.dim();
  m.require_domain(x0);
  if (steps < 1) throw ConfigError("steps must be >= 1");
  SampledPath out;
  out.times = SampledPath::uniform_times(T, steps);
  out.values.reserve(steps + 1);
  Vec state(2 * n);
  state.head(n) = x0;
  state.tail(n) = v0;
  out.values.push_back(x0);
  const double dt = T / steps;
  auto rhs = [&m](double, const Vec& s) { return geodesic_rhs(m, s); };
  for (int k = 0; k < steps; ++k) {
    state = rk4_step(rhs, k * dt, state, dt);
    Vec x = state.head(n);
    if (!m.in_domain(x))
      throw ChartExitError("geodesic left the chart domain of " + m.name(),
                           (k + 1) * dt);
    out.values.push_back(x);
  }
  return out;
}

namespace {

Vec geodesic_endpoint(const ChartManifold& m, const Vec& x0, const Vec& v0,
                      int steps) {
  return riemannian_geodesic(m, x0, v0, 1.0, steps).back();
}

}  // namespace

LogResult log_map(const ChartManifold& m, const Vec& x0, const Vec& y,
                  const ShootingOptions& opts) {
  const int n = m.dim();
  m.require_domain(x0);
  m.require_domain(y);

  CounterRng rng(opts.seed ^ 0x6c8e944d1f3a5b7eULL);
  std::vector<Vec> starts;
  Vec chord = y - x0;
  starts.push_back(chord);
  for (int s = 1; s < opts.multistarts; ++s) {
    Vec v = chord;
    const double scale = (s % 2 == 0) ? 0.3 : 0.1;
    for (int i = 0; i < n; ++i)
      v(i) += scale * std::max(1.0, chord.norm()) * rng.normal(s, i);
    if (s == 1) v = 0.5 * chord;
    if (s == 2) v = 1.5 * chord;
    starts.push_back(v);
  }

  LogResult best;
  best.residual = std::numeric_limits<double>::infinity();
  best.converged = false;
  double best_norm = std::numeric_limits<double>::infinity();

  for (const Vec& v_start : starts) {
    Vec v = v_start;
    double lambda = 1e-8;
    double res = std::numeric_limits<double>::infinity();
    Vec F;
    try {
      F = geodesic_endpoint(m, x0, v, opts.steps) - y;
    } catch (const ChartExitError&) {
      continue;
    }
    res = F.cwiseAbs().maxCoeff();
    for (int it = 0; it < opts.max_iterations && res > opts.tol; ++it) {
      // finite-difference Jacobian of the endpoint map
      Mat J(n, n);
      const double h = 1e-6 * std::max(1.0, v.norm());
      bool jac_ok = true;
      for (int c = 0; c < n; ++c) {
        Vec vp = v, vm = v;
        vp(c) += h;
        vm(c) -= h;
        try {
          J.col(c) = (geodesic_endpoint(m, x0, vp, opts.steps) -
                      geodesic_endpoint(m, x0, vm, opts.steps)) /
                     (2.0 * h);
        } catch (const ChartExitError&) {
          jac_ok = false;
          break;
        }
      }
      if (!jac_ok) break;
      bool stepped = false;
      for (int tries = 0; tries < 12; ++tries) {
        Mat A = J.transpose() * J + lambda * Mat::Identity(n, n);
        Vec dv = A.llt().solve(J.transpose() * F);
        Vec v_new = v - dv;
        Vec F_new;
        try {
          F_new = geodesic_endpoint(m, x0, v_new, opts.steps) - y;
        } catch (const ChartExitError&) {
          lambda *= 10.0;
          continue;
        }
        if (F_new.norm() < F.norm()) {
          v = v_new;
          F = F_new;
          res = F.cwiseAbs().maxCoeff();
          lambda = std::max(lambda * 0.3, 1e-12);
          stepped = true;
          break;
        }
        lambda *= 10.0;
      }
      if (!stepped) break;
    }
    if (res < best.residual) {
      best.residual = res;
    }
    if (res <= opts.tol) {
      Mat g = m.metric(x0);
      const double vnorm = std::sqrt(v.dot(g * v));
      if (!best.converged || vnorm < best_norm) {
        best.v0 = v;
        best_norm = vnorm;
        best.converged = true;
        best.residual = res;
      }
    }
  }
  if (!best.converged)
    throw NonConvergenceError(
        "log map shooting did not converge on " + m.name() + " toward " +
            point_str(y) + " (best residual " + std::to_string(best.residual) + ")",
        best.residual, best_norm);
  return best;
}

double geodesic_distance(const ChartManifold& m, const Vec& x0, const Vec& y,
                         const ShootingOptions& opts) {
  if ((y - x0).norm() == 0.0) return 0.0;
  LogResult lr = log_map(m, x0, y, opts);
  Mat g = m.metric(x0);
  return std::sqrt(lr.v0.dot(g * lr.v0));
}

Mat parallel_transport(const ChartManifold& m, const SampledPath& path,
                       const Mat& V0) {
  const int n = m.dim();
  if (path.size() < 2) throw ConfigError("transport path needs at least 2 nodes");
  if (V0.rows() != n) throw ConfigError("vector block row count must equal dim");
  Mat V = V0;
  for (int k = 0; k + 1 < path.size(); ++k) {
    const Vec& a = path.values[k];
    const Vec& b = path.values[k + 1];
    const double dt = path.times(k + 1) - path.times(k);
    if (dt <= 0) throw ConfigError("path times must be strictly increasing");
    Vec xdot = (b - a) / dt;
    auto rhs = [&](double t, const Vec& flat) {
      Vec x = a + ((t - path.times(k)) / dt) * (b - a);
      if (!m.in_domain(x))
        throw ChartExitError("transport path left the chart domain", t);
      Christoffel gamma = m.christoffel(x);
      Mat Vt = Eigen::Map<const Mat>(flat.data(), n, V0.cols());
      Mat dV(n, V0.cols());
      for (int c = 0; c < V0.cols(); ++c)
        for (int kk = 0; kk < n; ++kk)
          dV(kk, c) = -xdot.dot(gamma[kk] * Vt.col(c));
      return Vec(Eigen::Map<Vec>(dV.data(), n * V0.cols()));
    };
    Vec flat = Eigen::Map<Vec>(V.data(), n * V0.cols());
    flat = rk4_step(rhs, path.times(k), flat, dt);
    V = Eigen::Map<Mat>(flat.data(), n, V0.cols());
  }
  return V;
}

GeodesicPolarMap::GeodesicPolarMap(const ChartManifold& m, const Vec& center,
                                   double radius, int n_rays, int n_radial)
    : n_rays_(n_rays), n_radial_(n_radial), radius_(radius), center_(center) {
  if (m.dim() != 2)
    throw ConfigError("geodesic polar map is implemented for 2d charts only");
  m.require_domain(center);
  dr_ = radius_ / n_radial_;
  Mat g = m.metric(center);
  Mat L = g.llt().matrixL();
  g_center_chol_ = L;
  mesh_.assign(n_rays_, {});
  const int substeps = 4;
  for (int r = 0; r < n_rays_; ++r) {
    const double phi = 2.0 * M_PI * r / n_rays_;
    // g-unit initial direction
    Vec e(2);
    e << std::cos(phi), std::sin(phi);
    Vec v = L.transpose().triangularView<Eigen::Upper>().solve(e);
    std::vector<Vec>& ray = mesh_[r];
    ray.reserve(n_radial_ + 1);
    ray.push_back(center);
    Vec state(4);
    state.head(2) = center;
    state.tail(2) = v;
    auto rhs = [&m](double, const Vec& s) { return geodesic_rhs(m, s); };
    bool alive = true;
    for (int j = 1; j <= n_radial_ && alive; ++j) {
      const double h = dr_ / substeps;
      for (int s = 0; s < substeps; ++s) {
        state = rk4_step(rhs, 0.0, state, h);
        if (!m.in_domain(state.head(2))) {
          alive = false;
          break;
        }
      }
      if (alive) ray.push_back(state.head(2));
    }
  }
}

Vec GeodesicPolarMap::mesh_point(double ray_pos, double r_pos) const {
  // bilinear on the (periodic in ray, clamped in radius) mesh
  r_pos = std::clamp(r_pos, 0.0, static_cast<double>(n_radial_));
  double rp = ray_pos - std::floor(ray_pos / n_rays_) * n_rays_;
  int r0 = static_cast<int>(std::floor(rp)) % n_rays_;
  int r1 = (r0 + 1) % n_rays_;
  double fr = rp - std::floor(rp);
  int j0 = std::min(static_cast<int>(std::floor(r_pos)), n_radial_ - 1);
  double fj = r_pos - j0;
  auto node = [&](int ray, int j) -> const Vec& {
    const auto& col = mesh_[ray];
    static const Vec invalid;
    if (j < static_cast<int>(col.size())) return col[j];
    return col.back();  // truncated ray: clamp (query will be rejected by radius)
  };
  return (1 - fr) * ((1 - fj) * node(r0, j0) + fj * node(r0, j0 + 1)) +
         fr * ((1 - fj) * node(r1, j0) + fj * node(r1, j0 + 1));
}

double GeodesicPolarMap::volume_weighted_gaussian(const ChartManifold& m,
                                                  double h) const {
  double Z = 0.0;
  for (int r = 0; r < n_rays_; ++r) {
    const auto& ray0 = mesh_[r];
    const auto& ray1 = mesh_[(r + 1) % n_rays_];
    for (int j = 0; j + 1 < n_radial_ + 1; ++j) {
      if (j + 1 >= static_cast<int>(ray0.size()) ||
          j + 1 >= static_cast<int>(ray1.size()))
        break;  // truncated ray
      const Vec& A = ray0[j];
      const Vec& B = ray1[j];
      const Vec& C = ray1[j + 1];
      const Vec& D = ray0[j + 1];
      const double area =
          0.5 * std::abs(A(0) * (B(1) - D(1)) + B(0) * (C(1) - A(1)) +
                         C(0) * (D(1) - B(1)) + D(0) * (A(1) - C(1)));
      if (area <= 0) continue;
      Vec centroid = 0.25 * (A + B + C + D);
      if (!m.in_domain(centroid)) continue;
      const double rc = (j + 0.5) * dr_;
      Z += std::exp(-0.5 * rc * rc / (h * h)) *
           std::sqrt(m.metric(centroid).determinant()) * area;
    }
  }
  return Z;
}

double GeodesicPolarMap::distance(const Vec& z) const {
  const double inf = std::numeric_limits<double>::infinity();
  Vec u = g_center_chol_.transpose() * (z - center_);
  double r_guess = u.norm();
  if (r_guess >= radius_) return inf;
  if (r_guess < 2.0 * dr_) return r_guess;  // first-order exact near the center
  double phi = std::atan2(u(1), u(0));
  if (phi < 0) phi += 2.0 * M_PI;
  double ray_pos = phi / (2.0 * M_PI) * n_rays_;
  double r_pos = r_guess / dr_;
  // Newton on the bilinear surface
  for (int it = 0; it < 30; ++it) {
    Vec P = mesh_point(ray_pos, r_pos);
    Vec F = P - z;
    if (F.cwiseAbs().maxCoeff() < 1e-12) break;
    const double hq = 1e-3;
    Mat J(2, 2);
    J.col(0) = (mesh_point(ray_pos + hq, r_pos) - mesh_point(ray_pos - hq, r_pos)) / (2 * hq);
    J.col(1) = (mesh_point(ray_pos, r_pos + hq) - mesh_point(ray_pos, r_pos - hq)) / (2 * hq);
    Eigen::Vector2d step = J.fullPivLu().solve(F);
    if (!step.allFinite()) return inf;
    ray_pos -= step(0);
    r_pos -= step(1);
    if (r_pos < 0) r_pos = 0;
    if (r_pos > n_radial_) return inf;
  }
  // reject queries that landed on a truncated ray
  int ray_idx = static_cast<int>(std::floor(ray_pos)) % n_rays_;
  if (ray_idx < 0) ray_idx += n_rays_;
  if (static_cast<int>(mesh_[ray_idx].size()) <= static_cast<int>(r_pos) + 1)
    return inf;
  return r_pos * dr_;
}

}  // namespace frameflow
