#include "frameflow/frame_bundle.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace frameflow {

Mat horizontal_basis(const ChartManifold& m, const FramePoint& u) {
  const int n = m.dim();
  validate_frame(u);
  m.require_domain(u.x);
  Christoffel gamma = m.christoffel(u.x);
  Mat H(n + n * n, n);
  for (int i = 0; i < n; ++i) {
    H.col(i).head(n) = u.alpha.col(i);
    for (int mcol = 0; mcol < n; ++mcol) {
      // d/dt alpha^k_m while the base moves along u_i
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          s += u.alpha(j, i) * gamma[k].row(j).dot(u.alpha.col(mcol));
        H(n + mcol * n + k, i) = -s;
      }
    }
  }
  return H;
}

SymPoint sigma_of(const FramePoint& u) {
  validate_frame(u);
  const int n = u.dim();
  Mat aat = u.alpha * u.alpha.transpose();
  SymPoint s;
  s.x = u.x;
  s.sigma = aat.llt().solve(Mat::Identity(n, n));
  // symmetrize against round-off
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
  return s;
}

FramePoint act(const FramePoint& u, const Mat& a) {
  validate_frame(u);
  if (a.rows() != u.dim() || a.cols() != u.dim())
    throw ConfigError("group element has wrong shape");
  if (std::abs(a.determinant()) <= kFrameDetFloor)
    throw NumericalError("group element is numerically singular");
  return FramePoint(u.x, u.alpha * a);
}

FramePoint lift_sym(const SymPoint& s) {
  validate_sym(s);
  const int n = s.dim();
  Mat sigma_inv = s.sigma.llt().solve(Mat::Identity(n, n));
  sigma_inv = 0.5 * (sigma_inv + sigma_inv.transpose());
  Mat L = sigma_inv.llt().matrixL();
  return FramePoint(s.x, L);
}

FramePoint orthonormal_frame(const ChartManifold& m, const Vec& x) {
  Mat g = m.metric(x);
  Mat L = g.llt().matrixL();
  Mat E = L.transpose()
              .triangularView<Eigen::Upper>()
              .solve(Mat::Identity(m.dim(), m.dim()));
  return FramePoint(x, E);
}

namespace {

// RHS of the driven horizontal ODE at state q with driving velocity wdot.
Vec horizontal_rhs(const ChartManifold& m, const Vec& q, const Vec& wdot) {
  const int n = m.dim();
  FramePoint u = FramePoint::decode(q, n);
  if (!m.in_domain(u.x)) throw ChartExitError("development left the chart", 0.0);
  if (std::abs(u.alpha.determinant()) < 1e-10)
    throw NumericalError("frame degenerated during development");
  Mat H = horizontal_basis(m, u);
  return H * wdot;
}

}  // namespace

SampledPath develop(const ChartManifold& m, const FramePoint& u0,
                    const SampledPath& w) {
  const int n = m.dim();
  validate_frame(u0);
  m.require_domain(u0.x);
  if (w.size() < 2) throw ConfigError("driving path needs at least 2 nodes");
  if (w.value_dim() != n) throw ConfigError("driving path dimension mismatch");
  if (w.front().norm() > 1e-14) throw ConfigError("driving path must start at 0");

  SampledPath out;
  out.times = w.times;
  out.values.reserve(w.size());
  Vec q = u0.encode();
  out.values.push_back(q);
  for (int k = 0; k + 1 < w.size(); ++k) {
    const double dt = w.times(k + 1) - w.times(k);
    if (dt <= 0) throw ConfigError("driving times must be strictly increasing");
    Vec wdot = (w.values[k + 1] - w.values[k]) / dt;
    auto rhs = [&](double, const Vec& s) { return horizontal_rhs(m, s, wdot); };
    // single RK4 step over the segment
    Vec k1, k2, k3, k4;
    try {
      k1 = rhs(0, q);
      k2 = rhs(0, q + 0.5 * dt * k1);
      k3 = rhs(0, q + 0.5 * dt * k2);
      k4 = rhs(0, q + dt * k3);
    } catch (const ChartExitError&) {
      throw ChartExitError("development left the chart domain of " + m.name(),
                           w.times(k));
    }
    q = q + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    FramePoint u = FramePoint::decode(q, n);
    if (!m.in_domain(u.x))
      throw ChartExitError("development left the chart domain of " + m.name(),
                           w.times(k + 1));
    out.values.push_back(q);
  }
  return out;
}

SampledPath antidevelop(const ChartManifold& m, const FramePoint& u0,
                        const SampledPath& gamma) {
  const int n = m.dim();
  validate_frame(u0);
  if (gamma.size() < 2) throw ConfigError("path needs at least 2 nodes");
  if (gamma.value_dim() != n) throw ConfigError("path dimension mismatch");
  if ((gamma.front() - u0.x).norm() > 1e-10)
    throw ConfigError("path must start at the frame base point");

  SampledPath out;
  out.times = gamma.times;
  out.values.reserve(gamma.size());
  out.values.push_back(Vec::Zero(n));

  // joint state: [vec(alpha); w]
  Vec state(n * n + n);
  for (int i = 0; i < n; ++i) state.segment(i * n, n) = u0.alpha.col(i);
  state.tail(n).setZero();

  for (int k = 0; k + 1 < gamma.size(); ++k) {
    const Vec& a = gamma.values[k];
    const Vec& b = gamma.values[k + 1];
    const double dt = gamma.times(k + 1) - gamma.times(k);
    if (dt <= 0) throw ConfigError("path times must be strictly increasing");
    Vec xdot = (b - a) / dt;
    auto rhs = [&](double s, const Vec& st) {
      Vec x = a + s * (b - a);  // s in [0,1] across the segment
      if (!m.in_domain(x))
        throw ChartExitError("anti-development left the chart", gamma.times(k));
      Christoffel G = m.christoffel(x);
      Mat alpha(n, n);
      for (int i = 0; i < n; ++i) alpha.col(i) = st.segment(i * n, n);
      Vec d(n * n + n);
      for (int i = 0; i < n; ++i)
        for (int kk = 0; kk < n; ++kk)
          d(i * n + kk) = -xdot.dot(G[kk] * alpha.col(i));
      d.tail(n) = alpha.partialPivLu().solve(xdot);
      return d;
    };
    // RK4 with the segment parametrized on [0, 1], velocities scaled by dt
    Vec k1 = rhs(0.0, state);
    Vec k2 = rhs(0.5, state + 0.5 * dt * k1);
    Vec k3 = rhs(0.5, state + 0.5 * dt * k2);
    Vec k4 = rhs(1.0, state + dt * k3);
    state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.values.push_back(state.tail(n));
  }
  return out;
}

SampledPath base_path(const SampledPath& fm_path, int n) {
  SampledPath out;
  out.times = fm_path.times;
  out.values.reserve(fm_path.size());
  for (const auto& q : fm_path.values) out.values.push_back(q.head(n));
  return out;
}

}  // namespace frameflow
