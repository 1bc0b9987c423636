#include "frameflow/subriemannian.hpp"

#include "frameflow/parallel.hpp"
#include "frameflow/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace frameflow {

namespace {

constexpr double kGradStep = 1e-6;  // dH/dq finite-difference step

// Horizontal basis assembled from precomputed Christoffels; lets the
// alpha-direction derivatives of H reuse Gamma(x).
Mat horizontal_from(const Christoffel& gamma, const Mat& alpha) {
  const int n = static_cast<int>(alpha.rows());
  Mat H(n + n * n, n);
  for (int i = 0; i < n; ++i) {
    H.col(i).head(n) = alpha.col(i);
    for (int mcol = 0; mcol < n; ++mcol)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j)
          s += alpha(j, i) * gamma[k].row(j).dot(alpha.col(mcol));
        H(n + mcol * n + k, i) = -s;
      }
  }
  return H;
}

double hamiltonian_from(const Christoffel& gamma, const Mat& alpha, const Vec& p) {
  Mat H = horizontal_from(gamma, alpha);
  return 0.5 * (H.transpose() * p).squaredNorm();
}

// RHS of Hamilton's equations at z = [q; p].
Vec hamiltonian_rhs(const ChartManifold& m, const Vec& z) {
  const int n = m.dim();
  const int nq = n + n * n;
  Vec q = z.head(nq);
  Vec p = z.tail(nq);
  FramePoint u = FramePoint::decode(q, n);
  if (!m.in_domain(u.x))
    throw ChartExitError("geodesic flow left the chart domain of " + m.name(), 0.0);
  if (std::abs(u.alpha.determinant()) < 1e-10)
    throw NumericalError("frame degenerated during geodesic flow");
  Christoffel gamma0 = m.christoffel(u.x);
  Mat H = horizontal_from(gamma0, u.alpha);
  Vec c = H.transpose() * p;

  Vec dz(2 * nq);
  dz.head(nq) = H * c;  // dH/dp

  Vec dHdq(nq);
  // base coordinates: Christoffels move
  for (int j = 0; j < n; ++j) {
    Vec xp = u.x, xm = u.x;
    xp(j) += kGradStep;
    xm(j) -= kGradStep;
    if (!m.in_domain(xp) || !m.in_domain(xm))
      throw ChartExitError("geodesic flow reached the chart boundary of " + m.name(), 0.0);
    const double hp = hamiltonian_from(m.christoffel(xp), u.alpha, p);
    const double hm = hamiltonian_from(m.christoffel(xm), u.alpha, p);
    dHdq(j) = (hp - hm) / (2.0 * kGradStep);
  }
  // fiber coordinates: Gamma(x) is reused
  for (int idx = n; idx < nq; ++idx) {
    const int col = (idx - n) / n;
    const int row = (idx - n) % n;
    Mat ap = u.alpha, am = u.alpha;
    ap(row, col) += kGradStep;
    am(row, col) -= kGradStep;
    const double hp = hamiltonian_from(gamma0, ap, p);
    const double hm = hamiltonian_from(gamma0, am, p);
    dHdq(idx) = (hp - hm) / (2.0 * kGradStep);
  }
  dz.tail(nq) = -dHdq;
  return dz;
}

Vec flow_rk4(const ChartManifold& m, Vec z, double dt) {
  Vec k1 = hamiltonian_rhs(m, z);
  Vec k2 = hamiltonian_rhs(m, z + 0.5 * dt * k1);
  Vec k3 = hamiltonian_rhs(m, z + 0.5 * dt * k2);
  Vec k4 = hamiltonian_rhs(m, z + dt * k3);
  return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

double hamiltonian(const ChartManifold& m, const CotangentState& s) {
  const int n = m.dim();
  FramePoint u = FramePoint::decode(s.q, n);
  validate_frame(u);
  m.require_domain(u.x);
  Mat H = horizontal_basis(m, u);
  return 0.5 * (H.transpose() * s.p).squaredNorm();
}

SampledPath geodesic_flow(const ChartManifold& m, const CotangentState& s0,
                          double T, int steps) {
  const int n = m.dim();
  const int nq = n + n * n;
  if (s0.q.size() != nq || s0.p.size() != nq)
    throw ConfigError("cotangent state has wrong dimension");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  SampledPath out;
  out.times = SampledPath::uniform_times(T, steps);
  out.values.reserve(steps + 1);
  Vec z(2 * nq);
  z.head(nq) = s0.q;
  z.tail(nq) = s0.p;
  out.values.push_back(z);
  const double dt = T / steps;
  for (int k = 0; k < steps; ++k) {
    try {
      z = flow_rk4(m, z, dt);
    } catch (ChartExitError&) {
      throw ChartExitError("geodesic flow left the chart domain of " + m.name(),
                           (k + 1) * dt);
    }
    FramePoint u = FramePoint::decode(z.head(nq), n);
    if (!m.in_domain(u.x))
      throw ChartExitError("geodesic flow left the chart domain of " + m.name(),
                           (k + 1) * dt);
    out.values.push_back(z);
  }
  return out;
}

FramePoint sr_exp(const ChartManifold& m, const FramePoint& u0, const Vec& p0,
                  double T, int steps) {
  const int n = m.dim();
  CotangentState s0{u0.encode(), p0};
  if (p0.squaredNorm() == 0.0) return u0;  // rest point
  SampledPath flow = geodesic_flow(m, s0, T, steps);
  return FramePoint::decode(flow.back().head(n + n * n), n);
}

namespace {

// Endpoint base coordinates of the unit-time normal geodesic; nq-dim covector.
Vec shoot_base_endpoint(const ChartManifold& m, const Vec& q0, const Vec& p0,
                        int steps) {
  const int n = m.dim();
  const int nq = n + n * n;
  Vec z(2 * nq);
  z.head(nq) = q0;
  z.tail(nq) = p0;
  const double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) z = flow_rk4(m, z, dt);
  return z.head(n);
}

struct StartOutcome {
  Vec p;
  double residual = std::numeric_limits<double>::infinity();
  double length = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool valid = false;
};

// One multi-start branch: penalty continuation + projected refinement.
StartOutcome run_start(const ChartManifold& m, const Vec& q0, const Mat& A,
                       const Vec& y, Vec p, const FiberShootingOptions& opts) {
  const int nq = static_cast<int>(p.size());
  const int n = m.dim();
  StartOutcome out;

  auto constraint = [&](const Vec& pp) -> Vec {
    return shoot_base_endpoint(m, q0, pp, opts.steps) - y;
  };
  auto constraint_jac = [&](const Vec& pp) -> Mat {
    Mat J(n, nq);
    const double h = 1e-6 * std::max(1.0, pp.norm());
    for (int ccol = 0; ccol < nq; ++ccol) {
      Vec pl = pp, pr = pp;
      pr(ccol) += h;
      pl(ccol) -= h;
      J.col(ccol) = (constraint(pr) - constraint(pl)) / (2.0 * h);
    }
    return J;
  };

  Vec c;
  try {
    c = constraint(p);
  } catch (const Error&) {
    return out;  // start unusable (chart exit / degeneration)
  }

  try {
    for (double mu : {1e2, 1e4, 1e6}) {
      const double smu = std::sqrt(mu);
      double lambda = 1e-6;
      for (int it = 0; it < opts.max_iterations; ++it) {
        const double merit = (A * p).squaredNorm() + mu * c.squaredNorm();
        if (c.cwiseAbs().maxCoeff() < 0.1 * opts.ctol) break;
        Mat Jc = constraint_jac(p);
        // stacked residual [A p; smu c], Jacobian [A; smu Jc]
        Mat JtJ = A.transpose() * A + mu * Jc.transpose() * Jc;
        Vec g = A.transpose() * (A * p) + mu * Jc.transpose() * c;
        if (g.cwiseAbs().maxCoeff() < 1e-14) break;
        bool stepped = false;
        for (int tries = 0; tries < 14; ++tries) {
          Mat Areg = JtJ + lambda * Mat::Identity(nq, nq);
          Vec dp = Areg.llt().solve(g);
          Vec p_new = p - dp;
          Vec c_new;
          try {
            c_new = constraint(p_new);
          } catch (const Error&) {
            lambda = std::max(lambda * 10.0, 1e-8);
            continue;
          }
          const double merit_new = (A * p_new).squaredNorm() + mu * c_new.squaredNorm();
          if (merit_new < merit) {
            p = p_new;
            c = c_new;
            lambda = std::max(lambda * 0.3, 1e-12);
            stepped = true;
            break;
          }
          lambda = std::max(lambda * 10.0, 1e-8);
        }
        if (!stepped) break;
      }
    }
    // projected refinement: minimum-norm Newton steps on the constraint alone
    for (int it = 0; it < 8 && c.cwiseAbs().maxCoeff() > 0.01 * opts.ctol; ++it) {
      Mat Jc = constraint_jac(p);
      Mat JJt = Jc * Jc.transpose();
      JJt.diagonal().array() += 1e-12;
      Vec dp = Jc.transpose() * JJt.llt().solve(c);
      Vec p_new = p - dp;
      Vec c_new;
      try {
        c_new = constraint(p_new);
      } catch (const Error&) {
        break;
      }
      if (c_new.norm() >= c.norm()) break;
      p = p_new;
      c = c_new;
    }
  } catch (const Error&) {
    return out;
  }

  out.p = p;
  out.residual = c.cwiseAbs().maxCoeff();
  out.length = (A * p).norm();
  out.converged = out.residual <= opts.ctol;
  out.valid = true;
  return out;
}

}  // namespace

GeodesicResult shoot_to_fiber(const ChartManifold& m, const FramePoint& u0,
                              const Vec& y, const FiberShootingOptions& opts) {
  const int n = m.dim();
  const int nq = n + n * n;
  validate_frame(u0);
  m.require_domain(u0.x);
  m.require_domain(y);

  GeodesicResult result;
  result.initial_covector = Vec::Zero(nq);

  // degenerate query: the fiber over the base point itself
  if ((y - u0.x).norm() == 0.0) {
    SampledPath path;
    path.times = SampledPath::uniform_times(1.0, 1);
    path.values = {u0.encode(), u0.encode()};
    result.path = path;
    result.length = 0.0;
    result.endpoint_residual = 0.0;
    result.converged = true;
    return result;
  }

  Mat Hb = horizontal_basis(m, u0);
  Mat A = Hb.transpose();  // length^2 = |A p|^2 = 2 H(q0, p)
  Vec q0 = u0.encode();

  // horizontal dual of the chart-coordinate difference: base velocity
  // alpha alpha^T p_x matches the chord in the flat case
  Mat aat = u0.alpha * u0.alpha.transpose();
  Vec px = aat.llt().solve(y - u0.x);

  std::vector<Vec> starts = opts.warm_starts;
  {
    Vec p0 = Vec::Zero(nq);
    p0.head(n) = px;
    starts.push_back(p0);
    CounterRng rng(opts.seed ^ 0x51f0e9b3a96c2dULL);
    int s = static_cast<int>(starts.size());
    while (static_cast<int>(starts.size()) < static_cast<int>(opts.warm_starts.size()) + opts.multistarts) {
      Vec p = Vec::Zero(nq);
      const double vertical_scale = (s % 2 == 0) ? 0.1 : 1.0;
      const double base_jitter = (s % 3 == 2) ? 0.3 : 0.0;
      for (int i = 0; i < n; ++i)
        p(i) = px(i) * (1.0 + base_jitter * rng.normal(s, i));
      for (int i = n; i < nq; ++i)
        p(i) = vertical_scale * px.norm() * rng.normal(s, i);
      starts.push_back(p);
      ++s;
    }
  }

  std::vector<StartOutcome> outcomes(starts.size());
  parallel_for(
      starts.size(),
      [&](std::size_t i) { outcomes[i] = run_start(m, q0, A, y, starts[i], opts); },
      opts.threads);

  const StartOutcome* best = nullptr;
  for (const auto& o : outcomes) {
    if (!o.valid) continue;
    if (best == nullptr) {
      best = &o;
      continue;
    }
    const bool o_better = o.converged
                              ? (!best->converged || o.length < best->length)
                              : (!best->converged && o.residual < best->residual);
    if (o_better) best = &o;
  }

  if (best == nullptr) {
    result.converged = false;
    result.endpoint_residual = std::numeric_limits<double>::infinity();
    result.length = std::numeric_limits<double>::infinity();
    return result;
  }

  result.initial_covector = best->p;
  result.length = best->length;
  result.endpoint_residual = best->residual;
  result.converged = best->converged;
  try {
    SampledPath flow =
        geodesic_flow(m, CotangentState{q0, best->p}, 1.0, opts.final_steps);
    SampledPath qpath;
    qpath.times = flow.times;
    qpath.values.reserve(flow.size());
    for (const auto& z : flow.values) qpath.values.push_back(z.head(nq));
    result.path = qpath;
  } catch (const Error&) {
    result.converged = false;
  }
  return result;
}

double sym_distance(const ChartManifold& m, const SymPoint& sigma, const Vec& y,
                    const FiberShootingOptions& opts) {
  FramePoint u0 = lift_sym(sigma);
  GeodesicResult r = shoot_to_fiber(m, u0, y, opts);
  if (!r.converged)
    throw NonConvergenceError("fiber shooting did not converge on " + m.name(),
                              r.endpoint_residual, r.length);
  return r.length;
}

SampledPath mpp_driving(const ChartManifold& m, const FramePoint& u0,
                        const Vec& y, const FiberShootingOptions& opts) {
  GeodesicResult r = shoot_to_fiber(m, u0, y, opts);
  if (!r.converged)
    throw NonConvergenceError("fiber shooting did not converge on " + m.name(),
                              r.endpoint_residual, r.length);
  return base_path(r.path, m.dim());
}

namespace {

using Field = std::function<Vec(const Vec&)>;

Vec bracket_eval(const Field& X, const Field& Y, const Vec& q, double h) {
  const int nq = static_cast<int>(q.size());
  Vec Xq = X(q);
  Vec Yq = Y(q);
  Vec out = Vec::Zero(nq);
  for (int j = 0; j < nq; ++j) {
    Vec qp = q, qm = q;
    qp(j) += h;
    qm(j) -= h;
    out += (Y(qp) - Y(qm)) / (2.0 * h) * Xq(j);
    out -= (X(qp) - X(qm)) / (2.0 * h) * Yq(j);
  }
  return out;
}

}  // namespace

int hormander_rank(const ChartManifold& m, const FramePoint& u, int depth,
                   double svd_threshold) {
  if (depth < 1) throw ConfigError("bracket depth must be >= 1");
  const int n = m.dim();
  const int nq = n + n * n;
  validate_frame(u);
  m.require_domain(u.x);

  std::vector<Field> generators;
  for (int i = 0; i < n; ++i)
    generators.push_back([&m, i, n](const Vec& q) -> Vec {
      FramePoint uu = FramePoint::decode(q, n);
      return horizontal_basis(m, uu).col(i);
    });

  const Vec q0 = u.encode();
  const double h = 1e-5;
  std::vector<Vec> span_vectors;
  for (const auto& g : generators) span_vectors.push_back(g(q0));

  // breadth-first bracket generation: level d fields are [H_i, B] with B at
  // level d-1 (fields kept as closures so deeper levels nest the FD Jacobian)
  std::vector<Field> frontier = generators;
  for (int level = 2; level <= depth; ++level) {
    std::vector<Field> next;
    for (const auto& g : generators)
      for (const auto& b : frontier) {
        Field gcopy = g;
        Field bcopy = b;
        // deeper levels differentiate fields that are themselves finite
        // differences; a wider step keeps the roundoff below the rank
        // threshold
        const double hh = (level == 2) ? h : 1e-2;
        Field br = [gcopy, bcopy, hh](const Vec& q) -> Vec {
          return bracket_eval(gcopy, bcopy, q, hh);
        };
        span_vectors.push_back(br(q0));
        next.push_back(br);
      }
    frontier = std::move(next);
  }

  Mat S(nq, static_cast<int>(span_vectors.size()));
  for (std::size_t c = 0; c < span_vectors.size(); ++c) S.col(c) = span_vectors[c];
  Eigen::JacobiSVD<Mat> svd(S);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > svd_threshold) ++rank;
  return rank;
}

}  // namespace frameflow
