#include "frameflow/statistics.hpp"

#include "frameflow/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace frameflow {

Vec frechet_mean(const ChartManifold& m, const Dataset& data,
                 const FrechetOptions& opts) {
  const int n = m.dim();
  if (data.size() < 1) throw ConfigError("frechet mean needs at least one point");
  for (const auto& p : data.points) m.require_domain(p);

  Vec x = Vec::Zero(n);
  for (const auto& p : data.points) x += p;
  x /= data.size();
  if (!m.in_domain(x)) x = data.points.front();

  auto logs_at = [&](const Vec& x0, std::vector<Vec>& vs) -> double {
    vs.assign(data.size(), Vec());
    double F = 0.0;
    Mat g = m.metric(x0);
    for (int i = 0; i < data.size(); ++i) {
      LogResult lr = log_map(m, x0, data.points[i], opts.shooting);
      vs[i] = lr.v0;
      F += lr.v0.dot(g * lr.v0);
    }
    return F;
  };

  std::vector<Vec> vs;
  double F = logs_at(x, vs);
  for (int it = 0; it < opts.max_iterations; ++it) {
    Vec mean_v = Vec::Zero(n);
    for (const auto& v : vs) mean_v += v;
    mean_v /= data.size();
    Mat g = m.metric(x);
    Vec grad = -2.0 * data.size() * mean_v;  // chart-coordinate gradient proxy
    const double gnorm = std::sqrt(grad.dot(g * grad));
    if (gnorm < opts.grad_tol) return x;
    // step along the mean log; full step is exact in the flat case
    double s = 1.0;
    const double decrease = gnorm * gnorm / (2.0 * data.size());
    for (int bt = 0; bt < 30; ++bt, s *= 0.5) {
      Vec x_new = x + s * mean_v;
      if (!m.in_domain(x_new)) continue;
      std::vector<Vec> vs_new;
      double F_new;
      try {
        F_new = logs_at(x_new, vs_new);
      } catch (const NonConvergenceError&) {
        continue;
      }
      if (F_new <= F - 1e-4 * s * decrease) {
        x = x_new;
        F = F_new;
        vs = std::move(vs_new);
        break;
      }
    }
  }
  // final gradient check
  Vec mean_v = Vec::Zero(n);
  for (const auto& v : vs) mean_v += v;
  mean_v /= data.size();
  Mat g = m.metric(x);
  Vec grad = -2.0 * data.size() * mean_v;
  const double gnorm = std::sqrt(grad.dot(g * grad));
  if (gnorm >= opts.grad_tol)
    throw NonConvergenceError("frechet mean did not reach gradient tolerance",
                              gnorm, F);
  return x;
}

double det_g(const ChartManifold& m, const SymPoint& sigma) {
  validate_sym(sigma);
  Mat g = m.metric(sigma.x);
  return sigma.sigma.determinant() / g.determinant();
}

namespace {

int tri_size(int n) { return n * (n + 1) / 2; }

// sigma = L L^T with exponential diagonal; eigenvalues clamped to
// [floor, cap], clamp activity reported.
Mat sigma_from_theta(const Vec& theta, int n, double eig_floor, double eig_cap,
                     bool* clamped) {
  Mat L = Mat::Zero(n, n);
  int idx = n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j, ++idx)
      L(i, j) = (i == j) ? std::exp(std::clamp(theta(idx), -60.0, 60.0))
                         : theta(idx);
  Mat sig = L * L.transpose();
  sig = 0.5 * (sig + sig.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sig);
  Vec ev = es.eigenvalues();
  bool any = false;
  for (int i = 0; i < n; ++i) {
    double clamped_ev = std::clamp(ev(i), eig_floor, eig_cap);
    if (clamped_ev != ev(i)) any = true;
    ev(i) = clamped_ev;
  }
  if (clamped) *clamped = any;
  if (!any) return sig;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Vec theta_from(const Vec& x, const Mat& sigma) {
  const int n = static_cast<int>(x.size());
  Mat L = sigma.llt().matrixL();
  Vec theta(n + tri_size(n));
  theta.head(n) = x;
  int idx = n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j, ++idx)
      theta(idx) = (i == j) ? std::log(std::max(L(i, j), 1e-300)) : L(i, j);
  return theta;
}

struct EstimatorContext {
  const ChartManifold* m;
  const Dataset* data;
  const EstimateOptions* opts;
  std::vector<Vec> warm;  // last successful covector per data point
  bool last_clamped = false;
  std::vector<double> last_distances;

  double eval(const Vec& theta) {
    const int n = m->dim();
    const int N = data->size();
    Vec x = theta.head(n);
    if (!m->in_domain(x)) return std::numeric_limits<double>::infinity();
    bool clamped = false;
    Mat sigma = sigma_from_theta(theta, n, opts->eig_floor, opts->eig_cap, &clamped);
    FramePoint u0;
    try {
      u0 = lift_sym(SymPoint(x, sigma));
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }

    std::vector<double> d(N, std::numeric_limits<double>::quiet_NaN());
    std::vector<Vec> new_warm = warm;
    std::vector<char> failed(N, 0);
    parallel_for(
        N,
        [&](std::size_t i) {
          FiberShootingOptions so = opts->shooting;
          so.threads = 1;
          if (warm[i].size() > 0) {
            so.warm_starts = {warm[i]};
            so.multistarts = 2;  // warm + horizontal dual
          }
          GeodesicResult r = shoot_to_fiber(*m, u0, data->points[i], so);
          if (!r.converged) {
            failed[i] = 1;
            return;
          }
          d[i] = r.length;
          new_warm[i] = r.initial_covector;
        },
        opts->threads);

    for (int i = 0; i < N; ++i)
      if (failed[i]) return std::numeric_limits<double>::infinity();

    warm = std::move(new_warm);
    last_clamped = clamped;
    last_distances = d;
    double F = 0.0;
    for (double di : d) F += di * di;
    F -= 0.5 * N * std::log(det_g(*m, SymPoint(x, sigma)));
    return F;
  }
};

}  // namespace

EstimateResult anisotropic_estimate(const ChartManifold& m, const Dataset& data,
                                    const EstimateOptions& opts) {
  const int n = m.dim();
  const int N = data.size();
  if (N < n + 1)
    throw ConfigError("anisotropic estimate needs at least dim+1 data points");
  for (const auto& p : data.points) m.require_domain(p);

  EstimatorContext ctx{&m, &data, &opts, std::vector<Vec>(N), false, {}};

  // initial point: chart mean and the flat-case stationary precision
  Vec x0 = Vec::Zero(n);
  for (const auto& p : data.points) x0 += p;
  x0 /= N;
  if (!m.in_domain(x0)) x0 = data.points.front();
  Mat scatter = Mat::Zero(n, n);
  for (const auto& p : data.points)
    scatter += (p - x0) * (p - x0).transpose();
  scatter *= 2.0 / N;
  Mat sigma0;
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(scatter);
    Vec ev = es.eigenvalues();
    for (int i = 0; i < n; ++i) ev(i) = 1.0 / std::clamp(ev(i), 1e-4, 1e4);
    sigma0 = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  }

  const int dim = n + tri_size(n);
  Vec theta0 = theta_from(x0, sigma0);

  // Nelder-Mead
  std::vector<Vec> simplex(dim + 1, theta0);
  for (int k = 0; k < dim; ++k) simplex[k + 1](k) += opts.simplex_scale;
  std::vector<double> fval(dim + 1);
  std::vector<double> history;
  int evals = 0;
  auto feval = [&](const Vec& th) {
    ++evals;
    double f = ctx.eval(th);
    if (history.empty() || f < history.back())
      history.push_back(f);
    else
      history.push_back(history.back());
    return f;
  };
  for (int k = 0; k <= dim; ++k) fval[k] = feval(simplex[k]);

  auto order = [&]() {
    std::vector<int> idx(dim + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return fval[a] < fval[b]; });
    std::vector<Vec> s2(dim + 1);
    std::vector<double> f2(dim + 1);
    for (int k = 0; k <= dim; ++k) {
      s2[k] = simplex[idx[k]];
      f2[k] = fval[idx[k]];
    }
    simplex = std::move(s2);
    fval = std::move(f2);
  };

  order();
  while (evals < opts.max_evals) {
    const double spread = fval[dim] - fval[0];
    double width = 0.0;
    for (int k = 1; k <= dim; ++k)
      width = std::max(width, (simplex[k] - simplex[0]).cwiseAbs().maxCoeff());
    if (spread < 1e-10 && width < 1e-7) break;

    Vec centroid = Vec::Zero(dim);
    for (int k = 0; k < dim; ++k) centroid += simplex[k];
    centroid /= dim;
    Vec reflected = centroid + (centroid - simplex[dim]);
    double fr = feval(reflected);
    if (fr < fval[0]) {
      Vec expanded = centroid + 2.0 * (centroid - simplex[dim]);
      double fe = feval(expanded);
      if (fe < fr) {
        simplex[dim] = expanded;
        fval[dim] = fe;
      } else {
        simplex[dim] = reflected;
        fval[dim] = fr;
      }
    } else if (fr < fval[dim - 1]) {
      simplex[dim] = reflected;
      fval[dim] = fr;
    } else {
      Vec contracted = centroid + 0.5 * (simplex[dim] - centroid);
      double fc = feval(contracted);
      if (fc < fval[dim]) {
        simplex[dim] = contracted;
        fval[dim] = fc;
      } else {
        for (int k = 1; k <= dim; ++k) {
          simplex[k] = simplex[0] + 0.5 * (simplex[k] - simplex[0]);
          fval[k] = feval(simplex[k]);
        }
      }
    }
    order();
  }

  Vec theta = simplex[0];
  double best = fval[0];

  // finite-difference Newton polish
  const double fd = 3e-4;
  for (int it = 0; it < opts.polish_iterations; ++it) {
    Vec grad(dim);
    Mat hess(dim, dim);
    std::vector<double> fp(dim), fm(dim);
    for (int k = 0; k < dim; ++k) {
      Vec tp = theta, tm = theta;
      tp(k) += fd;
      tm(k) -= fd;
      fp[k] = ctx.eval(tp);
      fm[k] = ctx.eval(tm);
      grad(k) = (fp[k] - fm[k]) / (2.0 * fd);
      hess(k, k) = (fp[k] - 2.0 * best + fm[k]) / (fd * fd);
    }
    for (int k = 0; k < dim; ++k)
      for (int l = k + 1; l < dim; ++l) {
        Vec tpp = theta, tpm = theta, tmp = theta, tmm = theta;
        tpp(k) += fd;
        tpp(l) += fd;
        tpm(k) += fd;
        tpm(l) -= fd;
        tmp(k) -= fd;
        tmp(l) += fd;
        tmm(k) -= fd;
        tmm(l) -= fd;
        hess(k, l) = hess(l, k) = (ctx.eval(tpp) - ctx.eval(tpm) -
                                   ctx.eval(tmp) + ctx.eval(tmm)) /
                                  (4.0 * fd * fd);
      }
    if (!grad.allFinite() || !hess.allFinite()) break;
    if (grad.cwiseAbs().maxCoeff() < 1e-9) break;
    // damp to positive definite
    double tau = 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(hess);
    if (es.eigenvalues().minCoeff() <= 1e-8)
      tau = 1e-6 - std::min(0.0, es.eigenvalues().minCoeff());
    Vec step = (hess + tau * Mat::Identity(dim, dim)).llt().solve(grad);
    double s = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 12; ++bt, s *= 0.5) {
      Vec th_new = theta - s * step;
      double f_new = ctx.eval(th_new);
      if (f_new < best) {
        theta = th_new;
        best = f_new;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (step.cwiseAbs().maxCoeff() * s < 1e-10) break;
  }

  // final evaluation fixes the reported state
  double final_f = ctx.eval(theta);
  EstimateResult res;
  bool clamped = false;
  Mat sigma = sigma_from_theta(theta, n, opts.eig_floor, opts.eig_cap, &clamped);
  res.sigma_hat = SymPoint(theta.head(n), sigma);
  res.objective = final_f;
  res.distances = ctx.last_distances;
  res.objective_history = history;
  res.iterations = evals;
  res.degenerate = clamped;
  res.converged = std::isfinite(final_f);
  return res;
}

double onsager_machlup(const ChartManifold& m, const SampledPath& path) {
  if (path.size() < 2) throw ConfigError("functional needs at least 2 nodes");
  const int last = path.size() - 1;
  double energy = 0.0;
  double curv = 0.0;
  std::vector<double> S(path.size());
  for (int k = 0; k <= last; ++k) S[k] = scalar_curvature(m, path.values[k]);
  for (int k = 0; k < last; ++k) {
    const double dt = path.times(k + 1) - path.times(k);
    if (dt <= 0) throw ConfigError("path times must be strictly increasing");
    Vec v = (path.values[k + 1] - path.values[k]) / dt;
    Vec mid = 0.5 * (path.values[k] + path.values[k + 1]);
    energy += 0.5 * dt * v.dot(m.metric(mid) * v);
    curv += dt * 0.5 * (S[k] + S[k + 1]) / 12.0;
  }
  return -energy + curv;
}

namespace {

// Local contribution of node j to the discretized functional: the two
// adjacent energy segments plus the curvature term weighted by its
// trapezoid coefficients.
double local_om(const ChartManifold& m, const SampledPath& path, int j,
                const Vec& xj) {
  const int last = path.size() - 1;
  double val = 0.0;
  auto seg = [&](const Vec& a, const Vec& b, double dt) {
    Vec v = (b - a) / dt;
    Vec mid = 0.5 * (a + b);
    return -0.5 * dt * v.dot(m.metric(mid) * v);
  };
  if (j > 0)
    val += seg(path.values[j - 1], xj, path.times(j) - path.times(j - 1));
  if (j < last)
    val += seg(xj, path.values[j + 1], path.times(j + 1) - path.times(j));
  double coeff = 0.0;
  if (j > 0) coeff += 0.5 * (path.times(j) - path.times(j - 1));
  if (j < last) coeff += 0.5 * (path.times(j + 1) - path.times(j));
  val += coeff * scalar_curvature(m, xj) / 12.0;
  return val;
}

// Gradient of the discrete functional with respect to one interior node.
Vec om_node_gradient(const ChartManifold& m, const SampledPath& path, int j) {
  const int n = static_cast<int>(path.values.front().size());
  Vec g(n);
  const double h = 1e-6;
  for (int c = 0; c < n; ++c) {
    Vec xp = path.values[j], xm = path.values[j];
    xp(c) += h;
    xm(c) -= h;
    g(c) = (local_om(m, path, j, xp) - local_om(m, path, j, xm)) / (2.0 * h);
  }
  return g;
}

Vec om_gradient(const ChartManifold& m, const SampledPath& path) {
  const int n = static_cast<int>(path.values.front().size());
  const int interior = path.size() - 2;
  Vec grad(interior * n);
  for (int j = 1; j <= interior; ++j)
    grad.segment((j - 1) * n, n) = om_node_gradient(m, path, j);
  return grad;
}

}  // namespace

SampledPath mpp_isotropic(const ChartManifold& m, const Vec& x0, const Vec& y,
                          int nodes, const MppOptions& opts) {
  const int n = m.dim();
  if (nodes < 3) throw ConfigError("mpp needs at least 3 nodes");
  if ((y - x0).norm() == 0.0) throw ConfigError("mpp endpoints must differ");
  LogResult lr = log_map(m, x0, y, opts.shooting);
  SampledPath path = riemannian_geodesic(m, x0, lr.v0, 1.0, nodes - 1);
  const int interior = nodes - 2;

  auto total = [&](const SampledPath& p) { return onsager_machlup(m, p); };

  // ascent phase: plain gradient steps with backtracking
  double step = 0.1;
  double J = total(path);
  for (int it = 0; it < 40; ++it) {
    Vec g = om_gradient(m, path);
    if (g.cwiseAbs().maxCoeff() < opts.grad_tol) break;
    bool accepted = false;
    for (int bt = 0; bt < 20; ++bt, step *= 0.5) {
      SampledPath cand = path;
      bool ok = true;
      for (int j = 1; j <= interior; ++j) {
        cand.values[j] += step * g.segment((j - 1) * n, n);
        if (!m.in_domain(cand.values[j])) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      double Jc = total(cand);
      if (Jc > J) {
        path = std::move(cand);
        J = Jc;
        accepted = true;
        step *= 2.0;
        break;
      }
    }
    if (!accepted) break;
  }

  // Newton refinement on the stationarity system; the Jacobian couples each
  // node to its neighbours only
  const int dim = interior * n;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Vec g = om_gradient(m, path);
    const double gmax = g.cwiseAbs().maxCoeff();
    if (gmax < opts.grad_tol) return path;
    Mat Jac = Mat::Zero(dim, dim);
    const double h = 1e-5;
    for (int col = 0; col < dim; ++col) {
      const int j = col / n + 1;
      const int c = col % n;
      SampledPath pp = path, pm = path;
      pp.values[j](c) += h;
      pm.values[j](c) -= h;
      // perturbing node j only moves the gradient at nodes j-1, j, j+1
      for (int jj = std::max(1, j - 1); jj <= std::min(interior, j + 1); ++jj) {
        Vec dgrad =
            (om_node_gradient(m, pp, jj) - om_node_gradient(m, pm, jj)) /
            (2.0 * h);
        Jac.block((jj - 1) * n, col, n, 1) = dgrad;
      }
    }
    Mat reg = Jac + 1e-10 * Mat::Identity(dim, dim);
    Vec dx = reg.partialPivLu().solve(g);
    if (!dx.allFinite()) break;
    double s = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 20; ++bt, s *= 0.5) {
      SampledPath cand = path;
      bool ok = true;
      for (int j = 1; j <= interior; ++j) {
        cand.values[j] -= s * dx.segment((j - 1) * n, n);
        if (!m.in_domain(cand.values[j])) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      Vec gc = om_gradient(m, cand);
      if (gc.cwiseAbs().maxCoeff() < gmax) {
        path = std::move(cand);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  Vec g = om_gradient(m, path);
  if (g.cwiseAbs().maxCoeff() >= opts.grad_tol)
    throw NonConvergenceError("mpp ascent did not reach a stationary path",
                              g.cwiseAbs().maxCoeff(), total(path));
  return path;
}

Dataset generate_synthetic(const ChartManifold& m, const FramePoint& u0,
                           double t, int N, std::uint64_t seed, int steps) {
  validate_frame(u0);
  Dataset ds;
  ds.ground_truth = u0;
  ds.horizon = t;
  BrownianConfig cfg{m.dim(), t, steps, seed, N};
  EnsembleResult ens = simulate_ensemble(m, u0, cfg);
  ds.points = ens.endpoints();
  int next_index = N;
  const int max_attempts = 3 * N;
  int attempts = N;
  while (static_cast<int>(ds.points.size()) < N && attempts < max_attempts) {
    SampledPath w = brownian_path(cfg, next_index);
    ++next_index;
    ++attempts;
    try {
      SampledPath fm = stochastic_develop(m, u0, w);
      ds.points.push_back(fm.back().head(m.dim()));
    } catch (const Error&) {
      continue;
    }
  }
  if (static_cast<int>(ds.points.size()) < N)
    throw NumericalError("discard rate too high to draw the requested sample");
  return ds;
}

}  // namespace frameflow
