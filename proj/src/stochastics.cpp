#include "frameflow/stochastics.hpp"

#include "frameflow/parallel.hpp"
#include "frameflow/rng.hpp"
#include "frameflow/subriemannian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace frameflow {

SampledPath brownian_path(const BrownianConfig& cfg, int path_index) {
  if (cfg.steps < 1) throw ConfigError("brownian config needs steps >= 1");
  if (cfg.dim < 1) throw ConfigError("brownian config needs dim >= 1");
  if (cfg.horizon <= 0) throw ConfigError("brownian config needs horizon > 0");
  CounterRng rng(cfg.seed);
  const double sdt = std::sqrt(cfg.horizon / cfg.steps);
  SampledPath w;
  w.times = SampledPath::uniform_times(cfg.horizon, cfg.steps);
  w.values.reserve(cfg.steps + 1);
  Vec cur = Vec::Zero(cfg.dim);
  w.values.push_back(cur);
  for (int k = 0; k < cfg.steps; ++k) {
    for (int i = 0; i < cfg.dim; ++i)
      cur(i) += sdt * rng.normal(static_cast<std::uint64_t>(path_index),
                                 static_cast<std::uint64_t>(k) * cfg.dim + i);
    w.values.push_back(cur);
  }
  return w;
}

std::vector<SampledPath> sample_brownian(const BrownianConfig& cfg) {
  std::vector<SampledPath> out(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t j) {
    out[j] = brownian_path(cfg, static_cast<int>(j));
  });
  return out;
}

namespace {

Mat horizontal_from_gamma(const Christoffel& gamma, const Mat& alpha) {
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

Mat horizontal_at(const ChartManifold& m, const Vec& q, double when) {
  const int n = m.dim();
  FramePoint u = FramePoint::decode(q, n);
  if (!m.in_domain(u.x))
    throw ChartExitError("development left the chart domain of " + m.name(), when);
  if (std::abs(u.alpha.determinant()) < 1e-10)
    throw NumericalError("frame degenerated during stochastic development");
  return horizontal_from_gamma(m.christoffel(u.x), u.alpha);
}

}  // namespace

SampledPath stochastic_develop(const ChartManifold& m, const FramePoint& u0,
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
    Vec dW = w.values[k + 1] - w.values[k];
    Mat H0 = horizontal_at(m, q, w.times(k));
    Vec predictor = q + H0 * dW;
    Mat H1 = horizontal_at(m, predictor, w.times(k + 1));
    q = q + 0.5 * (H0 * dW + H1 * dW);
    FramePoint u = FramePoint::decode(q, n);
    if (!m.in_domain(u.x))
      throw ChartExitError("development left the chart domain of " + m.name(),
                           w.times(k + 1));
    out.values.push_back(q);
  }
  return out;
}

std::vector<Vec> EnsembleResult::endpoints() const {
  std::vector<Vec> out;
  out.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i)
    if (!discarded[i]) out.push_back(positions[i]);
  return out;
}

EnsembleResult simulate_ensemble(const ChartManifold& m, const FramePoint& u0,
                                 const BrownianConfig& cfg, int threads) {
  const int n = m.dim();
  if (cfg.dim != n) throw ConfigError("brownian dimension must match the manifold");
  validate_frame(u0);
  m.require_domain(u0.x);

  EnsembleResult res;
  res.n_paths = cfg.n_paths;
  res.positions.assign(cfg.n_paths, Vec());
  res.discarded.assign(cfg.n_paths, false);

  parallel_for(
      cfg.n_paths,
      [&](std::size_t j) {
        SampledPath w = brownian_path(cfg, static_cast<int>(j));
        try {
          SampledPath fm = stochastic_develop(m, u0, w);
          res.positions[j] = fm.back().head(n);
        } catch (const ChartExitError&) {
          res.discarded[j] = true;
          res.positions[j] = u0.x;  // placeholder, flagged
        } catch (const NumericalError&) {
          res.discarded[j] = true;
          res.positions[j] = u0.x;
        }
      },
      threads);

  res.n_discarded = static_cast<int>(
      std::count(res.discarded.begin(), res.discarded.end(), true));
  return res;
}

double bandwidth_rule(const std::vector<Vec>& samples) {
  if (samples.empty()) throw ConfigError("bandwidth rule needs samples");
  const int n = static_cast<int>(samples.front().size());
  const double N = static_cast<double>(samples.size());
  Vec mean = Vec::Zero(n);
  for (const auto& s : samples) mean += s;
  mean /= N;
  double var = 0.0;
  for (const auto& s : samples) var += (s - mean).squaredNorm();
  var /= std::max(1.0, N - 1.0) * n;  // mean per-coordinate variance
  return 1.06 * std::sqrt(var) * std::pow(N, -0.2);
}

namespace {

// Normalization of the geodesic Gaussian kernel against the Riemannian
// volume for charts of dimension != 2: cartesian grid around y with the
// midpoint-metric distance (exact on flat charts).
double kernel_normalization(const ChartManifold& m, const Vec& y, double h) {
  const int n = m.dim();
  Mat ginv = m.metric_inverse(y);
  const int half = 24;
  Vec widths(n);
  for (int i = 0; i < n; ++i) widths(i) = 7.0 * h * std::sqrt(ginv(i, i));
  std::vector<int> idx(n, -half);
  double Z = 0.0;
  const double cell = [&] {
    double c = 1.0;
    for (int i = 0; i < n; ++i) c *= widths(i) / half;
    return c;
  }();
  for (;;) {
    Vec z = y;
    for (int i = 0; i < n; ++i) z(i) += idx[i] * widths(i) / half;
    if (m.in_domain(z)) {
      Vec mid = 0.5 * (y + z);
      if (m.in_domain(mid)) {
        Vec d = z - y;
        const double d2 = d.dot(m.metric(mid) * d);
        Z += std::exp(-0.5 * d2 / (h * h)) * std::sqrt(m.metric(z).determinant());
      }
    }
    int c = 0;
    while (c < n && ++idx[c] > half) idx[c++] = -half;
    if (c == n) break;
  }
  return Z * cell;
}

}  // namespace

DensityEstimate estimate_density(const ChartManifold& m,
                                 const std::vector<Vec>& samples, const Vec& y,
                                 double t, double bandwidth) {
  const int n = m.dim();
  if (bandwidth <= 0) throw ConfigError("bandwidth must be positive");
  m.require_domain(y);
  DensityEstimate est;
  est.y = y;
  est.t = t;
  est.bandwidth = bandwidth;
  est.n_samples = static_cast<int>(samples.size());
  if (samples.empty()) {
    est.reliable = false;
    return est;
  }
  const double h = bandwidth;
  const double cutoff = 6.0 * h;

  double Z = 0.0;
  std::vector<double> dists(samples.size(),
                            std::numeric_limits<double>::infinity());
  if (n == 2) {
    // polar map gives d_g and the volume quadrature in one structure
    const double R = cutoff * 1.30;
    GeodesicPolarMap polar(m, y, R, 256, 96);
    parallel_for(samples.size(), [&](std::size_t j) {
      dists[j] = polar.distance(samples[j]);
    });
    // quadrature over the polar mesh cells
    Z = polar.volume_weighted_gaussian(m, h);
  } else {
    Mat gy_inv = m.metric_inverse(y);
    parallel_for(samples.size(), [&](std::size_t j) {
      Vec d = samples[j] - y;
      Vec mid = 0.5 * (samples[j] + y);
      if (!m.in_domain(mid)) return;
      dists[j] = std::sqrt(d.dot(m.metric(mid) * d));
    });
    Z = kernel_normalization(m, y, h);
  }
  if (!(Z > 0.0)) throw NumericalError("kernel normalization failed");

  const int n_batches = 10;
  std::vector<double> batch_sum(n_batches, 0.0);
  std::vector<int> batch_count(n_batches, 0);
  bool any_close = false;
  double total = 0.0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const int b = static_cast<int>(j % n_batches);
    double k = 0.0;
    if (std::isfinite(dists[j]) && dists[j] < cutoff)
      k = std::exp(-0.5 * dists[j] * dists[j] / (h * h)) / Z;
    if (std::isfinite(dists[j]) && dists[j] < 5.0 * h) any_close = true;
    batch_sum[b] += k;
    batch_count[b] += 1;
    total += k;
  }
  est.p_hat = total / static_cast<double>(samples.size());
  double mean_b = 0.0;
  int used = 0;
  std::vector<double> batch_means;
  for (int b = 0; b < n_batches; ++b)
    if (batch_count[b] > 0) {
      batch_means.push_back(batch_sum[b] / batch_count[b]);
      mean_b += batch_means.back();
      ++used;
    }
  mean_b /= std::max(1, used);
  double var_b = 0.0;
  for (double v : batch_means) var_b += (v - mean_b) * (v - mean_b);
  if (used > 1) var_b /= (used - 1);
  est.std_error = std::sqrt(var_b / std::max(1, used));
  est.reliable = any_close;
  return est;
}

std::vector<DiagnosticRow> small_time_diagnostic(
    const ChartManifold& m, const FramePoint& u0, const Vec& y,
    const std::vector<double>& t_list, const BrownianConfig& base_cfg,
    double bandwidth, int threads) {
  validate_frame(u0);
  m.require_domain(y);
  if ((y - u0.x).norm() == 0.0)
    throw ConfigError("diagnostic target must differ from the base point");

  const double d = sym_distance(m, sigma_of(u0), y);
  const double d2 = d * d;

  std::vector<DiagnosticRow> rows;
  int row_index = 0;
  for (double t : t_list) {
    BrownianConfig cfg = base_cfg;
    cfg.horizon = t;
    cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(row_index) * 0x9e3779b9ULL;
    EnsembleResult ens = simulate_ensemble(m, u0, cfg, threads);
    std::vector<Vec> endpoints = ens.endpoints();
    DiagnosticRow row;
    row.t = t;
    row.d2 = d2;
    double h = bandwidth > 0 ? bandwidth : bandwidth_rule(endpoints);
    DensityEstimate est = estimate_density(m, endpoints, y, t, h);
    if (!est.reliable || est.p_hat <= 0.0) {
      row.flagged = true;
      row.neg2tlogp = std::numeric_limits<double>::quiet_NaN();
      row.ratio = std::numeric_limits<double>::quiet_NaN();
      row.std_error = std::numeric_limits<double>::infinity();
    } else {
      row.neg2tlogp = -2.0 * t * std::log(est.p_hat);
      row.ratio = row.neg2tlogp / d2;
      row.std_error = 2.0 * t * est.std_error / (est.p_hat * d2);
      row.flagged = est.std_error > 0.5 * est.p_hat;
    }
    rows.push_back(row);
    ++row_index;
  }
  return rows;
}

}  // namespace frameflow
