#pragma once

#include "frameflow/frame_bundle.hpp"
#include "frameflow/geometry.hpp"
#include "frameflow/types.hpp"

#include <cstdint>
#include <vector>

namespace frameflow {

struct BrownianConfig {
  int dim = 2;
  double horizon = 1.0;
  int steps = 100;
  std::uint64_t seed = 0;
  int n_paths = 1;
};

/// Single Brownian path: increments N(0, (T/steps) I) drawn from the
/// counter-based generator keyed by (seed, path_index, step, coordinate).
SampledPath brownian_path(const BrownianConfig& cfg, int path_index);

std::vector<SampledPath> sample_brownian(const BrownianConfig& cfg);

/// Stochastic development by Stratonovich-consistent Heun stepping:
/// predictor U~ = U + H_i(U) dW^i, corrector U + (H_i(U)+H_i(U~)) dW^i / 2.
/// Throws ChartExitError when the base path leaves the chart.
SampledPath stochastic_develop(const ChartManifold& m, const FramePoint& u0,
                               const SampledPath& w);

struct EnsembleResult {
  std::vector<Vec> positions;    // per path: endpoint, or last in-domain point
  std::vector<bool> discarded;   // per path
  int n_paths = 0;
  int n_discarded = 0;

  double discard_fraction() const {
    return n_paths ? static_cast<double>(n_discarded) / n_paths : 0.0;
  }
  bool excessive_discards() const { return discard_fraction() > 0.10; }

  /// Endpoints of the kept paths only.
  std::vector<Vec> endpoints() const;
};

/// Projected endpoints X_T of developed Brownian paths.  Discarded
/// (chart-exit) paths are flagged, never silently dropped.
EnsembleResult simulate_ensemble(const ChartManifold& m, const FramePoint& u0,
                                 const BrownianConfig& cfg, int threads = 0);

struct DensityEstimate {
  Vec y;
  double t = 0.0;
  double p_hat = 0.0;
  double bandwidth = 0.0;
  int n_samples = 0;
  double std_error = 0.0;  // between-batch, 10 batches
  bool reliable = true;    // false when no sample lies within 5 bandwidths
};

/// Reference-rule bandwidth 1.06 sigma_hat N^{-1/5}.
double bandwidth_rule(const std::vector<Vec>& samples);

/// Kernel density estimate at y from endpoint samples, Gaussian kernel in
/// the geodesic distance, normalized against the Riemannian volume by local
/// quadrature on the chart.
DensityEstimate estimate_density(const ChartManifold& m,
                                 const std::vector<Vec>& samples, const Vec& y,
                                 double t, double bandwidth);

struct DiagnosticRow {
  double t = 0.0;
  double neg2tlogp = 0.0;
  double d2 = 0.0;
  double ratio = 0.0;
  double std_error = 0.0;  // of the ratio, delta method from the density
  bool flagged = false;    // unreliable density at this t
};

/// Small-time table: for each horizon t, simulates an ensemble from u0,
/// estimates the density at y and reports -2t log p against the squared
/// fiber distance.  bandwidth 0 selects the reference rule per row.
std::vector<DiagnosticRow> small_time_diagnostic(const ChartManifold& m,
                                                 const FramePoint& u0,
                                                 const Vec& y,
                                                 const std::vector<double>& t_list,
                                                 const BrownianConfig& base_cfg,
                                                 double bandwidth = 0.0,
                                                 int threads = 0);

}  // namespace frameflow
