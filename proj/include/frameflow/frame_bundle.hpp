#pragma once

#include "frameflow/geometry.hpp"
#include "frameflow/types.hpp"

namespace frameflow {

/// Basis of the horizontal subspace at u, one column per field: column i
/// holds the n + n^2 chart components of H_i.  Base block: frame column
/// alpha_i; fiber block (entry for alpha^k_m): -Gamma^k_jl alpha^j_i alpha^l_m.
Mat horizontal_basis(const ChartManifold& m, const FramePoint& u);

/// Projection to the bundle of positive 2-tensors: (x, (alpha alpha^T)^{-1}).
SymPoint sigma_of(const FramePoint& u);

/// Right action of an invertible matrix on the fiber: (x, alpha a).
FramePoint act(const FramePoint& u, const Mat& a);

/// Frame over s.x whose sigma_of is s.sigma: alpha = lower Cholesky factor
/// of sigma^{-1}.  Any right O(n) rotation of this lift projects to the
/// same SymPoint.
FramePoint lift_sym(const SymPoint& s);

/// g-orthonormal frame at x: columns of the inverse transposed Cholesky
/// factor of g(x).
FramePoint orthonormal_frame(const ChartManifold& m, const Vec& x);

/// Deterministic development: drives the horizontal ODE
/// eta' = H_i(eta) w'^i(t) through the piecewise-linear interpolant of w,
/// one RK4 step per driving segment.  Returns frame-bundle states (encoded
/// FramePoints) on the same time grid as w.
SampledPath develop(const ChartManifold& m, const FramePoint& u0,
                    const SampledPath& w);

/// Inverse of develop: transports the frame along gamma and accumulates the
/// anti-developed increments dw = alpha(t)^{-1} gamma'(t) dt.
SampledPath antidevelop(const ChartManifold& m, const FramePoint& u0,
                        const SampledPath& gamma);

/// Base projection of a frame-bundle path (drops the fiber block).
SampledPath base_path(const SampledPath& fm_path, int n);

}  // namespace frameflow
