#pragma once

#include "frameflow/stochastics.hpp"
#include "frameflow/subriemannian.hpp"
#include "frameflow/types.hpp"

#include <string>
#include <vector>

namespace frameflow {

/// Doubles are emitted with 17 significant digits so that files round-trip
/// bit for bit.
std::string fmt_g17(double v);

/// Path CSV.  Columns: t, x^1..x^n and, when the node values carry a frame
/// block, a11..a<nn> with the frame columns flattened column-major
/// (a<row><col>; a21 is the second coordinate of the first frame vector).
void write_path_csv(const std::string& file, const SampledPath& path,
                    int base_dim);

/// Dataset CSV with header x1..xn.
void write_points_csv(const std::string& file, const std::vector<Vec>& points);
std::vector<Vec> read_points_csv(const std::string& file);

/// Ensemble CSV: path_id, x^1..x^n, discarded_flag.
void write_ensemble_csv(const std::string& file, const EnsembleResult& ens);

/// Small-time table CSV with header t,neg2tlogp,d2,ratio,stderr.
void write_diagnostic_csv(const std::string& file,
                          const std::vector<DiagnosticRow>& rows);

}  // namespace frameflow
