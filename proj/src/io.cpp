#include "frameflow/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace frameflow {

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& file) {
  std::ofstream os(file);
  if (!os) throw ConfigError("cannot open output file: " + file);
  return os;
}

}  // namespace

void write_path_csv(const std::string& file, const SampledPath& path,
                    int base_dim) {
  std::ofstream os = open_out(file);
  const int vd = path.value_dim();
  const bool has_frame = vd == base_dim + base_dim * base_dim;
  os << "t";
  for (int i = 1; i <= base_dim; ++i) os << ",x" << i;
  if (has_frame)
    for (int col = 1; col <= base_dim; ++col)
      for (int row = 1; row <= base_dim; ++row) os << ",a" << row << col;
  os << "\n";
  for (int k = 0; k < path.size(); ++k) {
    os << fmt_g17(path.times(k));
    const Vec& v = path.values[k];
    const int cols = has_frame ? vd : base_dim;
    for (int i = 0; i < cols; ++i) os << "," << fmt_g17(v(i));
    os << "\n";
  }
}

void write_points_csv(const std::string& file, const std::vector<Vec>& points) {
  std::ofstream os = open_out(file);
  const int n = points.empty() ? 0 : static_cast<int>(points.front().size());
  for (int i = 1; i <= n; ++i) os << (i > 1 ? "," : "") << "x" << i;
  os << "\n";
  for (const auto& p : points) {
    for (int i = 0; i < n; ++i) os << (i ? "," : "") << fmt_g17(p(i));
    os << "\n";
  }
}

std::vector<Vec> read_points_csv(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open dataset file: " + file);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty dataset file: " + file);
  std::vector<Vec> points;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ss, tok, ',')) {
      try {
        row.push_back(std::stod(tok));
      } catch (...) {
        throw ConfigError("bad numeric value in dataset file: " + tok);
      }
    }
    Vec p(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) p(i) = row[i];
    points.push_back(p);
  }
  if (points.empty()) throw ConfigError("dataset file has no rows: " + file);
  for (const auto& p : points)
    if (p.size() != points.front().size())
      throw ConfigError("dataset rows have inconsistent dimension");
  return points;
}

void write_ensemble_csv(const std::string& file, const EnsembleResult& ens) {
  std::ofstream os = open_out(file);
  const int n =
      ens.positions.empty() ? 0 : static_cast<int>(ens.positions.front().size());
  os << "path_id";
  for (int i = 1; i <= n; ++i) os << ",x" << i;
  os << ",discarded_flag\n";
  for (std::size_t j = 0; j < ens.positions.size(); ++j) {
    os << j;
    for (int i = 0; i < n; ++i) os << "," << fmt_g17(ens.positions[j](i));
    os << "," << (ens.discarded[j] ? 1 : 0) << "\n";
  }
}

void write_diagnostic_csv(const std::string& file,
                          const std::vector<DiagnosticRow>& rows) {
  std::ofstream os = open_out(file);
  os << "t,neg2tlogp,d2,ratio,stderr,flagged\n";
  for (const auto& r : rows) {
    os << fmt_g17(r.t) << "," << fmt_g17(r.neg2tlogp) << "," << fmt_g17(r.d2)
       << "," << fmt_g17(r.ratio) << "," << fmt_g17(r.std_error) << ","
       << (r.flagged ? 1 : 0) << "\n";
  }
}

}  // namespace frameflow
