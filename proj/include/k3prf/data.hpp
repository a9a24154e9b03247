#pragma once

// panel container and data preparation: CSV loading with a drop-series
// missing-value policy, per-series transforms (including a regression
// filter for trend removal), window standardization, and the feature /
// target alignment used by direct h-step forecasting.
//
// CSV layout: header row of series names with the period label first,
// an optional second row of transform codes (first cell "transform"),
// then one row per period.  period labels are treated as opaque strings
// that must sort lexicographically (e.g. 1965Q1 or 1965-03).

#include <k3prf/common.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace k3prf {

struct Panel {
  std::vector<std::string> time_index;
  std::vector<std::string> names;
  MatrixXd X;  // T x N, one column per series
  std::vector<std::string> dropped;  // removed by the missing-value policy

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }

  Eigen::Index col(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return static_cast<Eigen::Index>(j);
    throw DataError("panel: no series named '" + name + "'");
  }

  bool has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }
};

// ---------------------------------------------------------------------------
// transforms
// ---------------------------------------------------------------------------

struct TransformCode {
  enum class Kind { Level, Diff, LogDiff, Hamilton };
  Kind kind = Kind::Level;
  int hamilton_h = 8;  // lead used by the regression filter
  int hamilton_p = 4;  // number of consecutive lags in the filter

  static TransformCode level() { return {}; }
  static TransformCode diff() { return {Kind::Diff, 8, 4}; }
  static TransformCode logdiff() { return {Kind::LogDiff, 8, 4}; }
  static TransformCode hamilton(int h = 8, int p = 4) {
    return {Kind::Hamilton, h, p};
  }

  // leading observations consumed by the transform
  int loss() const {
    switch (kind) {
      case Kind::Level:
        return 0;
      case Kind::Diff:
      case Kind::LogDiff:
        return 1;
      case Kind::Hamilton:
        return hamilton_h + hamilton_p - 1;
    }
    return 0;
  }
};

inline TransformCode parse_transform_code(const std::string& token,
                                          int hamilton_h = 8,
                                          int hamilton_p = 4) {
  if (token == "1" || token == "level" || token.empty())
    return TransformCode::level();
  if (token == "2" || token == "diff") return TransformCode::diff();
  if (token == "3" || token == "logdiff") return TransformCode::logdiff();
  if (token == "4" || token == "hamilton")
    return TransformCode::hamilton(hamilton_h, hamilton_p);
  throw DataError("unknown transform code '" + token + "'");
}

// removes trend by regressing x_t on an intercept and p consecutive lags
// starting h periods back, keeping the residuals.  output is shorter than
// the input by h + p - 1 leading observations.
inline VectorXd hamilton_filter(const VectorXd& x, int h_lag = 8,
                                int p_lags = 4) {
  if (h_lag < 1 || p_lags < 1)
    throw InvalidInput("hamilton_filter: h and p must be >= 1");
  const Eigen::Index T = x.size();
  if (T <= h_lag + p_lags + 10)
    throw InvalidInput("hamilton_filter: series too short for filter");
  const Eigen::Index t0 = h_lag + p_lags - 1;
  const Eigen::Index n = T - t0;
  MatrixXd D(n, p_lags + 1);
  VectorXd target(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index t = t0 + r;
    D(r, 0) = 1.0;
    for (int j = 0; j < p_lags; ++j) D(r, 1 + j) = x(t - h_lag - j);
    target(r) = x(t);
  }
  const VectorXd coef = ols(D, target, "trend filter regression");
  return target - D * coef;
}

inline VectorXd apply_transform(const VectorXd& x, const TransformCode& code,
                                const std::string& name = "") {
  const std::string label = name.empty() ? "series" : "series '" + name + "'";
  switch (code.kind) {
    case TransformCode::Kind::Level:
      return x;
    case TransformCode::Kind::Diff:
      return x.tail(x.size() - 1) - x.head(x.size() - 1);
    case TransformCode::Kind::LogDiff: {
      if ((x.array() <= 0.0).any())
        throw DataError(label + ": log difference needs positive values");
      const VectorXd lx = x.array().log();
      return lx.tail(lx.size() - 1) - lx.head(lx.size() - 1);
    }
    case TransformCode::Kind::Hamilton:
      return hamilton_filter(x, code.hamilton_h, code.hamilton_p);
  }
  throw InvalidInput("unknown transform kind");
}

// applies one code per series and trims every series to the common tail
// so the panel stays rectangular with a single aligned time index
inline Panel transform_panel(const Panel& panel,
                             const std::vector<TransformCode>& codes) {
  if (codes.size() != panel.names.size())
    throw InvalidInput("transform_panel: one code per series required");
  int max_loss = 0;
  for (const auto& c : codes) max_loss = std::max(max_loss, c.loss());
  const Eigen::Index T_out = panel.rows() - max_loss;
  if (T_out < 2) throw DataError("transform_panel: too few rows after transforms");

  Panel out;
  out.names = panel.names;
  out.dropped = panel.dropped;
  out.time_index.assign(panel.time_index.end() - T_out, panel.time_index.end());
  out.X.resize(T_out, panel.cols());
  for (Eigen::Index j = 0; j < panel.cols(); ++j) {
    const VectorXd t = apply_transform(panel.X.col(j),
                                       codes[static_cast<std::size_t>(j)],
                                       panel.names[static_cast<std::size_t>(j)]);
    out.X.col(j) = t.tail(T_out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV loading
// ---------------------------------------------------------------------------

struct LoadOptions {
  std::string sample_start;  // inclusive period bounds, empty = open
  std::string sample_end;
  bool use_file_transforms = false;  // honor the codes row when present
  int hamilton_h = 8;
  int hamilton_p = 4;
};

// named period ranges used throughout the experiments
inline std::pair<std::string, std::string> sample_preset(
    const std::string& name) {
  if (name == "1965-2007") return {"1965Q1", "2007Q4"};
  if (name == "1965-2019") return {"1965Q1", "2019Q4"};
  if (name == "1965-2023") return {"1965Q1", "2023Q4"};
  if (name == "1984-2007") return {"1984Q1", "2007Q4"};
  throw InvalidInput("unknown sample preset '" + name + "'");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim whitespace and a possible trailing carriage return
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

inline bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" ||
         cell == ".";
}

}  // namespace detail

inline Panel load_csv(const std::string& path, const LoadOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3)
    throw DataError(path + ": need a period column and at least two series");
  const std::size_t n_all = header.size() - 1;

  std::vector<std::string> all_names(header.begin() + 1, header.end());
  std::vector<TransformCode> codes(n_all, TransformCode::level());
  bool have_codes = false;

  std::vector<std::string> periods;
  std::vector<std::vector<double>> rows;       // parsed values, NaN = missing
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv_line(line);
    if (line_no == 2 && !cells.empty() &&
        (cells[0] == "transform" || cells[0] == "Transform")) {
      if (cells.size() != header.size())
        throw DataError(path + ": transform row width mismatch");
      for (std::size_t j = 0; j < n_all; ++j)
        codes[j] =
            parse_transform_code(cells[j + 1], opts.hamilton_h, opts.hamilton_p);
      have_codes = true;
      continue;
    }
    if (cells.size() != header.size())
      throw DataError(path + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    periods.push_back(cells[0]);
    std::vector<double> vals(n_all);
    for (std::size_t j = 0; j < n_all; ++j) {
      if (detail::is_missing(cells[j + 1])) {
        vals[j] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cells[j + 1].c_str(), &end);
      if (end == cells[j + 1].c_str() || *end != '\0')
        throw DataError(path + ": unparseable value '" + cells[j + 1] +
                        "' at row " + std::to_string(line_no) + ", series " +
                        all_names[j]);
      vals[j] = v;
    }
    rows.push_back(std::move(vals));
  }
  if (rows.size() < 2) throw DataError(path + ": too few data rows");

  // restrict to the sample range before applying the missing policy, so a
  // series is only dropped for gaps inside the requested window
  std::size_t r0 = 0, r1 = rows.size();
  if (!opts.sample_start.empty())
    while (r0 < rows.size() && periods[r0] < opts.sample_start) ++r0;
  if (!opts.sample_end.empty())
    while (r1 > r0 && periods[r1 - 1] > opts.sample_end) --r1;
  if (r1 - r0 < 2)
    throw DataError(path + ": fewer than two rows inside the sample range");

  for (std::size_t r = r0 + 1; r < r1; ++r)
    if (!(periods[r - 1] < periods[r]))
      throw DataError(path + ": time index not strictly increasing at row " +
                      std::to_string(r + 1));

  // drop any series with a missing value in range
  std::vector<std::size_t> keep;
  Panel panel;
  for (std::size_t j = 0; j < n_all; ++j) {
    bool ok = true;
    for (std::size_t r = r0; r < r1 && ok; ++r)
      if (std::isnan(rows[r][j])) ok = false;
    if (ok)
      keep.push_back(j);
    else
      panel.dropped.push_back(all_names[j]);
  }
  if (!panel.dropped.empty())
    log_info("dropped " + std::to_string(panel.dropped.size()) +
             " series with missing values in range");
  if (keep.size() < 2)
    throw DataError(path + ": fewer than two series survive the missing policy");

  panel.time_index.assign(periods.begin() + static_cast<std::ptrdiff_t>(r0),
                          periods.begin() + static_cast<std::ptrdiff_t>(r1));
  panel.names.reserve(keep.size());
  for (const auto j : keep) panel.names.push_back(all_names[j]);
  panel.X.resize(static_cast<Eigen::Index>(r1 - r0),
                 static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = 0; c < keep.size(); ++c)
      panel.X(static_cast<Eigen::Index>(r - r0),
              static_cast<Eigen::Index>(c)) = rows[r][keep[c]];

  if (opts.use_file_transforms && have_codes) {
    std::vector<TransformCode> kept_codes;
    kept_codes.reserve(keep.size());
    for (const auto j : keep) kept_codes.push_back(codes[j]);
    return transform_panel(panel, kept_codes);
  }
  return panel;
}

inline void write_panel_csv(const Panel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "period";
  for (const auto& n : panel.names) out << ',' << n;
  out << '\n';
  char buf[64];
  for (Eigen::Index t = 0; t < panel.rows(); ++t) {
    out << panel.time_index[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < panel.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.15g", panel.X(t, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// window standardization and horizon alignment
// ---------------------------------------------------------------------------

struct Standardization {
  RowVectorXd mean;
  RowVectorXd sd;  // sample standard deviation, ddof = 1
};

inline MatrixXd apply_standardization(const MatrixXd& X,
                                      const Standardization& s) {
  return (X.rowwise() - s.mean).array().rowwise() / s.sd.array();
}

// column-wise z-scores over a window; the statistics are returned so new
// rows can be mapped onto the same scale
inline std::pair<MatrixXd, Standardization> standardize_window(
    const MatrixXd& Xw, const std::vector<std::string>& names = {}) {
  const Eigen::Index W = Xw.rows();
  if (W < 3) throw InvalidInput("standardize_window: need at least 3 rows");
  Standardization s;
  s.mean = Xw.colwise().mean();
  s.sd.resize(Xw.cols());
  for (Eigen::Index j = 0; j < Xw.cols(); ++j) {
    const double v = (Xw.col(j).array() - s.mean(j)).square().sum() /
                     static_cast<double>(W - 1);
    s.sd(j) = std::sqrt(v);
    if (!(s.sd(j) > 1e-12)) {
      const std::string label =
          static_cast<std::size_t>(j) < names.size()
              ? "series '" + names[static_cast<std::size_t>(j)] + "'"
              : "column " + std::to_string(j);
      throw DataError("standardize_window: " + label +
                      " is constant over the window");
    }
  }
  return {apply_standardization(Xw, s), s};
}

struct HorizonAligned {
  MatrixXd X;  // feature rows 0 .. T-h-1
  VectorXd y;  // targets h .. T-1
  int h = 1;
};

// pairs features dated t with the target h steps ahead
inline HorizonAligned make_direct_horizon(const VectorXd& y, const MatrixXd& X,
                                          int h) {
  if (h < 1) throw InvalidInput("make_direct_horizon: h must be >= 1");
  const Eigen::Index T = X.rows();
  if (y.size() != T) throw InvalidInput("make_direct_horizon: row mismatch");
  if (T <= h + 10)
    throw InvalidInput("make_direct_horizon: horizon too large for sample");
  HorizonAligned out;
  out.X = X.topRows(T - h);
  out.y = y.tail(T - h);
  out.h = h;
  return out;
}

}  // namespace k3prf
