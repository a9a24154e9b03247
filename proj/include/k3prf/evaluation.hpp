#pragma once

// rolling-window evaluation.  a fixed-width window slides one step at a
// time; inside each window the predictors are standardized, proxies and
// the bandwidth are rebuilt from scratch, every method is fitted on the
// rows whose h-step targets are observed, and one forecast is issued from
// the last window row.  nothing after the window ever enters a fit, which
// the leakage audit checks bit for bit.  scores are pooled out-of-sample
// R^2 with the squared-error baseline anchored at each window's training
// mean.

#include <k3prf/auto_proxy.hpp>
#include <k3prf/baselines.hpp>
#include <k3prf/common.hpp>
#include <k3prf/data.hpp>
#include <k3prf/estimator.hpp>
#include <k3prf/kernel.hpp>
#include <k3prf/tuning.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace k3prf {

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// out-of-sample R^2
// ---------------------------------------------------------------------------

inline double pooled_oos_r2(const VectorXd& actual, const VectorXd& forecast,
                            const VectorXd& train_means) {
  if (actual.size() == 0) throw InvalidInput("oos_r2: empty inputs");
  if (actual.size() != forecast.size() || actual.size() != train_means.size())
    throw InvalidInput("oos_r2: length mismatch");
  const double sse = (actual - forecast).squaredNorm();
  const double sst = (actual - train_means).squaredNorm();
  if (!(sst > 0.0))
    throw NumericalError("oos_r2: zero benchmark sum of squares");
  return 1.0 - sse / sst;
}

inline double oos_r2(const VectorXd& actual, const VectorXd& forecast,
                     double train_mean) {
  return pooled_oos_r2(actual, forecast,
                       VectorXd::Constant(actual.size(), train_mean));
}

// ---------------------------------------------------------------------------
// methods and configuration
// ---------------------------------------------------------------------------

enum class Method { K3prf, Linear3prf, PC, SqPC, PCSq, KPCA, AR, DI };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::K3prf:
      return "k3PRF";
    case Method::Linear3prf:
      return "3PRF";
    case Method::PC:
      return "PC";
    case Method::SqPC:
      return "Sq-PC";
    case Method::PCSq:
      return "PC-Sq";
    case Method::KPCA:
      return "kPCA";
    case Method::AR:
      return "AR";
    case Method::DI:
      return "DI";
  }
  return "?";
}

inline Method parse_method(const std::string& name) {
  for (const Method m :
       {Method::K3prf, Method::Linear3prf, Method::PC, Method::SqPC,
        Method::PCSq, Method::KPCA, Method::AR, Method::DI})
    if (method_name(m) == name) return m;
  throw InvalidInput("unknown method '" + name + "'");
}

struct BacktestConfig {
  std::vector<Method> methods = {Method::K3prf, Method::Linear3prf, Method::PC,
                                 Method::SqPC,  Method::PCSq,       Method::KPCA,
                                 Method::AR,    Method::DI};
  std::vector<int> horizons = {1, 2, 3, 4, 6, 8, 10, 12};
  double window_frac = 0.70;

  // kernel settings for k3PRF and kPCA
  KernelFamily kernel = KernelFamily::Gaussian;
  double sigma = 0.0;  // 0 = tune by cross-validation
  double poly_offset = 1.0;
  std::vector<double> sigma_multipliers = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  bool tune_per_window = true;  // false: freeze the first window's sigma

  // proxies: designated panel series, or automatic with auto_L proxies
  std::vector<std::string> proxy_series;
  int auto_L = 1;

  // factor-count selection for the PC family and DI
  int pc_k = 0;   // 0 = eigenvalue-ratio selection
  int k_max = 8;
  int di_k = -1;  // -1 = share the selected k; 0 collapses DI onto pure AR

  std::vector<int> ar_lag_grid = {1, 2, 4, 8};

  int threads = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 42;
  int min_test_points = 5;
};

struct CellResult {
  std::string method;
  int horizon = 0;
  double r2 = 0.0;  // -inf when the cell failed
  int n_forecasts = 0;
  int p_used = 0;  // AR/DI lag order picked by the oracle grid
  std::string error;
  std::vector<std::string> periods;  // label of each forecast target
  std::vector<double> forecasts;
  std::vector<double> actuals;
  std::vector<double> train_means;
  std::vector<double> sigmas;  // tuned bandwidth per window, when tuned
};

struct BacktestReport {
  std::string target;
  int T = 0;
  int window = 0;
  double window_frac = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> horizons;
  std::vector<std::string> methods;
  std::vector<CellResult> cells;

  const CellResult& cell(const std::string& method, int horizon) const {
    for (const auto& c : cells)
      if (c.method == method && c.horizon == horizon) return c;
    throw InvalidInput("report: no cell for " + method + " at h=" +
                       std::to_string(horizon));
  }
};

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

namespace detail {

// floor of frac * T with a tiny epsilon so exact products like 0.7 * 80
// do not land one short of the intended width through rounding
inline Eigen::Index window_width(double frac, Eigen::Index T) {
  return static_cast<Eigen::Index>(
      std::floor(frac * static_cast<double>(T) + 1e-9));
}

struct Slot {
  Method method;
  int p = 0;  // AR/DI lag order
};

struct SlotForecast {
  double value = 0.0;
  double sigma = 0.0;
  bool ok = false;
  std::string error;
};

struct Engine {
  const BacktestConfig* cfg = nullptr;
  MatrixXd X;
  VectorXd y;
  std::vector<std::string> names;
  std::vector<std::string> periods;
  MatrixXd proxy_cols;  // raw theory proxy columns, empty when automatic
  Eigen::Index W = 0;
  std::vector<Slot> slots;
};

inline bool needs_sigma(const Engine& eng) {
  if (eng.cfg->kernel != KernelFamily::Gaussian) return false;
  if (eng.cfg->sigma > 0.0) return false;
  for (const auto& s : eng.slots)
    if (s.method == Method::K3prf || s.method == Method::KPCA) return true;
  return false;
}

inline KernelSpec kernel_for(const Engine& eng, double sigma) {
  switch (eng.cfg->kernel) {
    case KernelFamily::Linear:
      return KernelSpec::linear();
    case KernelFamily::Polynomial:
      return KernelSpec::polynomial(2, eng.cfg->poly_offset);
    case KernelFamily::Gaussian:
      return KernelSpec::gaussian(eng.cfg->sigma > 0.0 ? eng.cfg->sigma
                                                       : sigma);
  }
  throw InvalidInput("unknown kernel family");
}

inline Engine make_engine(const Panel& panel, const std::string& target,
                          const BacktestConfig& cfg) {
  if (cfg.methods.empty()) throw InvalidInput("backtest: no methods selected");
  if (cfg.horizons.empty()) throw InvalidInput("backtest: no horizons");
  if (!(cfg.window_frac > 0.0 && cfg.window_frac < 1.0))
    throw InvalidInput("backtest: window_frac must be in (0, 1)");
  if (cfg.auto_L < 1) throw InvalidInput("backtest: auto_L must be >= 1");

  Engine eng;
  eng.cfg = &cfg;
  (void)panel.col(target);
  eng.X = panel.X;
  eng.y = panel.X.col(panel.col(target));
  eng.names = panel.names;
  eng.periods = panel.time_index;
  const Eigen::Index T = panel.rows();
  eng.W = window_width(cfg.window_frac, T);
  if (eng.W < 40)
    throw InvalidInput("backtest: window shorter than 40 observations");
  for (const int h : cfg.horizons) {
    if (h < 1) throw InvalidInput("backtest: horizons must be >= 1");
    const Eigen::Index n_pos = T - eng.W - h + 1;
    if (n_pos < cfg.min_test_points)
      throw InvalidInput("backtest: too few test points at h=" +
                         std::to_string(h) +
                         " (raise the sample or lower window_frac)");
  }
  if (!cfg.proxy_series.empty()) {
    eng.proxy_cols.resize(T, static_cast<Eigen::Index>(cfg.proxy_series.size()));
    for (std::size_t i = 0; i < cfg.proxy_series.size(); ++i)
      eng.proxy_cols.col(static_cast<Eigen::Index>(i)) =
          panel.X.col(panel.col(cfg.proxy_series[i]));
  }
  for (const Method m : cfg.methods) {
    if (m == Method::AR || m == Method::DI) {
      if (cfg.ar_lag_grid.empty())
        throw InvalidInput("backtest: empty AR lag grid");
      for (const int p : cfg.ar_lag_grid) eng.slots.push_back({m, p});
    } else {
      eng.slots.push_back({m, 0});
    }
  }
  return eng;
}

// everything the engine derives from one window position.  rows outside
// [s, s+W) are never touched here; the matching target value is read by
// the caller when scoring.
inline std::vector<SlotForecast> window_forecasts(
    const Engine& eng, int h, Eigen::Index s,
    std::optional<double> frozen_sigma) {
  const BacktestConfig& cfg = *eng.cfg;
  const Eigen::Index W = eng.W;
  std::vector<SlotForecast> out(eng.slots.size());
  const auto fail_all = [&](const std::string& msg) {
    for (auto& f : out) {
      f.ok = false;
      f.error = msg;
    }
  };

  MatrixXd Xw_std;
  try {
    auto [std_mat, stats] =
        standardize_window(eng.X.middleRows(s, W), eng.names);
    Xw_std = std::move(std_mat);
  } catch (const Error& e) {
    fail_all(e.what());
    return out;
  }
  const VectorXd yw = eng.y.segment(s, W);
  const Eigen::Index n_fit = W - h;
  const MatrixXd X_fit = Xw_std.topRows(n_fit);
  const VectorXd y_fit = yw.tail(n_fit);
  const MatrixXd x_test = Xw_std.row(W - 1);

  // factor count shared by the PC family and DI
  int k = cfg.pc_k;
  std::string k_error;
  const bool needs_k = std::any_of(
      eng.slots.begin(), eng.slots.end(), [&cfg](const Slot& sl) {
        return sl.method == Method::PC || sl.method == Method::SqPC ||
               sl.method == Method::PCSq || sl.method == Method::KPCA ||
               (sl.method == Method::DI && cfg.di_k < 0);
      });
  if (needs_k && k <= 0) {
    try {
      const int k_max =
          std::min<int>(cfg.k_max, static_cast<int>(n_fit / 10));
      if (k_max < 1)
        throw InvalidInput("window too short for factor-count selection");
      const FactorExtract fx = pca_factors(X_fit, 1);
      k = eigenvalue_ratio_k(fx.eigenvalues, k_max);
    } catch (const Error& e) {
      k_error = e.what();
    }
  }

  // bandwidth shared by k3PRF and kPCA
  double sigma = 0.0;
  std::string sigma_error;
  if (needs_sigma(eng)) {
    if (frozen_sigma.has_value()) {
      sigma = *frozen_sigma;
    } else {
      try {
        const ProxyMode mode =
            eng.proxy_cols.size() > 0
                ? ProxyMode::theory(eng.proxy_cols.middleRows(s, n_fit))
                : ProxyMode::auto_proxies(cfg.auto_L);
        sigma = cv_tune_sigma(X_fit, y_fit, mode, h, cfg.sigma_multipliers,
                              derive_seed(cfg.seed, static_cast<std::uint64_t>(h),
                                          static_cast<std::uint64_t>(s)))
                    .selected;
      } catch (const Error& e) {
        sigma_error = e.what();
      }
    }
  }

  for (std::size_t i = 0; i < eng.slots.size(); ++i) {
    const Slot& slot = eng.slots[i];
    SlotForecast& f = out[i];
    try {
      switch (slot.method) {
        case Method::K3prf:
        case Method::Linear3prf: {
          KernelSpec spec = KernelSpec::linear();
          if (slot.method == Method::K3prf) {
            if (!sigma_error.empty()) throw NumericalError(sigma_error);
            spec = kernel_for(eng, sigma);
          }
          K3prfFit fit_res;
          if (eng.proxy_cols.size() > 0) {
            fit_res = fit(X_fit, y_fit,
                          ProxySet::theory(eng.proxy_cols.middleRows(s, n_fit),
                                           cfg.proxy_series),
                          spec);
          } else {
            fit_res =
                build_auto_proxies(X_fit, y_fit, spec, cfg.auto_L).final_fit;
          }
          f.value = predict(fit_res, x_test)(0);
          f.sigma = spec.family == KernelFamily::Gaussian ? spec.sigma : 0.0;
          break;
        }
        case Method::PC:
        case Method::SqPC:
        case Method::PCSq:
        case Method::KPCA: {
          if (!k_error.empty()) throw NumericalError(k_error);
          if (slot.method == Method::PC)
            f.value = pc_regression_forecast(Xw_std, yw, h, k).forecast;
          else if (slot.method == Method::SqPC)
            f.value = sq_pc_regression_forecast(Xw_std, yw, h, k).forecast;
          else if (slot.method == Method::PCSq)
            f.value = pc_sq_regression_forecast(Xw_std, yw, h, k).forecast;
          else {
            if (!sigma_error.empty()) throw NumericalError(sigma_error);
            const KernelSpec spec = kernel_for(eng, sigma);
            f.value = kpca_regression_forecast(Xw_std, yw, h, k, spec).forecast;
            f.sigma = spec.family == KernelFamily::Gaussian ? spec.sigma : 0.0;
          }
          break;
        }
        case Method::AR:
          f.value = ar_forecast(yw, slot.p, h).forecast;
          break;
        case Method::DI: {
          if (cfg.di_k < 0 && !k_error.empty()) throw NumericalError(k_error);
          const int dk = cfg.di_k >= 0 ? cfg.di_k : k;
          f.value = di_forecast(Xw_std, yw, slot.p, dk, h).forecast;
          break;
        }
      }
      f.ok = true;
    } catch (const Error& e) {
      f.ok = false;
      f.error = e.what();
    }
  }
  return out;
}

}  // namespace detail

inline BacktestReport rolling_backtest(const Panel& panel,
                                       const std::string& target,
                                       const BacktestConfig& cfg) {
  const detail::Engine eng = detail::make_engine(panel, target, cfg);
  const Eigen::Index T = panel.rows();
  const Eigen::Index W = eng.W;

  BacktestReport report;
  report.target = target;
  report.T = static_cast<int>(T);
  report.window = static_cast<int>(W);
  report.window_frac = cfg.window_frac;
  report.seed = cfg.seed;
  report.horizons = cfg.horizons;
  for (const Method m : cfg.methods) report.methods.push_back(method_name(m));

  for (const int h : cfg.horizons) {
    const Eigen::Index n_pos = T - W - h + 1;
    std::vector<std::vector<detail::SlotForecast>> rows(
        static_cast<std::size_t>(n_pos));

    std::optional<double> frozen;
    Eigen::Index start = 0;
    if (!cfg.tune_per_window && detail::needs_sigma(eng)) {
      rows[0] = detail::window_forecasts(eng, h, 0, std::nullopt);
      for (const auto& f : rows[0])
        if (f.ok && f.sigma > 0.0) {
          frozen = f.sigma;
          break;
        }
      start = 1;
    }
    parallel_for(static_cast<std::size_t>(n_pos - start), cfg.threads,
                 [&](std::size_t idx) {
                   const Eigen::Index s = start + static_cast<Eigen::Index>(idx);
                   rows[static_cast<std::size_t>(s)] =
                       detail::window_forecasts(eng, h, s, frozen);
                 });

    // pool each slot, then collapse AR/DI lag slots onto the best R^2
    std::vector<CellResult> slot_cells(eng.slots.size());
    for (std::size_t i = 0; i < eng.slots.size(); ++i) {
      CellResult cell;
      cell.method = method_name(eng.slots[i].method);
      cell.horizon = h;
      cell.p_used = eng.slots[i].p;
      cell.n_forecasts = static_cast<int>(n_pos);
      for (Eigen::Index s = 0; s < n_pos; ++s) {
        const auto& f = rows[static_cast<std::size_t>(s)][i];
        if (!f.ok) {
          cell.error = "window " + std::to_string(s) + ": " + f.error;
          break;
        }
        cell.forecasts.push_back(f.value);
        cell.actuals.push_back(eng.y(s + W - 1 + h));
        cell.periods.push_back(
            eng.periods[static_cast<std::size_t>(s + W - 1 + h)]);
        cell.train_means.push_back(eng.y.segment(s + h, W - h).mean());
        if (f.sigma > 0.0) cell.sigmas.push_back(f.sigma);
      }
      if (cell.error.empty()) {
        const auto n = static_cast<Eigen::Index>(cell.forecasts.size());
        cell.r2 = pooled_oos_r2(
            Eigen::Map<const VectorXd>(cell.actuals.data(), n),
            Eigen::Map<const VectorXd>(cell.forecasts.data(), n),
            Eigen::Map<const VectorXd>(cell.train_means.data(), n));
      } else {
        cell.r2 = -std::numeric_limits<double>::infinity();
        log_warn("backtest cell failed: " + cell.method + " h=" +
                 std::to_string(h) + " (" + cell.error + ")");
      }
      slot_cells[i] = std::move(cell);
    }

    std::size_t i = 0;
    for (const Method m : cfg.methods) {
      if (m == Method::AR || m == Method::DI) {
        std::size_t best = i;
        for (std::size_t j = i + 1; j < i + cfg.ar_lag_grid.size(); ++j)
          if (slot_cells[j].r2 > slot_cells[best].r2) best = j;
        report.cells.push_back(std::move(slot_cells[best]));
        i += cfg.ar_lag_grid.size();
      } else {
        report.cells.push_back(std::move(slot_cells[i]));
        ++i;
      }
    }
  }
  return report;
}

// recomputes the forecasts of one window position; exposed so tests and
// the leakage audit can compare them across perturbed panels
inline std::vector<double> backtest_window_forecasts(
    const Panel& panel, const std::string& target, const BacktestConfig& cfg,
    int h, Eigen::Index position) {
  const detail::Engine eng = detail::make_engine(panel, target, cfg);
  std::optional<double> frozen;
  if (!cfg.tune_per_window && detail::needs_sigma(eng)) {
    const auto first = detail::window_forecasts(eng, h, 0, std::nullopt);
    for (const auto& f : first)
      if (f.ok && f.sigma > 0.0) {
        frozen = f.sigma;
        break;
      }
  }
  const auto row = detail::window_forecasts(eng, h, position, frozen);
  std::vector<double> values;
  values.reserve(row.size());
  for (const auto& f : row)
    values.push_back(f.ok ? f.value
                          : std::numeric_limits<double>::quiet_NaN());
  return values;
}

// perturbs rows strictly after the window (including the compared target
// value) and checks that the window's forecasts do not move by a single
// bit.  returns false on the first difference.
inline bool leakage_audit(const Panel& panel, const std::string& target,
                          const BacktestConfig& cfg, int h,
                          Eigen::Index position, int n_perturb,
                          std::uint64_t seed) {
  const auto base = backtest_window_forecasts(panel, target, cfg, h, position);
  const Eigen::Index W = detail::window_width(cfg.window_frac, panel.rows());
  const Eigen::Index first_future = position + W;
  if (first_future >= panel.rows())
    throw InvalidInput("leakage_audit: no rows after the window");
  Rng rng(derive_seed(seed, 0xfeedface));
  for (int rep = 0; rep < n_perturb; ++rep) {
    Panel mutated = panel;
    const Eigen::Index span = panel.rows() - first_future;
    const auto r = first_future + static_cast<Eigen::Index>(
                                      rng.below(static_cast<std::uint64_t>(span)));
    const auto c = static_cast<Eigen::Index>(
        rng.below(static_cast<std::uint64_t>(panel.cols())));
    mutated.X(r, c) += 1.0 + std::abs(rng.normal());
    const auto perturbed =
        backtest_window_forecasts(mutated, target, cfg, h, position);
    if (perturbed.size() != base.size()) return false;
    if (std::memcmp(base.data(), perturbed.data(),
                    base.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// tolerance table
// ---------------------------------------------------------------------------

struct ToleranceTable {
  std::vector<std::string> methods;     // column order
  std::vector<double> tolerances;       // percent slack values
  std::vector<std::string> scopes = {"all", "short", "long", "ex-ar"};
  std::vector<int> cell_counts;         // per scope
  // freq[scope][tolerance][method], percent of cells
  std::vector<std::vector<std::vector<double>>> freq;
};

namespace detail {

inline bool scope_has_horizon(const std::string& scope, int h) {
  if (scope == "short") return h <= 4;
  if (scope == "long") return h >= 6;
  return true;
}

inline bool scope_has_method(const std::string& scope,
                             const std::string& method) {
  if (scope == "ex-ar") return method != "AR" && method != "DI";
  return true;
}

}  // namespace detail

// winner frequencies across (target, horizon) cells.  at slack eps a
// method counts as best when its R^2 is at least best * (1 - eps/100),
// provided best > 0; cells whose best score is not positive award only
// the strict maximum.  eps = 0 always awards exactly one winner, with
// ties going to the lexicographically smallest method name.
inline ToleranceTable tolerance_table(
    const std::vector<BacktestReport>& reports,
    std::vector<double> tolerances = {0.0, 1.0, 5.0, 10.0, 25.0}) {
  if (reports.empty()) throw InvalidInput("tolerance_table: no reports");
  std::sort(tolerances.begin(), tolerances.end());

  // union of methods across reports, sorted for deterministic columns
  std::set<std::string> method_set;
  for (const auto& r : reports)
    for (const auto& m : r.methods) method_set.insert(m);

  ToleranceTable table;
  table.methods.assign(method_set.begin(), method_set.end());
  table.tolerances = tolerances;
  table.freq.assign(
      table.scopes.size(),
      std::vector<std::vector<double>>(
          tolerances.size(), std::vector<double>(table.methods.size(), 0.0)));
  table.cell_counts.assign(table.scopes.size(), 0);

  const auto column_of = [&table](const std::string& m) {
    return static_cast<std::size_t>(
        std::find(table.methods.begin(), table.methods.end(), m) -
        table.methods.begin());
  };

  for (std::size_t sc = 0; sc < table.scopes.size(); ++sc) {
    const std::string& scope = table.scopes[sc];
    for (const auto& report : reports) {
      for (const int h : report.horizons) {
        if (!detail::scope_has_horizon(scope, h)) continue;
        // methods competing in this cell, sorted for deterministic ties
        std::vector<std::pair<std::string, double>> entries;
        for (const auto& m : report.methods)
          if (detail::scope_has_method(scope, m))
            entries.emplace_back(m, report.cell(m, h).r2);
        if (entries.empty()) continue;
        std::sort(entries.begin(), entries.end());
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& [m, r2] : entries) best = std::max(best, r2);
        if (!std::isfinite(best)) continue;  // every method failed here
        ++table.cell_counts[sc];
        for (std::size_t ti = 0; ti < tolerances.size(); ++ti) {
          const double eps = tolerances[ti];
          if (eps == 0.0 || best <= 0.0) {
            // single winner, lexicographic on exact ties
            for (const auto& [m, r2] : entries)
              if (r2 == best) {
                table.freq[sc][ti][column_of(m)] += 1.0;
                break;
              }
          } else {
            const double cutoff = best * (1.0 - eps / 100.0);
            for (const auto& [m, r2] : entries)
              if (r2 >= cutoff) table.freq[sc][ti][column_of(m)] += 1.0;
          }
        }
      }
    }
    if (table.cell_counts[sc] > 0)
      for (auto& by_tol : table.freq[sc])
        for (auto& v : by_tol)
          v *= 100.0 / static_cast<double>(table.cell_counts[sc]);
  }
  return table;
}

// ---------------------------------------------------------------------------
// report files
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

}  // namespace detail

inline void write_report_csv(const BacktestReport& report,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "schema_version,target,method,horizon,oos_r2,n_forecasts,p_used,"
         "error\n";
  for (const auto& c : report.cells)
    out << kSchemaVersion << ',' << report.target << ',' << c.method << ','
        << c.horizon << ',' << detail::fmt_double(c.r2) << ',' << c.n_forecasts
        << ',' << c.p_used << ',' << c.error << '\n';
}

inline void write_forecasts_csv(const BacktestReport& report,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "schema_version,target,method,horizon,period,forecast,actual,"
         "train_mean\n";
  for (const auto& c : report.cells) {
    for (std::size_t i = 0; i < c.forecasts.size(); ++i)
      out << kSchemaVersion << ',' << report.target << ',' << c.method << ','
          << c.horizon << ',' << c.periods[i] << ','
          << detail::fmt_double(c.forecasts[i]) << ','
          << detail::fmt_double(c.actuals[i]) << ','
          << detail::fmt_double(c.train_means[i]) << '\n';
  }
}

inline void write_tolerance_csv(const ToleranceTable& table,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "schema_version,scope,tolerance_pct,n_cells";
  for (const auto& m : table.methods) out << ',' << m;
  out << '\n';
  for (std::size_t sc = 0; sc < table.scopes.size(); ++sc)
    for (std::size_t ti = 0; ti < table.tolerances.size(); ++ti) {
      out << kSchemaVersion << ',' << table.scopes[sc] << ','
          << detail::fmt_double(table.tolerances[ti]) << ','
          << table.cell_counts[sc];
      for (std::size_t mi = 0; mi < table.methods.size(); ++mi)
        out << ',' << detail::fmt_double(table.freq[sc][ti][mi]);
      out << '\n';
    }
}

// reads back the summary CSV produced by write_report_csv; used by the
// comparison command to merge runs from disk
inline BacktestReport read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty report");
  BacktestReport report;
  std::set<int> horizons;
  std::set<std::string> methods;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() < 8)
      throw DataError(path + ": malformed report row '" + line + "'");
    CellResult c;
    report.target = cells[1];
    c.method = cells[2];
    c.horizon = std::stoi(cells[3]);
    c.r2 = cells[4] == "-inf"
               ? -std::numeric_limits<double>::infinity()
               : std::stod(cells[4]);
    c.n_forecasts = std::stoi(cells[5]);
    c.p_used = std::stoi(cells[6]);
    c.error = cells[7];
    horizons.insert(c.horizon);
    methods.insert(c.method);
    report.cells.push_back(std::move(c));
  }
  report.horizons.assign(horizons.begin(), horizons.end());
  report.methods.assign(methods.begin(), methods.end());
  return report;
}

}  // namespace k3prf
