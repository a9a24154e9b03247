// command-line front end over the library: forecast, backtest, tune,
// simulate, compare.  every run resolves its configuration from an optional
// key=value file plus flag overrides, then writes its artifacts and a
// manifest.json carrying the resolved configuration and its hash, so two
// runs with the same manifest hash produce byte-identical outputs.

#include <k3prf/auto_proxy.hpp>
#include <k3prf/baselines.hpp>
#include <k3prf/data.hpp>
#include <k3prf/estimator.hpp>
#include <k3prf/evaluation.hpp>
#include <k3prf/kernel.hpp>
#include <k3prf/simulation.hpp>
#include <k3prf/tuning.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace {

namespace fs = std::filesystem;
using k3prf::DataError;
using k3prf::InvalidInput;
using k3prf::MatrixXd;
using k3prf::VectorXd;

constexpr const char* kToolVersion = "0.1.0";

struct Options {
  std::string config_path;
  std::string data;
  std::string target;
  std::vector<int> horizons;  // per-command default applied when empty
  std::string kernel = "gaussian";
  std::string sigma = "auto";
  std::string proxies = "auto:1";
  double window_frac = 0.70;
  std::uint64_t seed = 42;
  std::string out = "k3prf-out";
  int threads = 0;
  std::string sample;
  bool transforms = false;
  std::vector<std::string> methods;
  std::vector<double> tolerances = {0.0, 1.0, 5.0, 10.0, 25.0};
  std::vector<int> ar_lags = {1, 2, 4, 8};
  int pc_k = 0;
  int di_k = -1;
  std::vector<double> multipliers = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  bool freeze_sigma = false;
  // simulate
  std::vector<std::string> grid = {"50:50", "100:100", "200:200"};
  int reps = 20;
  int factors = 1;
  int noise_factors = 0;
  int proxy_count = 1;
  double eps_sd = 1.0;
  double eta_sd = 1.0;
  double omega_sd = 1.0;
  double eps_ar1 = 0.0;
  bool orthogonal_factors = false;
  // compare
  std::vector<std::string> reports;
};

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.15g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>)
      out += v[i];
    else if constexpr (std::is_same_v<T, double>)
      out += fmt_g(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

void write_manifest(const std::string& out_dir, const std::string& command,
                    std::uint64_t seed,
                    const std::map<std::string, std::string>& cfg) {
  std::string canonical;
  for (const auto& [key, value] : cfg) canonical += key + "=" + value + "\n";
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(k3prf::fnv1a(canonical)));

  nlohmann::ordered_json j;
  j["schema_version"] = k3prf::kSchemaVersion;
  j["tool"] = "k3prf";
  j["version"] = kToolVersion;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
               std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["command"] = command;
  j["seed"] = seed;
  j["config_hash"] = std::string(hash);
  nlohmann::ordered_json jc;
  for (const auto& [key, value] : cfg) jc[key] = value;
  j["config"] = jc;

  const fs::path path = fs::path(out_dir) / "manifest.json";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// shared resolution helpers
// ---------------------------------------------------------------------------

k3prf::Panel load_panel(const Options& o) {
  if (o.data.empty()) throw InvalidInput("--data is required");
  if (o.target.empty()) throw InvalidInput("--target is required");
  k3prf::LoadOptions lo;
  lo.use_file_transforms = o.transforms;
  if (!o.sample.empty()) {
    const auto range = k3prf::sample_preset(o.sample);
    lo.sample_start = range.first;
    lo.sample_end = range.second;
  }
  return k3prf::load_csv(o.data, lo);
}

// 0 means "tune by cross-validation"
double parse_sigma(const std::string& s) {
  if (s == "auto") return 0.0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !(v > 0.0))
    throw InvalidInput("--sigma must be 'auto' or a positive number");
  return v;
}

k3prf::KernelFamily parse_family(const std::string& kernel) {
  if (kernel == "linear") return k3prf::KernelFamily::Linear;
  if (kernel == "poly2") return k3prf::KernelFamily::Polynomial;
  if (kernel == "gaussian") return k3prf::KernelFamily::Gaussian;
  throw InvalidInput("--kernel must be one of linear, poly2, gaussian");
}

k3prf::KernelSpec make_spec(k3prf::KernelFamily family, double sigma) {
  switch (family) {
    case k3prf::KernelFamily::Linear:
      return k3prf::KernelSpec::linear();
    case k3prf::KernelFamily::Polynomial:
      return k3prf::KernelSpec::polynomial(2, 1.0);
    case k3prf::KernelFamily::Gaussian:
    default:
      return k3prf::KernelSpec::gaussian(sigma > 0.0 ? sigma : 1.0);
  }
}

struct ProxyChoice {
  int auto_L = 1;
  std::vector<std::string> cols;  // empty = automatic proxies
  bool is_auto() const { return cols.empty(); }
};

ProxyChoice parse_proxies(const std::string& s) {
  ProxyChoice out;
  if (s.rfind("auto:", 0) == 0) {
    try {
      out.auto_L = std::stoi(s.substr(5));
    } catch (const std::exception&) {
      throw InvalidInput("--proxies auto:L needs an integer L");
    }
    if (out.auto_L < 1) throw InvalidInput("--proxies auto:L needs L >= 1");
    return out;
  }
  if (s.rfind("cols:", 0) == 0) {
    std::string rest = s.substr(5);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const std::size_t comma = rest.find(',', pos);
      const std::string name =
          rest.substr(pos, comma == std::string::npos ? comma : comma - pos);
      if (!name.empty()) out.cols.push_back(name);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (out.cols.empty())
      throw InvalidInput("--proxies cols: needs at least one series name");
    return out;
  }
  throw InvalidInput("--proxies must look like auto:L or cols:a,b");
}

MatrixXd collect_columns(const k3prf::Panel& panel,
                         const std::vector<std::string>& names) {
  MatrixXd Z(panel.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j)
    Z.col(static_cast<Eigen::Index>(j)) = panel.X.col(panel.col(names[j]));
  return Z;
}

// ---------------------------------------------------------------------------
// forecast: full-sample direct h-step fit, fitted values plus one
// out-of-sample forecast per horizon
// ---------------------------------------------------------------------------

void cmd_forecast(const Options& o) {
  const k3prf::Panel panel = load_panel(o);
  const Eigen::Index tcol = panel.col(o.target);
  const VectorXd y = panel.X.col(tcol);

  MatrixXd X(panel.rows(), panel.cols() - 1);
  std::vector<std::string> xnames;
  Eigen::Index jx = 0;
  for (Eigen::Index j = 0; j < panel.cols(); ++j) {
    if (j == tcol) continue;
    X.col(jx++) = panel.X.col(j);
    xnames.push_back(panel.names[static_cast<std::size_t>(j)]);
  }
  if (X.cols() < 1) throw DataError("forecast: no feature series besides the target");

  const ProxyChoice pick = parse_proxies(o.proxies);
  const double sigma_fixed = parse_sigma(o.sigma);
  const k3prf::KernelFamily family = parse_family(o.kernel);
  const std::vector<int> horizons =
      o.horizons.empty() ? std::vector<int>{1} : o.horizons;

  fs::create_directories(o.out);
  const fs::path csv_path = fs::path(o.out) / "forecasts.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw DataError("cannot write '" + csv_path.string() + "'");
  csv << "schema_version,horizon,period,kind,value\n";

  for (const int h : horizons) {
    const k3prf::HorizonAligned aligned = k3prf::make_direct_horizon(y, X, h);
    const auto [Xs, stats] = k3prf::standardize_window(aligned.X, xnames);

    k3prf::ProxyMode mode =
        pick.is_auto()
            ? k3prf::ProxyMode::auto_proxies(pick.auto_L)
            : k3prf::ProxyMode::theory(
                  collect_columns(panel, pick.cols).topRows(aligned.X.rows()));

    k3prf::KernelSpec spec = make_spec(family, sigma_fixed);
    if (family == k3prf::KernelFamily::Gaussian && sigma_fixed == 0.0)
      spec.sigma =
          k3prf::cv_tune_sigma(Xs, aligned.y, mode, h, o.multipliers, o.seed)
              .selected;

    const k3prf::K3prfFit f =
        mode.is_auto()
            ? k3prf::build_auto_proxies(Xs, aligned.y, spec, pick.auto_L)
                  .final_fit
            : k3prf::fit(Xs, aligned.y, k3prf::ProxySet::theory(*mode.theory_Z),
                         spec);

    const VectorXd fitted = k3prf::fitted_values(f);
    for (Eigen::Index t = 0; t < fitted.size(); ++t)
      csv << k3prf::kSchemaVersion << ',' << h << ','
          << panel.time_index[static_cast<std::size_t>(t + h)] << ",fitted,"
          << fmt_g(fitted(t)) << '\n';

    const MatrixXd x_last =
        k3prf::apply_standardization(X.bottomRows(1), stats);
    const double point = k3prf::predict(f, x_last)(0);
    csv << k3prf::kSchemaVersion << ',' << h << ',' << panel.time_index.back()
        << '+' << h << ",forecast," << fmt_g(point) << '\n';
  }
  csv.close();

  write_manifest(o.out, "forecast", o.seed,
                 {{"data", o.data},
                  {"target", o.target},
                  {"sample", o.sample},
                  {"transforms", o.transforms ? "true" : "false"},
                  {"horizons", join(horizons)},
                  {"kernel", o.kernel},
                  {"sigma", o.sigma},
                  {"proxies", o.proxies},
                  {"multipliers", join(o.multipliers)},
                  {"seed", std::to_string(o.seed)},
                  {"threads", std::to_string(o.threads)},
                  {"out", o.out}});
}

// ---------------------------------------------------------------------------
// backtest: rolling-window comparison across methods and horizons
// ---------------------------------------------------------------------------

void cmd_backtest(const Options& o) {
  const k3prf::Panel panel = load_panel(o);

  k3prf::BacktestConfig cfg;
  if (!o.methods.empty()) {
    cfg.methods.clear();
    for (const auto& name : o.methods)
      cfg.methods.push_back(k3prf::parse_method(name));
  }
  if (!o.horizons.empty()) cfg.horizons = o.horizons;
  cfg.window_frac = o.window_frac;
  cfg.kernel = parse_family(o.kernel);
  cfg.sigma = parse_sigma(o.sigma);
  cfg.sigma_multipliers = o.multipliers;
  cfg.tune_per_window = !o.freeze_sigma;
  const ProxyChoice pick = parse_proxies(o.proxies);
  if (pick.is_auto())
    cfg.auto_L = pick.auto_L;
  else
    cfg.proxy_series = pick.cols;
  cfg.pc_k = o.pc_k;
  cfg.di_k = o.di_k;
  cfg.ar_lag_grid = o.ar_lags;
  cfg.threads = o.threads;
  cfg.seed = o.seed;

  const k3prf::BacktestReport report =
      k3prf::rolling_backtest(panel, o.target, cfg);

  fs::create_directories(o.out);
  k3prf::write_report_csv(report, (fs::path(o.out) / "report.csv").string());
  k3prf::write_forecasts_csv(report,
                             (fs::path(o.out) / "forecasts.csv").string());
  const k3prf::ToleranceTable table =
      k3prf::tolerance_table({report}, o.tolerances);
  k3prf::write_tolerance_csv(table,
                             (fs::path(o.out) / "tolerance.csv").string());

  std::vector<std::string> method_names;
  for (const auto m : cfg.methods)
    method_names.push_back(k3prf::method_name(m));
  write_manifest(o.out, "backtest", o.seed,
                 {{"data", o.data},
                  {"target", o.target},
                  {"sample", o.sample},
                  {"transforms", o.transforms ? "true" : "false"},
                  {"methods", join(method_names)},
                  {"horizons", join(cfg.horizons)},
                  {"window-frac", fmt_g(o.window_frac)},
                  {"kernel", o.kernel},
                  {"sigma", o.sigma},
                  {"freeze-sigma", o.freeze_sigma ? "true" : "false"},
                  {"multipliers", join(o.multipliers)},
                  {"proxies", o.proxies},
                  {"pc-k", std::to_string(o.pc_k)},
                  {"di-k", std::to_string(o.di_k)},
                  {"ar-lags", join(o.ar_lags)},
                  {"tolerances", join(o.tolerances)},
                  {"seed", std::to_string(o.seed)},
                  {"threads", std::to_string(o.threads)},
                  {"out", o.out}});
}

// ---------------------------------------------------------------------------
// tune: bandwidth cross-validation report for the gaussian kernel
// ---------------------------------------------------------------------------

void cmd_tune(const Options& o) {
  const k3prf::Panel panel = load_panel(o);
  const Eigen::Index tcol = panel.col(o.target);
  const VectorXd y = panel.X.col(tcol);

  MatrixXd X(panel.rows(), panel.cols() - 1);
  std::vector<std::string> xnames;
  Eigen::Index jx = 0;
  for (Eigen::Index j = 0; j < panel.cols(); ++j) {
    if (j == tcol) continue;
    X.col(jx++) = panel.X.col(j);
    xnames.push_back(panel.names[static_cast<std::size_t>(j)]);
  }

  const int h = o.horizons.empty() ? 1 : o.horizons.front();
  const k3prf::HorizonAligned aligned = k3prf::make_direct_horizon(y, X, h);
  const auto [Xs, stats] = k3prf::standardize_window(aligned.X, xnames);

  const ProxyChoice pick = parse_proxies(o.proxies);
  const k3prf::ProxyMode mode =
      pick.is_auto()
          ? k3prf::ProxyMode::auto_proxies(pick.auto_L)
          : k3prf::ProxyMode::theory(
                collect_columns(panel, pick.cols).topRows(aligned.X.rows()));

  const k3prf::TuneResult result =
      k3prf::cv_tune_sigma(Xs, aligned.y, mode, h, o.multipliers, o.seed);

  fs::create_directories(o.out);
  nlohmann::ordered_json j;
  j["schema_version"] = k3prf::kSchemaVersion;
  j["horizon"] = h;
  j["sigma_median"] = result.sigma_median;
  j["grid"] = result.grid;
  j["cv_scores"] = result.cv_scores;
  j["notes"] = result.notes;
  j["selected"] = result.selected;
  j["fold_spec"] = result.fold_spec;
  const fs::path path = fs::path(o.out) / "tune.json";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  out.close();

  write_manifest(o.out, "tune", o.seed,
                 {{"data", o.data},
                  {"target", o.target},
                  {"sample", o.sample},
                  {"transforms", o.transforms ? "true" : "false"},
                  {"horizons", std::to_string(h)},
                  {"proxies", o.proxies},
                  {"multipliers", join(o.multipliers)},
                  {"seed", std::to_string(o.seed)},
                  {"threads", std::to_string(o.threads)},
                  {"out", o.out}});
}

// ---------------------------------------------------------------------------
// simulate: Monte Carlo error-rate study over an (M, T) grid
// ---------------------------------------------------------------------------

std::vector<std::pair<int, int>> parse_grid(
    const std::vector<std::string>& items) {
  std::vector<std::pair<int, int>> grid;
  for (const auto& item : items) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw InvalidInput("--grid entries must look like M:T, got '" + item +
                         "'");
    try {
      grid.emplace_back(std::stoi(item.substr(0, colon)),
                        std::stoi(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw InvalidInput("--grid entries must look like M:T, got '" + item +
                         "'");
    }
  }
  return grid;
}

void cmd_simulate(const Options& o) {
  k3prf::SimConfig base;
  base.K_f = o.factors;
  base.K_g = o.noise_factors;
  base.L = o.proxy_count;
  base.eps_sd = o.eps_sd;
  base.eta_sd = o.eta_sd;
  base.omega_sd = o.omega_sd;
  base.eps_ar1 = o.eps_ar1;
  base.orthogonal_factors = o.orthogonal_factors;
  base.seed = o.seed;

  const k3prf::RateCurve curve =
      k3prf::rate_study(base, parse_grid(o.grid), o.reps, o.threads);

  fs::create_directories(o.out);
  k3prf::write_rate_csv(curve, (fs::path(o.out) / "rates.csv").string());

  write_manifest(o.out, "simulate", o.seed,
                 {{"grid", join(o.grid)},
                  {"reps", std::to_string(o.reps)},
                  {"factors", std::to_string(o.factors)},
                  {"noise-factors", std::to_string(o.noise_factors)},
                  {"proxy-count", std::to_string(o.proxy_count)},
                  {"eps-sd", fmt_g(o.eps_sd)},
                  {"eta-sd", fmt_g(o.eta_sd)},
                  {"omega-sd", fmt_g(o.omega_sd)},
                  {"eps-ar1", fmt_g(o.eps_ar1)},
                  {"orthogonal-factors", o.orthogonal_factors ? "true" : "false"},
                  {"seed", std::to_string(o.seed)},
                  {"threads", std::to_string(o.threads)},
                  {"out", o.out}});
}

// ---------------------------------------------------------------------------
// compare: winner-frequency tolerance table over saved reports
// ---------------------------------------------------------------------------

void cmd_compare(const Options& o) {
  if (o.reports.empty()) throw InvalidInput("--report is required");
  std::vector<k3prf::BacktestReport> reports;
  for (const auto& path : o.reports)
    reports.push_back(k3prf::read_report_csv(path));

  const k3prf::ToleranceTable table =
      k3prf::tolerance_table(reports, o.tolerances);
  fs::create_directories(o.out);
  k3prf::write_tolerance_csv(table,
                             (fs::path(o.out) / "tolerance.csv").string());

  write_manifest(o.out, "compare", o.seed,
                 {{"report", join(o.reports)},
                  {"tolerances", join(o.tolerances)},
                  {"seed", std::to_string(o.seed)},
                  {"out", o.out}});
}

// ---------------------------------------------------------------------------
// config-file merge: file values fill in whatever the command line left
// untouched, so flags always win
// ---------------------------------------------------------------------------

void apply_config_file(CLI::App* sub, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI{}.from_file(path);
  } catch (const CLI::FileError& e) {
    throw InvalidInput(std::string("config file: ") + e.what());
  }
  for (const auto& item : items) {
    if (!item.parents.empty())
      throw InvalidInput("config file keys must be flat, got '" +
                         item.fullname() + "'");
    if (item.name == "config")
      throw InvalidInput("config files cannot chain to other config files");
    CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr)
      throw InvalidInput("unknown config key '" + item.name + "' for " +
                         sub->get_name());
    if (opt->count() > 0) continue;  // command line already set it
    for (const auto& value : item.inputs) opt->add_result(value);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"kernel three-pass regression filter toolkit"};
  app.require_subcommand(1);
  app.footer(
      "every option can also be set in a key=value config file passed with\n"
      "--config; command-line flags override file values.  quote values\n"
      "containing commas, e.g. proxies=\"cols:a,b\".  set K3PRF_LOG=info or\n"
      "K3PRF_LOG=debug for progress logging on stderr.  outputs land in\n"
      "--out together with a manifest.json recording the resolved\n"
      "configuration, its hash, and the seed.");

  const auto add_config = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path,
                    "key=value config file; flags override file values");
  };
  const auto add_data_opts = [&o](CLI::App* sub) {
    sub->add_option("--data", o.data, "input panel CSV (period column first)");
    sub->add_option("--target", o.target, "name of the target series");
    sub->add_option("--sample", o.sample,
                    "named period range: 1965-2007, 1965-2019, 1965-2023, "
                    "1984-2007");
    sub->add_flag("--transforms", o.transforms,
                  "honor the transform-code row in the data file");
  };
  const auto add_run_opts = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "master seed for all randomized steps")
        ->capture_default_str();
    sub->add_option("--threads", o.threads, "worker threads, 0 = all cores")
        ->capture_default_str();
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
  };
  const auto add_kernel_opts = [&o](CLI::App* sub) {
    sub->add_option("--kernel", o.kernel,
                    "kernel family: linear, poly2, gaussian")
        ->capture_default_str();
    sub->add_option("--sigma", o.sigma,
                    "gaussian bandwidth: 'auto' (cross-validated) or a "
                    "positive value")
        ->capture_default_str();
    sub->add_option("--multipliers", o.multipliers,
                    "bandwidth candidates as multiples of the median "
                    "heuristic")
        ->delimiter(',')
        ->capture_default_str();
  };
  const auto add_proxy_opt = [&o](CLI::App* sub) {
    sub->add_option("--proxies", o.proxies,
                    "proxy choice: auto:L (L recursive residual proxies) or "
                    "cols:a,b (panel series)")
        ->capture_default_str();
  };

  CLI::App* fc = app.add_subcommand(
      "forecast", "fit on the full sample and emit h-step forecasts");
  add_config(fc);
  add_data_opts(fc);
  add_run_opts(fc);
  add_kernel_opts(fc);
  add_proxy_opt(fc);
  fc->add_option("--horizons", o.horizons, "forecast horizons (default 1)")
      ->delimiter(',');
  fc->callback([&o, fc] {
    if (!o.config_path.empty()) apply_config_file(fc, o.config_path);
    cmd_forecast(o);
  });

  CLI::App* bt = app.add_subcommand(
      "backtest", "rolling-window out-of-sample comparison across methods");
  add_config(bt);
  add_data_opts(bt);
  add_run_opts(bt);
  add_kernel_opts(bt);
  add_proxy_opt(bt);
  bt->add_option("--horizons", o.horizons,
                 "horizons (default 1,2,3,4,6,8,10,12)")
      ->delimiter(',');
  bt->add_option("--methods", o.methods,
                 "methods to run (default k3PRF,3PRF,PC,Sq-PC,PC-Sq,kPCA,AR,"
                 "DI)")
      ->delimiter(',');
  bt->add_option("--window-frac", o.window_frac,
                 "rolling window width as a fraction of the sample")
      ->capture_default_str();
  bt->add_flag("--freeze-sigma", o.freeze_sigma,
               "tune the bandwidth once on the first window instead of per "
               "window");
  bt->add_option("--ar-lags", o.ar_lags, "AR/DI lag-order candidates")
      ->delimiter(',')
      ->capture_default_str();
  bt->add_option("--pc-k", o.pc_k,
                 "factor count for the PC family, 0 = eigenvalue-ratio "
                 "selection")
      ->capture_default_str();
  bt->add_option("--di-k", o.di_k,
                 "DI factor count: -1 = share the selected k, 0 = pure AR")
      ->capture_default_str();
  bt->add_option("--tolerances", o.tolerances,
                 "percent slack levels for the winner-frequency table")
      ->delimiter(',')
      ->capture_default_str();
  bt->callback([&o, bt] {
    if (!o.config_path.empty()) apply_config_file(bt, o.config_path);
    cmd_backtest(o);
  });

  CLI::App* tn = app.add_subcommand(
      "tune", "cross-validate the gaussian bandwidth on the full sample");
  add_config(tn);
  add_data_opts(tn);
  add_run_opts(tn);
  add_proxy_opt(tn);
  tn->add_option("--horizons", o.horizons,
                 "horizon to tune for (first entry, default 1)")
      ->delimiter(',');
  tn->add_option("--multipliers", o.multipliers,
                 "bandwidth candidates as multiples of the median heuristic")
      ->delimiter(',')
      ->capture_default_str();
  tn->callback([&o, tn] {
    if (!o.config_path.empty()) apply_config_file(tn, o.config_path);
    cmd_tune(o);
  });

  CLI::App* sim = app.add_subcommand(
      "simulate", "Monte Carlo error-rate study on synthetic factor panels");
  add_config(sim);
  add_run_opts(sim);
  sim->add_option("--grid", o.grid, "panel sizes as M:T pairs")
      ->delimiter(',')
      ->capture_default_str();
  sim->add_option("--reps", o.reps, "replications per grid point")
      ->capture_default_str();
  sim->add_option("--factors", o.factors, "relevant factor count")
      ->capture_default_str();
  sim->add_option("--noise-factors", o.noise_factors,
                  "irrelevant factor count")
      ->capture_default_str();
  sim->add_option("--proxy-count", o.proxy_count, "proxies per draw")
      ->capture_default_str();
  sim->add_option("--eps-sd", o.eps_sd, "feature noise scale")
      ->capture_default_str();
  sim->add_option("--eta-sd", o.eta_sd, "target noise scale")
      ->capture_default_str();
  sim->add_option("--omega-sd", o.omega_sd, "proxy noise scale")
      ->capture_default_str();
  sim->add_option("--eps-ar1", o.eps_ar1,
                  "AR(1) coefficient for feature noise")
      ->capture_default_str();
  sim->add_flag("--orthogonal-factors", o.orthogonal_factors,
                "draw factors with exact sample moments");
  sim->callback([&o, sim] {
    if (!o.config_path.empty()) apply_config_file(sim, o.config_path);
    cmd_simulate(o);
  });

  CLI::App* cmp = app.add_subcommand(
      "compare", "winner-frequency tolerance table over saved reports");
  add_config(cmp);
  add_run_opts(cmp);
  cmp->add_option("--report", o.reports, "backtest report CSVs to compare")
      ->delimiter(',');
  cmp->add_option("--tolerances", o.tolerances,
                  "percent slack levels for the winner-frequency table")
      ->delimiter(',')
      ->capture_default_str();
  cmp->callback([&o, cmp] {
    if (!o.config_path.empty()) apply_config_file(cmp, o.config_path);
    cmd_compare(o);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error (invalid input): %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error (data): %s\n", e.what());
    return 3;
  } catch (const k3prf::NumericalError& e) {
    std::fprintf(stderr, "error (numerical): %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
