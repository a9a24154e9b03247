// regenerates the committed fixtures under data/: a small linear factor
// panel, a larger panel whose target has quadratic long-horizon structure,
// and the golden backtest report plus tolerance table derived from the
// small panel.  everything is seeded, so rerunning reproduces the committed
// files byte for byte.

#include <k3prf/common.hpp>
#include <k3prf/data.hpp>
#include <k3prf/evaluation.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace {

using k3prf::MatrixXd;
using k3prf::Rng;
using k3prf::VectorXd;

std::string quarter_label(int first_year, int t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04dQ%d", first_year + t / 4, t % 4 + 1);
  return buf;
}

std::string series_label(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%02d", i);
  return buf;
}

// AR(1) path with unit stationary variance
VectorXd ar1_path(Rng& rng, int n, double rho) {
  VectorXd f(n);
  f(0) = rng.normal();
  const double innov = std::sqrt(1.0 - rho * rho);
  for (int t = 1; t < n; ++t) f(t) = rho * f(t - 1) + innov * rng.normal();
  return f;
}

// one persistent factor, twenty noisy loadings, target led by the factor
k3prf::Panel make_toy_panel() {
  const int T = 120;
  const int N = 20;
  Rng rng(20240501);

  const VectorXd f = ar1_path(rng, T, 0.75);
  VectorXd lambda(N);
  for (int i = 0; i < N; ++i) lambda(i) = 1.0 + 0.4 * rng.normal();

  MatrixXd X(T, N);
  for (int i = 0; i < N; ++i)
    X.col(i) = lambda(i) * f + 0.6 * rng.normal_vector(T);

  VectorXd y(T);
  y(0) = 0.35 * rng.normal();
  for (int t = 1; t < T; ++t) y(t) = 0.9 * f(t - 1) + 0.35 * rng.normal();

  k3prf::Panel panel;
  panel.names.push_back("tgt");
  for (int i = 0; i < N; ++i) panel.names.push_back(series_label(i));
  panel.X.resize(T, N + 1);
  panel.X.col(0) = y;
  panel.X.rightCols(N) = X;
  for (int t = 0; t < T; ++t)
    panel.time_index.push_back(quarter_label(1990, t));
  return panel;
}

// the target mixes a one-quarter factor lead with a lagged squared factor,
// so short horizons are linearly forecastable while h = 12 rewards methods
// that can represent squares of the latent factor
k3prf::Panel make_nonlinear_panel() {
  const int T = 200;
  const int N = 40;
  const int lag = 12;
  Rng rng(20240502);

  const VectorXd fe = ar1_path(rng, T + lag, 0.8);  // index t + lag
  VectorXd lambda(N);
  for (int i = 0; i < N; ++i)
    lambda(i) = (i % 2 == 0 ? 0.8 : -0.8) + 0.6 * rng.normal();

  MatrixXd X(T, N);
  for (int i = 0; i < N; ++i)
    X.col(i) = lambda(i) * fe.tail(T) + 0.5 * rng.normal_vector(T);

  VectorXd y(T);
  for (int t = 0; t < T; ++t) {
    const double lead = fe(t + lag - 1);          // factor one quarter back
    const double quad = fe(t) * fe(t) - 1.0;      // squared factor, 12 back
    y(t) = 1.0 * lead + 1.0 * quad + 0.3 * rng.normal();
  }

  k3prf::Panel panel;
  panel.names.push_back("tgt");
  for (int i = 0; i < N; ++i) panel.names.push_back(series_label(i));
  panel.X.resize(T, N + 1);
  panel.X.col(0) = y;
  panel.X.rightCols(N) = X;
  for (int t = 0; t < T; ++t)
    panel.time_index.push_back(quarter_label(1960, t));
  return panel;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(out_dir);

  const k3prf::Panel toy = make_toy_panel();
  k3prf::write_panel_csv(toy, out_dir + "/toy_panel.csv");

  const k3prf::Panel nonlinear = make_nonlinear_panel();
  k3prf::write_panel_csv(nonlinear, out_dir + "/nonlinear_panel.csv");

  // golden report: pinned configuration on the toy panel
  k3prf::BacktestConfig cfg;
  cfg.horizons = {1, 2, 4, 8};
  cfg.sigma = 3.0;  // fixed bandwidth keeps the golden run cheap
  cfg.seed = 1234;
  const k3prf::BacktestReport report =
      k3prf::rolling_backtest(toy, "tgt", cfg);
  k3prf::write_report_csv(report, out_dir + "/golden_report.csv");
  k3prf::write_tolerance_csv(
      k3prf::tolerance_table({report}, {0.0, 1.0, 5.0, 10.0, 25.0}),
      out_dir + "/golden_tolerance.csv");

  std::printf("wrote toy_panel, nonlinear_panel, golden_report, "
              "golden_tolerance under %s\n",
              out_dir.c_str());
  return 0;
}
