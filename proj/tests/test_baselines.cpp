#include <k3prf/baselines.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "helpers.hpp"

using namespace k3prf;
using testutil::max_principal_angle;

namespace {

// quadratic-in-the-factor window: one strong factor drives the panel and
// the target is a pure even function of it, so linear factor regressions
// see nothing while squared variants recover it
struct QuadWindow {
  MatrixXd X;
  VectorXd y;
  VectorXd f;
};

QuadWindow make_quadratic_window(Eigen::Index W, Eigen::Index N, int h,
                                 std::uint64_t seed) {
  Rng rng(seed);
  QuadWindow w;
  w.f = rng.normal_vector(W);
  const MatrixXd lambda = rng.normal_matrix(N, 1);
  w.X = w.f * lambda.transpose() + 0.01 * rng.normal_matrix(W, N);
  w.y.resize(W);
  w.y.setZero();
  for (Eigen::Index t = h; t < W; ++t)
    w.y(t) = w.f(t - h) * w.f(t - h) - 1.0;
  return w;
}

}  // namespace

TEST_CASE("dual-form principal components match the primal eigenproblem") {
  const auto panel = testutil::make_factor_panel(50, 12, 2, 0.3, 201);
  const FactorExtract fx = pca_factors(panel.X, 2);

  // primal route: eigenvectors of X'X give the loadings; factors follow
  // by projection.  spans agree to eigenvector precision (~sqrt(eps))
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(panel.X.transpose() * panel.X);
  REQUIRE(es.info() == Eigen::Success);
  const MatrixXd V = es.eigenvectors().rightCols(2);
  const MatrixXd primal_factors = panel.X * V;
  CHECK(max_principal_angle(fx.factors, primal_factors) < 1e-7);

  // and the true factor space is recovered well at this noise level
  CHECK(max_principal_angle(fx.factors, panel.F) < 0.2);
}

TEST_CASE("principal-component factors are orthogonal with unit scale") {
  const auto panel = testutil::make_factor_panel(60, 15, 3, 0.5, 202);
  const FactorExtract fx = pca_factors(panel.X, 3);
  const MatrixXd G =
      fx.factors.transpose() * fx.factors / static_cast<double>(60);
  CHECK((G - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  // eigenvalues come out descending
  for (Eigen::Index i = 0; i + 1 < fx.eigenvalues.size(); ++i)
    CHECK(fx.eigenvalues(i) >= fx.eigenvalues(i + 1));
}

TEST_CASE("factor extraction is deterministic and sign-fixed") {
  const auto panel = testutil::make_factor_panel(45, 10, 2, 0.4, 203);
  const FactorExtract a = pca_factors(panel.X, 2);
  const FactorExtract b = pca_factors(panel.X, 2);
  CHECK(a.factors == b.factors);
  CHECK(a.loadings == b.loadings);

  // flipping the panel sign leaves the row-space eigenproblem unchanged,
  // so the sign convention keeps the factors themselves stable
  const FactorExtract c = pca_factors(MatrixXd(-panel.X), 2);
  CHECK((a.factors - c.factors).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("projection reproduces in-sample factors and handles new rows") {
  const auto panel = testutil::make_factor_panel(40, 9, 2, 0.3, 204);
  const FactorExtract fx = pca_factors(panel.X.topRows(30), 2);
  CHECK((project_pca(fx, panel.X.topRows(30)) - fx.factors)
            .cwiseAbs()
            .maxCoeff() < 1e-8);
  const MatrixXd f_new = project_pca(fx, panel.X.bottomRows(10));
  REQUIRE(f_new.rows() == 10);
  REQUIRE(f_new.cols() == 2);
  CHECK(f_new.allFinite());
}

TEST_CASE("eigenvalue-ratio factor count picks the largest gap") {
  VectorXd ev(5);
  ev << 100.0, 50.0, 1.0, 0.9, 0.8;
  CHECK(eigenvalue_ratio_k(ev, 3) == 2);

  VectorXd flat(4);
  flat << 8.0, 4.0, 2.0, 1.0;  // every adjacent ratio equals 2
  CHECK(eigenvalue_ratio_k(flat, 3) == 1);

  VectorXd ev2(4);
  ev2 << 10.0, 9.0, 8.5, 1.0;
  CHECK(eigenvalue_ratio_k(ev2, 3) == 3);

  CHECK_THROWS_AS(eigenvalue_ratio_k(ev, 5), InvalidInput);
  CHECK_THROWS_AS(eigenvalue_ratio_k(ev, 0), InvalidInput);
  VectorXd asc(3);
  asc << 1.0, 2.0, 3.0;
  CHECK_THROWS_AS(eigenvalue_ratio_k(asc, 1), InvalidInput);
  VectorXd zeros(3);
  zeros << 1.0, 0.0, 0.0;
  CHECK_THROWS_AS(eigenvalue_ratio_k(zeros, 2), NumericalError);
}

TEST_CASE("pc regression nails a linear factor relationship") {
  Rng rng(205);
  const Eigen::Index W = 60;
  const int h = 1;
  const VectorXd f = rng.normal_vector(W);
  const MatrixXd lambda = rng.normal_matrix(12, 1);
  const MatrixXd X = f * lambda.transpose();
  VectorXd y(W);
  y.setZero();
  for (Eigen::Index t = h; t < W; ++t) y(t) = 2.0 * f(t - h) + 3.0;

  const BaselineForecast fc = pc_regression_forecast(X, y, h, 1);
  CHECK(fc.in_sample_r2 > 1.0 - 1e-8);
  CHECK(fc.forecast == Catch::Approx(2.0 * f(W - 1) + 3.0).margin(1e-6));
}

TEST_CASE("squared variants pick up an even nonlinearity that pc misses") {
  const QuadWindow w = make_quadratic_window(80, 10, 1, 206);
  const double r2_pc = pc_regression_forecast(w.X, w.y, 1, 1).in_sample_r2;
  const double r2_pc_sq =
      pc_sq_regression_forecast(w.X, w.y, 1, 1).in_sample_r2;
  const double r2_sq_pc =
      sq_pc_regression_forecast(w.X, w.y, 1, 2).in_sample_r2;
  CHECK(r2_pc_sq - r2_pc > 0.2);
  CHECK(r2_sq_pc - r2_pc > 0.2);
  CHECK(r2_pc < 0.3);
  CHECK(r2_pc_sq > 0.9);
}

TEST_CASE("kernel pca with a linear kernel spans the pc factors") {
  const auto panel = testutil::make_factor_panel(50, 8, 2, 0.4, 207);
  // kernel pca centers the implicit features, so compare on a panel whose
  // columns are already demeaned
  const MatrixXd Xd = demean_columns(panel.X);
  const KpcaExtract kx = kpca_components(Xd, 2, KernelSpec::linear());
  const FactorExtract fx = pca_factors(Xd, 2);
  REQUIRE(kx.k_kept == 2);
  CHECK(max_principal_angle(kx.scores, fx.factors) < 1e-6);
  // projecting the fit rows reproduces the scores
  CHECK((kpca_project(kx, Xd) - kx.scores).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gaussian kernel pca helps on the quadratic window") {
  const QuadWindow w = make_quadratic_window(80, 10, 1, 208);
  const double r2_pc = pc_regression_forecast(w.X, w.y, 1, 1).in_sample_r2;
  const double r2_kpca =
      kpca_regression_forecast(w.X, w.y, 1, 4, KernelSpec::gaussian(2.0))
          .in_sample_r2;
  CHECK(r2_kpca > r2_pc + 0.2);
}

TEST_CASE("kpca component cutoff drops null directions") {
  // rank-2 panel: asking for many linear-kernel components keeps only
  // the positive-eigenvalue ones
  Rng rng(209);
  const MatrixXd F = rng.normal_matrix(30, 2);
  const MatrixXd lambda = rng.normal_matrix(6, 2);
  const MatrixXd X = F * lambda.transpose();
  const KpcaExtract kx = kpca_components(X, 10, KernelSpec::linear());
  CHECK(kx.k_kept == 2);
}

TEST_CASE("diffusion index with no factors is exactly the autoregression") {
  const auto panel = testutil::make_factor_panel(70, 8, 2, 0.5, 210);
  for (const int p : {1, 2, 4}) {
    for (const int h : {1, 3}) {
      const BaselineForecast ar = ar_forecast(panel.y, p, h);
      const BaselineForecast di = di_forecast(panel.X, panel.y, p, 0, h);
      CHECK(ar.forecast == di.forecast);
      CHECK(ar.fitted == di.fitted);
      CHECK(ar.in_sample_r2 == di.in_sample_r2);
    }
  }
}

TEST_CASE("autoregression matches a hand-built least squares") {
  const auto panel = testutil::make_factor_panel(50, 6, 1, 0.5, 211);
  const VectorXd& y = panel.y;
  const int p = 2;
  const int h = 2;
  const Eigen::Index W = y.size();
  const Eigen::Index n_fit = W - h;

  // reference: assemble the lag design with explicit loops
  std::vector<double> rows;
  std::vector<double> targets;
  for (Eigen::Index t = p - 1; t < n_fit; ++t) {
    rows.push_back(y(t));
    rows.push_back(y(t - 1));
    targets.push_back(y(t + h));
  }
  const auto n = static_cast<Eigen::Index>(targets.size());
  MatrixXd D(n, 3);
  VectorXd ty(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    D(r, 0) = 1.0;
    D(r, 1) = rows[static_cast<std::size_t>(2 * r)];
    D(r, 2) = rows[static_cast<std::size_t>(2 * r + 1)];
    ty(r) = targets[static_cast<std::size_t>(r)];
  }
  const VectorXd coef = (D.transpose() * D).ldlt().solve(D.transpose() * ty);
  const double expected = coef(0) + coef(1) * y(W - 1) + coef(2) * y(W - 2);

  const BaselineForecast ar = ar_forecast(y, p, h);
  CHECK(ar.forecast == Catch::Approx(expected).margin(1e-9));
  CHECK(ar.p_used == p);
}

TEST_CASE("diffusion index uses factor information when it matters") {
  // target driven by the factor, not by its own lags
  Rng rng(212);
  const Eigen::Index W = 80;
  const VectorXd f = rng.normal_vector(W);
  const MatrixXd lambda = rng.normal_matrix(10, 1);
  const MatrixXd X = f * lambda.transpose() + 0.05 * rng.normal_matrix(W, 10);
  VectorXd y(W);
  y.setZero();
  for (Eigen::Index t = 1; t < W; ++t) y(t) = f(t - 1);

  const double r2_ar = ar_forecast(y, 1, 1).in_sample_r2;
  const double r2_di = di_forecast(X, y, 1, 1, 1).in_sample_r2;
  CHECK(r2_di > r2_ar + 0.3);
  CHECK(r2_di > 0.9);
}

TEST_CASE("baseline forecasts are invariant to predictor column order") {
  const auto panel = testutil::make_factor_panel(60, 8, 2, 0.4, 213);
  std::vector<Eigen::Index> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[0], perm[3]);
  MatrixXd Xp(60, 8);
  for (Eigen::Index j = 0; j < 8; ++j) Xp.col(j) = panel.X.col(perm[static_cast<std::size_t>(j)]);

  const int h = 1;
  const int k = 2;
  CHECK(pc_regression_forecast(panel.X, panel.y, h, k).forecast ==
        Catch::Approx(pc_regression_forecast(Xp, panel.y, h, k).forecast)
            .margin(1e-9));
  CHECK(sq_pc_regression_forecast(panel.X, panel.y, h, k).forecast ==
        Catch::Approx(sq_pc_regression_forecast(Xp, panel.y, h, k).forecast)
            .margin(1e-9));
  CHECK(
      kpca_regression_forecast(panel.X, panel.y, h, k, KernelSpec::gaussian(3.0))
          .forecast ==
      Catch::Approx(kpca_regression_forecast(Xp, panel.y, h, k,
                                             KernelSpec::gaussian(3.0))
                        .forecast)
          .margin(1e-9));
  CHECK(di_forecast(panel.X, panel.y, 2, k, h).forecast ==
        Catch::Approx(di_forecast(Xp, panel.y, 2, k, h).forecast)
            .margin(1e-9));
}

TEST_CASE("window and order validation in the baselines") {
  const auto panel = testutil::make_factor_panel(50, 6, 1, 0.5, 214);
  CHECK_THROWS_AS(pc_regression_forecast(panel.X, panel.y, 0, 1),
                  InvalidInput);
  CHECK_THROWS_AS(pc_regression_forecast(panel.X, panel.y, 48, 1),
                  InvalidInput);
  CHECK_THROWS_AS(pca_factors(panel.X, 0), InvalidInput);
  CHECK_THROWS_AS(pca_factors(panel.X, 7), InvalidInput);
  CHECK_THROWS_AS(ar_forecast(panel.y, 0, 1), InvalidInput);
  CHECK_THROWS_AS(di_forecast(panel.X, panel.y, 1, -1, 1), InvalidInput);
  CHECK_THROWS_AS(ar_forecast(panel.y.head(6), 4, 1), InvalidInput);
}
