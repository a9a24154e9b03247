#pragma once

// benchmark forecasters: principal-component regressions (plain, squared
// inputs, squared factors), kernel PCA regression, and direct-projection
// AR / diffusion-index regressions.  all of them share the window
// convention used by the backtest engine: rows [0, W-h) carry observed
// targets and are the fit rows, the forecast is issued from row W-1, and
// factor values at rows past the fit block are obtained by projection,
// never by refitting.

#include <k3prf/common.hpp>
#include <k3prf/kernel.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace k3prf {

struct FactorExtract {
  MatrixXd factors;      // T x k, scaled so factors'factors = T * I
  VectorXd eigenvalues;  // all T eigenvalues of XX'/(TN), descending
  MatrixXd loadings;     // N x k, X'F/T; used for projecting new rows
  int k_selected = 0;
};

// principal components in dual form: eigenvectors of XX'/(TN), which is
// cheaper than X'X whenever T < N and identical in span.  sign fixed by
// making the largest-magnitude coordinate of each factor positive.
inline FactorExtract pca_factors(const MatrixXd& X, int k) {
  const Eigen::Index T = X.rows();
  const Eigen::Index N = X.cols();
  if (k < 1) throw InvalidInput("pca_factors: k must be >= 1");
  if (k > std::min<Eigen::Index>(T, N))
    throw InvalidInput("pca_factors: k exceeds matrix rank bound");
  const MatrixXd S =
      X * X.transpose() / (static_cast<double>(T) * static_cast<double>(N));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  if (es.info() != Eigen::Success)
    throw NumericalError("pca_factors: eigendecomposition failed");

  // Eigen returns ascending order; flip to descending and clamp the tiny
  // negative values that show up from rounding
  VectorXd evals = es.eigenvalues().reverse();
  evals = evals.cwiseMax(0.0);

  FactorExtract out;
  out.eigenvalues = evals;
  out.k_selected = k;
  out.factors.resize(T, k);
  const double sqT = std::sqrt(static_cast<double>(T));
  for (int j = 0; j < k; ++j) {
    VectorXd u = es.eigenvectors().col(T - 1 - j);
    Eigen::Index imax = 0;
    u.cwiseAbs().maxCoeff(&imax);
    if (u(imax) < 0.0) u = -u;
    out.factors.col(j) = sqT * u;
  }
  out.loadings = X.transpose() * out.factors / static_cast<double>(T);
  return out;
}

// factor values for rows outside the extraction sample: cross-sectional
// regression of each new row on the loadings.  reproduces the extracted
// factors exactly when applied to the original rows.
inline MatrixXd project_pca(const FactorExtract& fx, const MatrixXd& X_new) {
  if (X_new.cols() != fx.loadings.rows())
    throw InvalidInput("project_pca: column mismatch with loadings");
  const MatrixXd LtL = fx.loadings.transpose() * fx.loadings;
  const SymSolver solver(LtL, "loadings cross product");
  return solver.solve(fx.loadings.transpose() * X_new.transpose()).transpose();
}

// factor-count choice by the largest adjacent eigenvalue ratio
// lambda_k / lambda_{k+1}, k = 1..k_max; ties resolved to the smaller k
inline int eigenvalue_ratio_k(const VectorXd& eigenvalues, int k_max) {
  if (k_max < 1) throw InvalidInput("eigenvalue_ratio_k: k_max must be >= 1");
  if (eigenvalues.size() < k_max + 1)
    throw InvalidInput("eigenvalue_ratio_k: need k_max + 1 eigenvalues");
  for (int i = 0; i + 1 < eigenvalues.size(); ++i)
    if (eigenvalues(i) < eigenvalues(i + 1) - 1e-12 * eigenvalues.cwiseAbs().maxCoeff())
      throw InvalidInput("eigenvalue_ratio_k: eigenvalues must be descending");
  for (int i = 0; i <= k_max; ++i)
    if (!(eigenvalues(i) > 0.0))
      throw NumericalError(
          "eigenvalue_ratio_k: needs k_max + 1 positive eigenvalues");
  int best_k = 1;
  double best_ratio = eigenvalues(0) / eigenvalues(1);
  for (int k = 2; k <= k_max; ++k) {
    const double ratio = eigenvalues(k - 1) / eigenvalues(k);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_k = k;
    }
  }
  return best_k;
}

struct BaselineForecast {
  double forecast = 0.0;
  VectorXd fitted;          // over the fit rows
  double in_sample_r2 = 0.0;
  int k_used = 0;
  int p_used = 0;
};

namespace detail {

inline double r2_of(const VectorXd& y, const VectorXd& fitted) {
  const double sst = (y.array() - y.mean()).square().sum();
  if (sst <= 0.0) return 0.0;
  return 1.0 - (y - fitted).squaredNorm() / sst;
}

// regression of the aligned targets on supplied fit-row regressors plus a
// matching regressor row for the forecast origin
inline BaselineForecast regress_and_forecast(const MatrixXd& R_fit,
                                             const VectorXd& y_fit,
                                             const RowVectorXd& r_test,
                                             const char* what) {
  const MatrixXd D = with_intercept(R_fit);
  const VectorXd coef = ols(D, y_fit, what);
  BaselineForecast out;
  out.fitted = D * coef;
  out.in_sample_r2 = r2_of(y_fit, out.fitted);
  RowVectorXd d_test(r_test.size() + 1);
  d_test(0) = 1.0;
  d_test.rightCols(r_test.size()) = r_test;
  out.forecast = d_test.dot(coef);
  return out;
}

inline void check_window(Eigen::Index W, int h, const char* what) {
  if (h < 1) throw InvalidInput(std::string(what) + ": h must be >= 1");
  if (W - h < 4)
    throw InvalidInput(std::string(what) + ": window too short for horizon");
}

}  // namespace detail

// principal-component regression: factors from the fit rows, target on
// [1, F], forecast from the projected factor at the last window row
inline BaselineForecast pc_regression_forecast(const MatrixXd& Xw,
                                               const VectorXd& yw, int h,
                                               int k) {
  detail::check_window(Xw.rows(), h, "pc_regression_forecast");
  const Eigen::Index W = Xw.rows();
  const Eigen::Index n_fit = W - h;
  const MatrixXd X_fit = Xw.topRows(n_fit);
  const VectorXd y_fit = yw.tail(n_fit);
  const FactorExtract fx = pca_factors(X_fit, k);
  const RowVectorXd f_test = project_pca(fx, Xw.row(W - 1));
  BaselineForecast out = detail::regress_and_forecast(
      fx.factors, y_fit, f_test, "pc regression");
  out.k_used = k;
  return out;
}

// squared-input variant: append elementwise squares of the (already
// standardized) predictors, restandardize each squared column over the
// window, then run the same PC regression on the augmented panel.
// squared columns with no variance are dropped.
inline BaselineForecast sq_pc_regression_forecast(const MatrixXd& Xw,
                                                  const VectorXd& yw, int h,
                                                  int k) {
  detail::check_window(Xw.rows(), h, "sq_pc_regression_forecast");
  const Eigen::Index W = Xw.rows();
  const Eigen::Index N = Xw.cols();
  std::vector<Eigen::Index> keep;
  MatrixXd sq = Xw.array().square();
  for (Eigen::Index j = 0; j < N; ++j) {
    const double mu = sq.col(j).mean();
    const double sd = std::sqrt((sq.col(j).array() - mu).square().sum() /
                                static_cast<double>(W - 1));
    if (sd > 1e-12) {
      sq.col(j) = (sq.col(j).array() - mu) / sd;
      keep.push_back(j);
    }
  }
  MatrixXd Aug(W, N + static_cast<Eigen::Index>(keep.size()));
  Aug.leftCols(N) = Xw;
  for (std::size_t i = 0; i < keep.size(); ++i)
    Aug.col(N + static_cast<Eigen::Index>(i)) = sq.col(keep[i]);
  return pc_regression_forecast(Aug, yw, h, k);
}

// squared-factor variant: plain factors, but the regression sees both the
// factors and their elementwise squares
inline BaselineForecast pc_sq_regression_forecast(const MatrixXd& Xw,
                                                  const VectorXd& yw, int h,
                                                  int k) {
  detail::check_window(Xw.rows(), h, "pc_sq_regression_forecast");
  const Eigen::Index W = Xw.rows();
  const Eigen::Index n_fit = W - h;
  const FactorExtract fx = pca_factors(Xw.topRows(n_fit), k);
  const RowVectorXd f_test = project_pca(fx, Xw.row(W - 1));
  MatrixXd R(n_fit, 2 * k);
  R.leftCols(k) = fx.factors;
  R.rightCols(k) = fx.factors.array().square();
  RowVectorXd r_test(2 * k);
  r_test.leftCols(k) = f_test;
  r_test.rightCols(k) = f_test.array().square();
  BaselineForecast out = detail::regress_and_forecast(
      R, yw.tail(n_fit), r_test, "pc-squared regression");
  out.k_used = k;
  return out;
}

// kernel PCA components.  coefficient vectors are the centered-Gram
// eigenvectors scaled by 1/sqrt(eigenvalue); components below 1e-10 of
// the leading eigenvalue are excluded.  regression forecasts are
// invariant to that scaling, so only the cutoff is substantive.
struct KpcaExtract {
  KernelSpec spec;
  MatrixXd X_fit;        // retained for projecting new rows
  GramMatrix K;          // uncentered fit Gram, needed for cross centering
  MatrixXd alpha;        // n_fit x kept coefficient vectors
  MatrixXd scores;       // n_fit x kept component scores
  VectorXd eigenvalues;  // centered-Gram eigenvalues, descending
  int k_kept = 0;
};

inline KpcaExtract kpca_components(const MatrixXd& X_fit, int k,
                                   const KernelSpec& spec) {
  if (k < 1) throw InvalidInput("kpca: k must be >= 1");
  const Eigen::Index n_fit = X_fit.rows();
  KpcaExtract out;
  out.spec = spec;
  out.X_fit = X_fit;
  out.K = gram(spec, X_fit);
  const GramMatrix Kc = center_gram(out.K);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Kc.values);
  if (es.info() != Eigen::Success)
    throw NumericalError("kpca: eigendecomposition failed");
  out.eigenvalues = es.eigenvalues().reverse();
  const double lead = out.eigenvalues(0);
  if (!(lead > 0.0))
    throw NumericalError("kpca: centered Gram has no positive eigenvalue");

  MatrixXd alpha(n_fit, k);
  int kept = 0;
  for (int j = 0; j < k && j < n_fit; ++j) {
    const double lambda = out.eigenvalues(j);
    if (lambda < 1e-10 * lead) break;
    VectorXd u = es.eigenvectors().col(n_fit - 1 - j);
    Eigen::Index imax = 0;
    u.cwiseAbs().maxCoeff(&imax);
    if (u(imax) < 0.0) u = -u;
    alpha.col(kept++) = u / std::sqrt(lambda);
  }
  if (kept == 0) throw NumericalError("kpca: all components below cutoff");
  out.alpha = alpha.leftCols(kept);
  out.scores = Kc.values * out.alpha;
  out.k_kept = kept;
  return out;
}

// component scores for new rows via the centered cross Gram
inline MatrixXd kpca_project(const KpcaExtract& kx, const MatrixXd& X_new) {
  const MatrixXd kappa = cross_gram(kx.spec, kx.X_fit, X_new);
  return center_cross_gram(kappa, kx.K) * kx.alpha;
}

inline BaselineForecast kpca_regression_forecast(const MatrixXd& Xw,
                                                 const VectorXd& yw, int h,
                                                 int k,
                                                 const KernelSpec& spec) {
  detail::check_window(Xw.rows(), h, "kpca_regression_forecast");
  const Eigen::Index W = Xw.rows();
  const Eigen::Index n_fit = W - h;
  const KpcaExtract kx = kpca_components(Xw.topRows(n_fit), k, spec);
  const RowVectorXd test_score = kpca_project(kx, Xw.row(W - 1)).row(0);
  BaselineForecast out = detail::regress_and_forecast(
      kx.scores, yw.tail(n_fit), test_score, "kpca regression");
  out.k_used = kx.k_kept;
  return out;
}

namespace detail {

// shared direct-projection autoregression: y_{t+h} on an intercept, p own
// lags, and optionally k factor values dated t.  k = 0 reduces to the
// pure AR, bit for bit.
inline BaselineForecast lag_regression_forecast(const MatrixXd& Xw,
                                                const VectorXd& yw, int p,
                                                int k, int h,
                                                const char* what) {
  if (p < 1) throw InvalidInput(std::string(what) + ": p must be >= 1");
  check_window(yw.size(), h, what);
  const Eigen::Index W = yw.size();
  const Eigen::Index n_fit = W - h;  // fit rows are t = 0 .. n_fit-1
  const Eigen::Index t0 = p - 1;     // first t with p lags available
  const Eigen::Index n_rows = n_fit - t0;
  if (n_rows < p + k + 2)
    throw InvalidInput(std::string(what) + ": window too short for lag order");

  FactorExtract fx;
  MatrixXd f_rows;      // factor values for design rows
  RowVectorXd f_test;
  if (k > 0) {
    fx = pca_factors(Xw.topRows(n_fit), k);
    f_rows = fx.factors;
    f_test = project_pca(fx, Xw.row(W - 1));
  }

  MatrixXd R(n_rows, p + k);
  VectorXd y_fit(n_rows);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const Eigen::Index t = t0 + r;
    for (int j = 0; j < p; ++j) R(r, j) = yw(t - j);
    if (k > 0) R.row(r).rightCols(k) = f_rows.row(t);
    y_fit(r) = yw(t + h);
  }
  RowVectorXd r_test(p + k);
  for (int j = 0; j < p; ++j) r_test(j) = yw(W - 1 - j);
  if (k > 0) r_test.rightCols(k) = f_test;

  BaselineForecast out = regress_and_forecast(R, y_fit, r_test, what);
  out.p_used = p;
  out.k_used = k;
  return out;
}

}  // namespace detail

inline BaselineForecast ar_forecast(const VectorXd& yw, int p, int h) {
  return detail::lag_regression_forecast(MatrixXd(), yw, p, 0, h,
                                         "ar regression");
}

inline BaselineForecast di_forecast(const MatrixXd& Xw, const VectorXd& yw,
                                    int p, int k, int h) {
  if (k < 0) throw InvalidInput("di_forecast: k must be >= 0");
  return detail::lag_regression_forecast(Xw, yw, p, k, h, "di regression");
}

}  // namespace k3prf
