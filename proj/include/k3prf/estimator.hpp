#pragma once

// three-pass regression filter driven entirely by Gram matrices.  with
// Zc = demeaned proxies and Kc the double-centered Gram, the whole fit
// reduces to three L x L blocks
//   W = Zc'Zc,   A = Zc' K Zc,   B = (Kc Zc)'(Kc Zc)
// giving
//   F_hat  = K Zc A^{-1} W                (factor estimates, T x L)
//   beta   = W^{-1} A B^{-1} (Kc Zc)' y   (forecast coefficients)
//   y_hat  = ybar + Kc Zc B^{-1} (Kc Zc)' y
// the same fit is also available as three literal least-squares passes
// over an explicit feature matrix; both routes agree to rounding, which
// the tests pin down.

#include <k3prf/common.hpp>
#include <k3prf/kernel.hpp>

#include <string>
#include <utility>
#include <vector>

namespace k3prf {

struct ProxySet {
  enum class Provenance { TheoryGuided, Auto };

  MatrixXd Z;
  Provenance provenance = Provenance::TheoryGuided;
  std::vector<std::string> names;  // optional, TheoryGuided only

  static ProxySet theory(MatrixXd Z, std::vector<std::string> names = {}) {
    ProxySet p;
    p.Z = std::move(Z);
    p.provenance = Provenance::TheoryGuided;
    p.names = std::move(names);
    return p;
  }

  static ProxySet automatic(MatrixXd Z) {
    ProxySet p;
    p.Z = std::move(Z);
    p.provenance = Provenance::Auto;
    return p;
  }

  Eigen::Index count() const { return Z.cols(); }

  void validate() const {
    if (Z.size() == 0) throw InvalidInput("ProxySet: empty proxy matrix");
    if (Z.hasNaN()) throw InvalidInput("ProxySet: proxies contain NaN");
    if (!names.empty() &&
        names.size() != static_cast<std::size_t>(Z.cols()))
      throw InvalidInput("ProxySet: name count does not match columns");
  }
};

struct K3prfFit {
  KernelSpec spec;
  MatrixXd X_train;  // retained so predict can build cross Grams
  MatrixXd Kc;       // centered training Gram
  MatrixXd Z;        // proxies as supplied
  MatrixXd Zc;       // demeaned proxies
  MatrixXd W;        // Zc'Zc
  MatrixXd A;        // Zc' K Zc
  MatrixXd B;        // (Kc Zc)'(Kc Zc)
  MatrixXd proj;     // Zc A^{-1} W; F_hat = K * proj, new factors = kappa * proj
  MatrixXd F_hat;    // factor estimates, T x L
  VectorXd beta_hat;
  VectorXd y_train;
  double y_bar = 0.0;
  RowVectorXd f_bar;  // column means of F_hat
};

// fit against a precomputed uncentered Gram of X.  the auto-proxy loop
// reuses one Gram across its incremental fits through this entry point.
inline K3prfFit fit_with_gram(const MatrixXd& X, const GramMatrix& K,
                              const VectorXd& y, const ProxySet& proxies,
                              const KernelSpec& spec) {
  spec.validate();
  proxies.validate();
  if (K.centered) throw InvalidInput("fit: expected an uncentered Gram");
  const Eigen::Index T = X.rows();
  if (K.values.rows() != T || K.values.cols() != T)
    throw InvalidInput("fit: Gram size does not match X rows");
  if (y.size() != T) throw InvalidInput("fit: y length does not match X rows");
  if (proxies.Z.rows() != T)
    throw InvalidInput("fit: proxy rows do not match X rows");
  const Eigen::Index L = proxies.Z.cols();
  if (T < L + 2) throw InvalidInput("fit: too few observations for proxy count");
  if (y.hasNaN() || X.hasNaN()) throw InvalidInput("fit: input contains NaN");

  K3prfFit fit;
  fit.spec = spec;
  fit.X_train = X;
  fit.Z = proxies.Z;
  fit.Zc = demean_columns(proxies.Z);
  fit.W = fit.Zc.transpose() * fit.Zc;

  // a rank-deficient W means the demeaned proxies are collinear; no ridge
  // can repair that, so fail loudly before touching the kernel blocks
  const SymSolver solve_W(fit.W, "W (proxy covariance)", /*allow_jitter=*/false);

  const MatrixXd KZc = K.values * fit.Zc;
  fit.A = fit.Zc.transpose() * KZc;
  const SymSolver solve_A(fit.A, "A (proxy-kernel covariance)");

  fit.Kc = center_gram(K).values;
  const MatrixXd G = fit.Kc * fit.Zc;  // equals Kc Z since Kc kills constants
  fit.B = G.transpose() * G;
  const SymSolver solve_B(fit.B, "B (squared kernel covariance)");

  fit.proj = fit.Zc * solve_A.solve(fit.W);
  fit.F_hat = K.values * fit.proj;
  fit.beta_hat = solve_W.solve(fit.A * solve_B.solve(G.transpose() * y));
  fit.y_train = y;
  fit.y_bar = y.mean();
  fit.f_bar = fit.F_hat.colwise().mean();
  return fit;
}

inline K3prfFit fit(const MatrixXd& X, const VectorXd& y,
                    const ProxySet& proxies, const KernelSpec& spec) {
  return fit_with_gram(X, gram(spec, X), y, proxies, spec);
}

// in-sample forecasts in closed form: ybar + Kc Zc B^{-1} (Kc Zc)' y
inline VectorXd fitted_values(const K3prfFit& fit) {
  const MatrixXd G = fit.Kc * fit.Zc;
  const SymSolver solve_B(fit.B, "B (squared kernel covariance)");
  const VectorXd q = solve_B.solve(G.transpose() * fit.y_train);
  return (G * q).array() + fit.y_bar;
}

// same forecasts through the factor route: ybar + demeaned F_hat * beta.
// kept separate so tests can assert the two paths agree.
inline VectorXd fitted_values_factor_path(const K3prfFit& fit) {
  const MatrixXd Fc = demean_columns(fit.F_hat);
  return (Fc * fit.beta_hat).array() + fit.y_bar;
}

// out-of-sample forecasts.  X_new must already be on the training scale
// (caller standardizes with the training window statistics).  new factor
// rows come from the raw cross Gram times the stored projection, and the
// forecast recenters them with the stored factor means, which reproduces
// centered cross-Gram projection exactly.
inline VectorXd predict(const K3prfFit& fit, const MatrixXd& X_new) {
  if (X_new.cols() != fit.X_train.cols())
    throw InvalidInput("predict: X_new column count does not match training");
  const MatrixXd kappa = cross_gram(fit.spec, fit.X_train, X_new);
  const MatrixXd F_new = kappa * fit.proj;
  return ((F_new.rowwise() - fit.f_bar) * fit.beta_hat).array() + fit.y_bar;
}

// factor estimates for new rows, same convention as F_hat
inline MatrixXd project_factors(const K3prfFit& fit, const MatrixXd& X_new) {
  const MatrixXd kappa = cross_gram(fit.spec, fit.X_train, X_new);
  return kappa * fit.proj;
}

// ---------------------------------------------------------------------------
// literal three-pass reference: works on an explicit feature matrix and
// runs the passes as plain least squares.  slower and only viable when
// features are finite dimensional, but algebraically identical to the
// Gram-matrix route, so it serves as the oracle in tests.
// ---------------------------------------------------------------------------

struct ExplicitPasses {
  MatrixXd loadings;  // pass 1 slopes, one row per feature, M x L
  MatrixXd F_hat;     // pass 2 factor estimates, T x L
  double beta0 = 0.0;
  VectorXd beta;
  VectorXd fitted;
};

inline ExplicitPasses fit_explicit_passes(const MatrixXd& Phi,
                                          const VectorXd& y,
                                          const MatrixXd& Z) {
  const Eigen::Index T = Phi.rows();
  if (y.size() != T || Z.rows() != T)
    throw InvalidInput("fit_explicit_passes: row mismatch");
  const Eigen::Index L = Z.cols();

  // pass 1: each feature on the proxies over time, with intercept;
  // keep the slopes only
  const MatrixXd D1 = with_intercept(Z);
  const MatrixXd coef1 =
      ols_multi(D1, Phi, "pass 1 (time series of features on proxies)");
  const MatrixXd loadings = coef1.bottomRows(L).transpose();  // M x L

  // pass 2: each observation's feature vector on the loadings, no
  // intercept; slopes are the factor estimates
  const MatrixXd Ft = ols_multi(
      loadings, Phi.transpose(), "pass 2 (cross section on loadings)");
  const MatrixXd F_hat = Ft.transpose();  // T x L

  // pass 3: target on the estimated factors, with intercept
  const MatrixXd D3 = with_intercept(F_hat);
  const VectorXd coef3 = ols(D3, y, "pass 3 (target on factors)");

  ExplicitPasses out;
  out.loadings = loadings;
  out.F_hat = F_hat;
  out.beta0 = coef3(0);
  out.beta = coef3.tail(L);
  out.fitted = D3 * coef3;
  return out;
}

}  // namespace k3prf
