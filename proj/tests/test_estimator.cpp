#include <k3prf/estimator.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace k3prf;
using Catch::Matchers::ContainsSubstring;

namespace {

// single-feature, single-proxy case worked out by hand:
//   features (1, 2, 4), proxy (1, 0, 1), target (2, 1, 3)
// pass 1 slope 1/2, factors (2, 4, 8), pass 3 gives
// intercept 1 and slope 3/14, fitted (10/7, 13/7, 19/7)
struct HandCase {
  MatrixXd Phi{3, 1};
  MatrixXd Z{3, 1};
  VectorXd y{3};

  HandCase() {
    Phi << 1.0, 2.0, 4.0;
    Z << 1.0, 0.0, 1.0;
    y << 2.0, 1.0, 3.0;
  }

  VectorXd expected_factors() const {
    VectorXd f(3);
    f << 2.0, 4.0, 8.0;
    return f;
  }

  VectorXd expected_fitted() const {
    VectorXd f(3);
    f << 10.0 / 7.0, 13.0 / 7.0, 19.0 / 7.0;
    return f;
  }
};

}  // namespace

TEST_CASE("explicit passes reproduce the hand-computed case") {
  const HandCase hc;
  const ExplicitPasses ep = fit_explicit_passes(hc.Phi, hc.y, hc.Z);
  CHECK(ep.loadings(0, 0) == Catch::Approx(0.5).margin(1e-13));
  CHECK((ep.F_hat.col(0) - hc.expected_factors()).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK(ep.beta0 == Catch::Approx(1.0).margin(1e-12));
  CHECK(ep.beta(0) == Catch::Approx(3.0 / 14.0).margin(1e-13));
  CHECK((ep.fitted - hc.expected_fitted()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gram-matrix fit reproduces the hand-computed case") {
  const HandCase hc;
  const K3prfFit f =
      fit(hc.Phi, hc.y, ProxySet::theory(hc.Z), KernelSpec::linear());
  CHECK((f.F_hat.col(0) - hc.expected_factors()).cwiseAbs().maxCoeff() <
        1e-10);
  CHECK(f.beta_hat(0) == Catch::Approx(3.0 / 14.0).margin(1e-12));
  CHECK((fitted_values(f) - hc.expected_fitted()).cwiseAbs().maxCoeff() <
        1e-10);
  // predicting the training rows reproduces the in-sample fit
  CHECK((predict(f, hc.Phi) - hc.expected_fitted()).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("closed form and factor-path fitted values agree") {
  Rng rng(11);
  const MatrixXd X = rng.normal_matrix(30, 6);
  const VectorXd y = rng.normal_vector(30);
  const MatrixXd Z = rng.normal_matrix(30, 2);
  for (const KernelSpec& spec :
       {KernelSpec::linear(), KernelSpec::polynomial(2, 1.0),
        KernelSpec::gaussian(2.0)}) {
    const K3prfFit f = fit(X, y, ProxySet::theory(Z), spec);
    CHECK((fitted_values(f) - fitted_values_factor_path(f))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
}

TEST_CASE("linear-kernel fit equals the literal three passes") {
  for (const std::uint64_t seed : {3u, 4u, 5u}) {
    Rng rng(seed);
    const Eigen::Index T = 25 + 5 * static_cast<Eigen::Index>(seed);
    const MatrixXd Phi = rng.normal_matrix(T, 5);
    const VectorXd y = rng.normal_vector(T);
    const MatrixXd Z = rng.normal_matrix(T, 2);

    const ExplicitPasses ep = fit_explicit_passes(Phi, y, Z);
    const K3prfFit f = fit(Phi, y, ProxySet::theory(Z), KernelSpec::linear());
    CHECK((ep.F_hat - f.F_hat).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((ep.beta - f.beta_hat).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((ep.fitted - fitted_values(f)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("quadratic kernel fit equals explicit passes on mapped features") {
  Rng rng(17);
  const MatrixXd X = rng.normal_matrix(40, 3);
  const VectorXd y = rng.normal_vector(40);
  const MatrixXd Z = rng.normal_matrix(40, 2);
  const double offset = 1.0;

  const MatrixXd Phi = explicit_poly2_features(X, offset);
  const ExplicitPasses ep = fit_explicit_passes(Phi, y, Z);
  const K3prfFit f =
      fit(X, y, ProxySet::theory(Z), KernelSpec::polynomial(2, offset));
  CHECK((ep.F_hat - f.F_hat).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((ep.fitted - fitted_values(f)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((ep.beta - f.beta_hat).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("proxies equal to the features reduce to least squares") {
  Rng rng(23);
  const MatrixXd Phi = rng.normal_matrix(20, 3);
  const VectorXd y = rng.normal_vector(20);
  const K3prfFit f =
      fit(Phi, y, ProxySet::theory(Phi), KernelSpec::linear());
  const VectorXd ols_fit =
      with_intercept(Phi) * ols(with_intercept(Phi), y, "reference ols");
  CHECK((fitted_values(f) - ols_fit).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("out-of-sample projection matches the centered cross-gram route") {
  Rng rng(29);
  const MatrixXd X = rng.normal_matrix(35, 4);
  const VectorXd y = rng.normal_vector(35);
  const MatrixXd Z = rng.normal_matrix(35, 2);
  const MatrixXd Xn = rng.normal_matrix(7, 4);
  for (const KernelSpec& spec :
       {KernelSpec::linear(), KernelSpec::gaussian(1.8)}) {
    const K3prfFit f = fit(X, y, ProxySet::theory(Z), spec);
    const GramMatrix K = gram(spec, X);
    const MatrixXd kappa = cross_gram(spec, X, Xn);
    const MatrixXd Fc_new = center_cross_gram(kappa, K) * f.proj;
    const VectorXd via_centered =
        (Fc_new * f.beta_hat).array() + f.y_bar;
    CHECK((predict(f, Xn) - via_centered).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("projecting the training rows returns the fitted factors") {
  Rng rng(31);
  const MatrixXd X = rng.normal_matrix(22, 5);
  const VectorXd y = rng.normal_vector(22);
  const MatrixXd Z = rng.normal_matrix(22, 2);
  for (const KernelSpec& spec :
       {KernelSpec::linear(), KernelSpec::gaussian(2.2)}) {
    const K3prfFit f = fit(X, y, ProxySet::theory(Z), spec);
    CHECK((project_factors(f, X) - f.F_hat).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((predict(f, X) - fitted_values(f)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("fit is invariant to invertible proxy recombination and shifts") {
  Rng rng(37);
  const MatrixXd X = rng.normal_matrix(28, 4);
  const VectorXd y = rng.normal_vector(28);
  const MatrixXd Z = rng.normal_matrix(28, 2);
  MatrixXd C(2, 2);
  C << 1.2, 0.3, -0.4, 0.9;
  RowVectorXd shift(2);
  shift << 0.7, -1.1;
  const MatrixXd Z2 = (Z * C).rowwise() + shift;
  const MatrixXd Xn = rng.normal_matrix(6, 4);

  for (const KernelSpec& spec :
       {KernelSpec::linear(), KernelSpec::gaussian(1.5)}) {
    const K3prfFit f1 = fit(X, y, ProxySet::theory(Z), spec);
    const K3prfFit f2 = fit(X, y, ProxySet::theory(Z2), spec);
    CHECK((fitted_values(f1) - fitted_values(f2)).cwiseAbs().maxCoeff() <
          1e-8);
    CHECK((predict(f1, Xn) - predict(f2, Xn)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("fitted values average to the training mean") {
  Rng rng(41);
  const MatrixXd X = rng.normal_matrix(26, 3);
  const VectorXd y = rng.normal_vector(26);
  const MatrixXd Z = rng.normal_matrix(26, 1);
  const K3prfFit f = fit(X, y, ProxySet::theory(Z), KernelSpec::gaussian(2.0));
  CHECK(fitted_values(f).mean() == Catch::Approx(y.mean()).margin(1e-10));
}

TEST_CASE("input validation and failure messages") {
  Rng rng(43);
  const MatrixXd X = rng.normal_matrix(20, 3);
  const VectorXd y = rng.normal_vector(20);
  const MatrixXd Z = rng.normal_matrix(20, 2);
  const KernelSpec lin = KernelSpec::linear();

  SECTION("duplicate proxies name the proxy covariance") {
    MatrixXd Zdup(20, 2);
    Zdup.col(0) = Z.col(0);
    Zdup.col(1) = Z.col(0);
    CHECK_THROWS_AS(fit(X, y, ProxySet::theory(Zdup), lin), NumericalError);
    CHECK_THROWS_WITH(fit(X, y, ProxySet::theory(Zdup), lin),
                      ContainsSubstring("W (proxy covariance)"));
  }

  SECTION("a constant proxy is collinear after demeaning") {
    MatrixXd Zc(20, 2);
    Zc.col(0) = Z.col(0);
    Zc.col(1).setConstant(3.0);
    CHECK_THROWS_AS(fit(X, y, ProxySet::theory(Zc), lin), NumericalError);
  }

  SECTION("shape and finiteness checks") {
    CHECK_THROWS_AS(fit(X, y.head(10), ProxySet::theory(Z), lin),
                    InvalidInput);
    CHECK_THROWS_AS(fit(X, y, ProxySet::theory(Z.topRows(10)), lin),
                    InvalidInput);
    MatrixXd Znan = Z;
    Znan(3, 1) = std::nan("");
    CHECK_THROWS_AS(fit(X, y, ProxySet::theory(Znan), lin), InvalidInput);
  }

  SECTION("too few observations for the proxy count") {
    const MatrixXd Xs = X.topRows(3);
    CHECK_THROWS_AS(fit(Xs, y.head(3), ProxySet::theory(Z.topRows(3)), lin),
                    InvalidInput);
  }

  SECTION("a centered gram is rejected") {
    GramMatrix K = gram(lin, X);
    const GramMatrix Kc = center_gram(K);
    CHECK_THROWS_AS(fit_with_gram(X, Kc, y, ProxySet::theory(Z), lin),
                    InvalidInput);
  }

  SECTION("explicit passes name the failing pass") {
    MatrixXd Zdup(20, 2);
    Zdup.col(0) = Z.col(0);
    Zdup.col(1) = Z.col(0);
    CHECK_THROWS_AS(fit_explicit_passes(X, y, Zdup), NumericalError);
    CHECK_THROWS_WITH(fit_explicit_passes(X, y, Zdup),
                      ContainsSubstring("pass 1"));

    // rank-one features with two proxies: the loadings collapse in pass 2
    MatrixXd X1(20, 3);
    X1.col(0) = X.col(0);
    X1.col(1) = X.col(0);
    X1.col(2) = X.col(0);
    CHECK_THROWS_AS(fit_explicit_passes(X1, y, Z), NumericalError);
    CHECK_THROWS_WITH(fit_explicit_passes(X1, y, Z),
                      ContainsSubstring("pass 2"));
  }
}
