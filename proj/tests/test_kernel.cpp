#include <k3prf/kernel.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"

using namespace k3prf;
using testutil::oracle_center_cross;
using testutil::oracle_center_gram;

TEST_CASE("kernel evaluation matches hand-computed values") {
  VectorXd x(2), y(2);
  x << 1.0, 2.0;
  y << 3.0, 4.0;

  CHECK(eval_kernel(KernelSpec::linear(), x, y) == 11.0);
  // (x.y + 1)^2 = 12^2
  CHECK(eval_kernel(KernelSpec::polynomial(2, 1.0), x, y) == 144.0);
  // (x.y + 1)^3 = 12^3
  CHECK(eval_kernel(KernelSpec::polynomial(3, 1.0), x, y) == 1728.0);
  // ||x - y||^2 = 8, sigma = 2: exp(-8 / 8)
  CHECK(eval_kernel(KernelSpec::gaussian(2.0), x, y) ==
        Catch::Approx(std::exp(-1.0)).epsilon(1e-15));
}

TEST_CASE("kernel spec validation rejects bad parameters") {
  CHECK_THROWS_AS(KernelSpec::gaussian(0.0).validate(), InvalidInput);
  CHECK_THROWS_AS(KernelSpec::gaussian(-1.0).validate(), InvalidInput);
  CHECK_THROWS_AS(KernelSpec::polynomial(0, 1.0).validate(), InvalidInput);
  CHECK_THROWS_AS(KernelSpec::polynomial(2, -1.0).validate(), InvalidInput);
  VectorXd x(2), y(3);
  x.setOnes();
  y.setOnes();
  CHECK_THROWS_AS(eval_kernel(KernelSpec::linear(), x, y), InvalidInput);
}

TEST_CASE("gram matrix agrees with entrywise kernel evaluation") {
  Rng rng(101);
  const MatrixXd X = rng.normal_matrix(13, 4);
  for (const KernelSpec& spec :
       {KernelSpec::linear(), KernelSpec::polynomial(2, 1.0),
        KernelSpec::gaussian(1.7)}) {
    const GramMatrix K = gram(spec, X);
    REQUIRE(K.values.rows() == 13);
    REQUIRE_FALSE(K.centered);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = 0; j < X.rows(); ++j)
        CHECK(K.values(i, j) ==
              Catch::Approx(eval_kernel(spec, X.row(i).transpose(),
                                        X.row(j).transpose()))
                  .margin(1e-10));
    CHECK((K.values - K.values.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_NOTHROW(validate_psd(K));
  }
}

TEST_CASE("gaussian gram has unit diagonal and entries in (0, 1]") {
  Rng rng(7);
  const MatrixXd X = rng.normal_matrix(20, 5);
  const GramMatrix K = gram(KernelSpec::gaussian(0.9), X);
  for (Eigen::Index i = 0; i < 20; ++i) CHECK(K.values(i, i) == 1.0);
  CHECK(K.values.minCoeff() > 0.0);
  CHECK(K.values.maxCoeff() <= 1.0);
}

TEST_CASE("gaussian kernel value increases with sigma") {
  VectorXd x(3), y(3);
  x << 0.0, 1.0, -2.0;
  y << 1.5, -0.5, 0.0;
  double prev = 0.0;
  for (const double sigma : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double v = eval_kernel(KernelSpec::gaussian(sigma), x, y);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("cross gram against training rows reproduces the gram") {
  Rng rng(33);
  const MatrixXd X = rng.normal_matrix(11, 3);
  for (const KernelSpec& spec :
       {KernelSpec::linear(), KernelSpec::polynomial(2, 0.5),
        KernelSpec::gaussian(1.2)}) {
    const GramMatrix K = gram(spec, X);
    const MatrixXd kappa = cross_gram(spec, X, X);
    CHECK((kappa - K.values).cwiseAbs().maxCoeff() < 1e-10);
    const MatrixXd row = cross_gram(spec, X, X.row(4));
    CHECK((row - K.values.row(4)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("centering matches the materialized projector") {
  Rng rng(55);
  const MatrixXd X = rng.normal_matrix(16, 4);
  for (const KernelSpec& spec :
       {KernelSpec::linear(), KernelSpec::polynomial(2, 1.0),
        KernelSpec::gaussian(2.5)}) {
    const GramMatrix K = gram(spec, X);
    const GramMatrix Kc = center_gram(K);
    REQUIRE(Kc.centered);
    CHECK((Kc.values - oracle_center_gram(K.values)).cwiseAbs().maxCoeff() <
          1e-10);
    // rows and columns of a centered gram sum to zero
    CHECK(Kc.values.rowwise().sum().cwiseAbs().maxCoeff() < 1e-9);
    CHECK(Kc.values.colwise().sum().cwiseAbs().maxCoeff() < 1e-9);
    // centering is idempotent
    GramMatrix again;
    again.values = Kc.values;
    again.centered = false;
    CHECK((center_gram(again).values - Kc.values).cwiseAbs().maxCoeff() <
          1e-10);
  }
}

TEST_CASE("cross-gram centering matches the definition and the square case") {
  Rng rng(56);
  const MatrixXd X = rng.normal_matrix(14, 3);
  const MatrixXd Xn = rng.normal_matrix(5, 3);
  const KernelSpec spec = KernelSpec::gaussian(1.4);
  const GramMatrix K = gram(spec, X);
  const MatrixXd kappa = cross_gram(spec, X, Xn);
  const MatrixXd kc = center_cross_gram(kappa, K);
  CHECK((kc - oracle_center_cross(kappa, K.values)).cwiseAbs().maxCoeff() <
        1e-10);
  // centering the training block through the cross route equals center_gram
  const MatrixXd square = center_cross_gram(K.values, K);
  CHECK((square - center_gram(K).values).cwiseAbs().maxCoeff() < 1e-10);
  // must be fed the uncentered training gram
  CHECK_THROWS_AS(center_cross_gram(kappa, center_gram(K)), InvalidInput);
}

TEST_CASE("explicit quadratic features reproduce the polynomial kernel") {
  Rng rng(77);
  const Eigen::Index N = 4;
  const MatrixXd X = rng.normal_matrix(9, N);
  const double offset = 1.5;
  const MatrixXd Phi = explicit_poly2_features(X, offset);
  REQUIRE(Phi.cols() == 1 + N + N * (N + 1) / 2);

  const KernelSpec spec = KernelSpec::polynomial(2, offset);
  const GramMatrix K = gram(spec, X);
  // dot products of feature rows equal kernel values exactly
  const MatrixXd K_feat = Phi * Phi.transpose();
  CHECK((K_feat - K.values).cwiseAbs().maxCoeff() <
        1e-10 * K.values.cwiseAbs().maxCoeff());

  // centered gram equals the gram of demeaned features
  const MatrixXd Phic = demean_columns(Phi);
  CHECK((center_gram(K).values - Phic * Phic.transpose())
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("explicit quadratic features hand case in one dimension") {
  MatrixXd X(1, 1);
  X(0, 0) = 3.0;
  // offset 0: feature vector is (0, 0, 9)
  const MatrixXd Phi0 = explicit_poly2_features(X, 0.0);
  REQUIRE(Phi0.cols() == 3);
  CHECK(Phi0(0, 0) == 0.0);
  CHECK(Phi0(0, 1) == 0.0);
  CHECK(Phi0(0, 2) == 9.0);
  // offset 2: (2, sqrt(2*2)*3, 9) and |phi|^2 = (9 + 2)^2
  const MatrixXd Phi2 = explicit_poly2_features(X, 2.0);
  CHECK(Phi2(0, 0) == 2.0);
  CHECK(Phi2(0, 1) == Catch::Approx(6.0).epsilon(1e-15));
  CHECK(Phi2(0, 2) == 9.0);
  CHECK(Phi2.row(0).squaredNorm() == Catch::Approx(121.0).epsilon(1e-14));
}

TEST_CASE("linear-kernel centered gram equals demeaned covariance structure") {
  Rng rng(90);
  const MatrixXd X = rng.normal_matrix(10, 6);
  const GramMatrix K = gram(KernelSpec::linear(), X);
  const MatrixXd Xc = demean_columns(X);
  CHECK((center_gram(K).values - Xc * Xc.transpose()).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("psd validation flags an indefinite matrix") {
  GramMatrix K;
  K.values.resize(2, 2);
  K.values << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  CHECK_THROWS_AS(validate_psd(K), NumericalError);
}
