#pragma once

// shared test utilities: deliberately naive reference implementations
// (materialized projectors, full sorts, explicit loops) used as oracles
// against the production code paths.

#include <k3prf/common.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace testutil {

using k3prf::MatrixXd;
using k3prf::RowVectorXd;
using k3prf::VectorXd;

// centering by the materialized projector J = I - ii'/T
inline MatrixXd centering_projector(Eigen::Index T) {
  return MatrixXd::Identity(T, T) -
         MatrixXd::Constant(T, T, 1.0 / static_cast<double>(T));
}

inline MatrixXd oracle_center_gram(const MatrixXd& K) {
  const MatrixXd J = centering_projector(K.rows());
  return J * K * J;
}

// centered cross Gram straight from its definition: entry (i, t) is the
// inner product of (phi(new_i) - phibar) with (phi(train_t) - phibar)
inline MatrixXd oracle_center_cross(const MatrixXd& kappa, const MatrixXd& K) {
  const Eigen::Index n = kappa.rows();
  const Eigen::Index T = K.rows();
  const double TT = static_cast<double>(T);
  MatrixXd out(n, T);
  const double grand = K.sum() / (TT * TT);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 0; t < T; ++t)
      out(i, t) = kappa(i, t) - kappa.row(i).sum() / TT -
                  K.col(t).sum() / TT + grand;
  return out;
}

// largest principal angle (radians) between the column spans of A and B
inline double max_principal_angle(const MatrixXd& A, const MatrixXd& B) {
  const auto thin_q = [](const MatrixXd& M) {
    Eigen::HouseholderQR<MatrixXd> qr(M);
    return MatrixXd(qr.householderQ() * MatrixXd::Identity(M.rows(), M.cols()));
  };
  const MatrixXd Qa = thin_q(A);
  const MatrixXd Qb = thin_q(B);
  Eigen::JacobiSVD<MatrixXd> svd(Qa.transpose() * Qb);
  const double smin = svd.singularValues().minCoeff();
  return std::acos(std::clamp(smin, -1.0, 1.0));
}

// median pairwise row distance by full sort (same even/odd convention as
// the production heuristic, but via an independent code path)
inline double brute_median_distance(const MatrixXd& X) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = i + 1; j < X.rows(); ++j)
      d.push_back((X.row(i) - X.row(j)).norm());
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  if (n % 2 == 1) return d[n / 2];
  return 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

inline MatrixXd random_matrix(k3prf::Rng& rng, Eigen::Index r,
                              Eigen::Index c) {
  return rng.normal_matrix(r, c);
}

// simple persistent factor panel: X = F Lambda' + noise, y linear in F
struct ToyPanel {
  MatrixXd X;
  VectorXd y;
  MatrixXd F;
};

inline ToyPanel make_factor_panel(Eigen::Index T, Eigen::Index N, int K,
                                  double noise_sd, std::uint64_t seed,
                                  double rho = 0.6) {
  k3prf::Rng rng(seed);
  ToyPanel p;
  p.F.resize(T, K);
  for (int k = 0; k < K; ++k) {
    double f = rng.normal();
    for (Eigen::Index t = 0; t < T; ++t) {
      f = rho * f + std::sqrt(1.0 - rho * rho) * rng.normal();
      p.F(t, k) = f;
    }
  }
  const MatrixXd Lambda = rng.normal_matrix(N, K);
  p.X = p.F * Lambda.transpose() + noise_sd * rng.normal_matrix(T, N);
  p.y = p.F.col(0) + 0.5 * noise_sd * rng.normal_vector(T);
  return p;
}

}  // namespace testutil
