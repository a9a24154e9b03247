#pragma once

// kernel families and Gram-matrix machinery.  everything downstream works
// on T x T Gram matrices, so centering is done with the four-term identity
//   Kc_ij = K_ij - rowmean_i - colmean_j + grandmean
// which applies the demeaning projector on both sides without ever
// building it.  cross-Gram centering uses the training column means only,
// so new rows are mapped exactly as the training rows were.

#include <k3prf/common.hpp>

#include <algorithm>
#include <string>

namespace k3prf {

enum class KernelFamily { Linear, Polynomial, Gaussian };

struct KernelSpec {
  KernelFamily family = KernelFamily::Linear;
  int degree = 2;       // Polynomial only
  double offset = 1.0;  // Polynomial only
  double sigma = 1.0;   // Gaussian only, bandwidth in input units

  static KernelSpec linear() { return {KernelFamily::Linear, 0, 0.0, 0.0}; }

  static KernelSpec polynomial(int degree, double offset) {
    KernelSpec s;
    s.family = KernelFamily::Polynomial;
    s.degree = degree;
    s.offset = offset;
    return s;
  }

  static KernelSpec gaussian(double sigma) {
    KernelSpec s;
    s.family = KernelFamily::Gaussian;
    s.sigma = sigma;
    return s;
  }

  void validate() const {
    switch (family) {
      case KernelFamily::Linear:
        return;
      case KernelFamily::Polynomial:
        if (degree < 1) throw InvalidInput("polynomial kernel: degree must be >= 1");
        if (offset < 0.0)
          throw InvalidInput("polynomial kernel: offset must be >= 0");
        return;
      case KernelFamily::Gaussian:
        if (!(sigma > 0.0))
          throw InvalidInput("gaussian kernel: sigma must be > 0");
        return;
    }
    throw InvalidInput("unknown kernel family");
  }

  std::string name() const {
    switch (family) {
      case KernelFamily::Linear:
        return "linear";
      case KernelFamily::Polynomial:
        return "poly" + std::to_string(degree);
      case KernelFamily::Gaussian:
        return "gaussian";
    }
    return "unknown";
  }
};

// Gram matrix plus a flag recording whether it has been double centered
struct GramMatrix {
  MatrixXd values;
  bool centered = false;

  Eigen::Index size() const { return values.rows(); }
};

inline double eval_kernel(const KernelSpec& spec, const VectorXd& x,
                          const VectorXd& y) {
  spec.validate();
  if (x.size() != y.size())
    throw InvalidInput("eval_kernel: dimension mismatch between inputs");
  switch (spec.family) {
    case KernelFamily::Linear:
      return x.dot(y);
    case KernelFamily::Polynomial:
      return std::pow(x.dot(y) + spec.offset, spec.degree);
    case KernelFamily::Gaussian: {
      const double d2 = (x - y).squaredNorm();
      return std::exp(-d2 / (2.0 * spec.sigma * spec.sigma));
    }
  }
  throw InvalidInput("unknown kernel family");
}

namespace detail {

// squared distances from inner products; tiny negative values from
// cancellation are clamped to zero so the Gaussian stays <= 1
inline MatrixXd squared_distances(const MatrixXd& G, const VectorXd& rn_rows,
                                  const VectorXd& rn_cols) {
  MatrixXd D = (-2.0 * G).colwise() + rn_rows;
  D.rowwise() += rn_cols.transpose();
  return D.cwiseMax(0.0);
}

inline MatrixXd apply_kernel(const KernelSpec& spec, const MatrixXd& X_rows,
                             const MatrixXd& X_cols, bool symmetric) {
  MatrixXd G = X_rows * X_cols.transpose();
  switch (spec.family) {
    case KernelFamily::Linear:
      return G;
    case KernelFamily::Polynomial: {
      MatrixXd base = G.array() + spec.offset;
      if (spec.degree == 2) return base.array().square();
      return base.array().pow(spec.degree);
    }
    case KernelFamily::Gaussian: {
      const VectorXd rn_rows = X_rows.rowwise().squaredNorm();
      const VectorXd rn_cols =
          symmetric ? rn_rows : VectorXd(X_cols.rowwise().squaredNorm());
      MatrixXd D = squared_distances(G, rn_rows, rn_cols);
      if (symmetric) D.diagonal().setZero();
      const double scale = -1.0 / (2.0 * spec.sigma * spec.sigma);
      return (scale * D).array().exp();
    }
  }
  throw InvalidInput("unknown kernel family");
}

}  // namespace detail

// T x T Gram over the rows of X
inline GramMatrix gram(const KernelSpec& spec, const MatrixXd& X) {
  spec.validate();
  if (X.rows() < 2) throw InvalidInput("gram: need at least two observations");
  return {detail::apply_kernel(spec, X, X, true), false};
}

// T* x T cross Gram between new rows and the training rows
inline MatrixXd cross_gram(const KernelSpec& spec, const MatrixXd& X_train,
                           const MatrixXd& X_new) {
  spec.validate();
  if (X_train.cols() != X_new.cols())
    throw InvalidInput("cross_gram: column mismatch between train and new");
  return detail::apply_kernel(spec, X_new, X_train, false);
}

// double centering: equivalent to demeaning the implicit features, kept in
// closed form so the projector is never materialized.  idempotent.
inline GramMatrix center_gram(const GramMatrix& K) {
  const MatrixXd& V = K.values;
  if (V.rows() != V.cols()) throw InvalidInput("center_gram: Gram not square");
  const VectorXd rm = V.rowwise().mean();
  const RowVectorXd cm = V.colwise().mean();
  const double gm = cm.mean();
  MatrixXd C = ((V.colwise() - rm).rowwise() - cm).array() + gm;
  return {std::move(C), true};
}

// centers a cross Gram against the training sample: subtract the training
// column means, then demean each new row.  with kappa == K this reproduces
// center_gram exactly, so in-sample and out-of-sample factors agree.
inline MatrixXd center_cross_gram(const MatrixXd& kappa,
                                  const GramMatrix& K_train) {
  if (K_train.centered)
    throw InvalidInput("center_cross_gram: training Gram must be uncentered");
  if (kappa.cols() != K_train.values.rows())
    throw InvalidInput("center_cross_gram: column count must match training T");
  const RowVectorXd cm = K_train.values.colwise().mean();
  MatrixXd C = kappa.rowwise() - cm;
  C.colwise() -= C.rowwise().mean().eval();
  return C;
}

// exact finite-dimensional map for the degree-2 polynomial kernel:
// phi(x).phi(y) == (x.y + offset)^2 bit for bit up to rounding.
// layout: [offset, sqrt(2*offset)*x_i, x_i^2, sqrt(2)*x_i*x_j (i<j)],
// M = 1 + N + N(N+1)/2 columns.
inline MatrixXd explicit_poly2_features(const MatrixXd& X, double offset) {
  if (offset < 0.0)
    throw InvalidInput("explicit_poly2_features: offset must be >= 0");
  const Eigen::Index T = X.rows();
  const Eigen::Index N = X.cols();
  const Eigen::Index M = 1 + N + N * (N + 1) / 2;
  MatrixXd Phi(T, M);
  const double sq2 = std::sqrt(2.0);
  const double sq2c = std::sqrt(2.0 * offset);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::Index col = 0;
    Phi(t, col++) = offset;
    for (Eigen::Index i = 0; i < N; ++i) Phi(t, col++) = sq2c * X(t, i);
    for (Eigen::Index i = 0; i < N; ++i) Phi(t, col++) = X(t, i) * X(t, i);
    for (Eigen::Index i = 0; i < N; ++i)
      for (Eigen::Index j = i + 1; j < N; ++j)
        Phi(t, col++) = sq2 * X(t, i) * X(t, j);
  }
  return Phi;
}

// checks the smallest eigenvalue against a relative floor of -1e-8 times
// the spectral norm; meant for validation paths and tests, not hot loops
inline void validate_psd(const GramMatrix& K) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(K.values,
                                             Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalError("validate_psd: eigenvalue computation failed");
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin < -1e-8 * lmax)
    throw NumericalError("validate_psd: Gram matrix is not PSD (min eig " +
                         std::to_string(lmin) + ")");
}

}  // namespace k3prf
