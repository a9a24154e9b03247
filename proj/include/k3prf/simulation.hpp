#pragma once

// synthetic factor designs for verifying the estimator's limit behavior.
// features load on K_f relevant plus K_g irrelevant factors, the target
// depends only on the relevant block, and proxies are noisy linear maps
// of the relevant block.  fits on these draws can be compared against the
// infeasible conditional mean, and against the rotated truth, where the
// rotation blocks are built from the same proxy moments the fit exposes.

#include <k3prf/common.hpp>
#include <k3prf/estimator.hpp>
#include <k3prf/kernel.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace k3prf {

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median_of: empty input");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  double med = v[mid];
  if (v.size() % 2 == 0) {
    const double lower =
        *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (lower + med);
  }
  return med;
}

struct SimConfig {
  int T = 100;
  int M = 100;  // feature dimension
  int K_f = 1;  // relevant factors
  int K_g = 0;  // irrelevant factors
  int L = 1;    // proxies generated (theory-guided, span the relevant block)

  // diagonal factor variances, relevant block first; must be distinct.
  // left empty, a descending default is filled in.
  std::vector<double> factor_variances;

  double eps_sd = 1.0;    // feature noise scale
  double eta_sd = 1.0;    // target noise scale
  double omega_sd = 1.0;  // proxy noise scale
  double eps_ar1 = 0.0;   // AR(1) coefficient for feature noise over time
  double beta0 = 0.5;

  // exact finite-sample normalizations: loadings with Phi'Phi/M = I, and
  // factor columns drawn mutually orthogonal in sample with the target
  // variances hit exactly.  the second one makes the noiseless fits exact
  // instead of exact-in-the-limit, which the algebra tests rely on.
  bool orthonormal_loadings = true;
  bool orthogonal_factors = false;

  std::uint64_t seed = 1;

  std::vector<double> variances() const {
    if (!factor_variances.empty()) {
      if (factor_variances.size() !=
          static_cast<std::size_t>(K_f + K_g))
        throw InvalidInput("SimConfig: need K_f + K_g factor variances");
      return factor_variances;
    }
    std::vector<double> v(static_cast<std::size_t>(K_f + K_g));
    for (std::size_t k = 0; k < v.size(); ++k)
      v[k] = 2.0 - 0.3 * static_cast<double>(k);
    for (const double x : v)
      if (!(x > 0.0))
        throw InvalidInput("SimConfig: too many factors for default variances");
    return v;
  }

  void validate() const {
    if (T < 8) throw InvalidInput("SimConfig: T too small");
    if (M < 1) throw InvalidInput("SimConfig: M must be >= 1");
    if (K_f < 1) throw InvalidInput("SimConfig: K_f must be >= 1");
    if (K_g < 0) throw InvalidInput("SimConfig: K_g must be >= 0");
    if (L < 1) throw InvalidInput("SimConfig: L must be >= 1");
    const auto v = variances();
    for (std::size_t a = 0; a < v.size(); ++a)
      for (std::size_t b = a + 1; b < v.size(); ++b)
        if (v[a] == v[b])
          throw InvalidInput("SimConfig: factor variances must be distinct");
    if (std::abs(eps_ar1) >= 1.0)
      throw InvalidInput("SimConfig: |eps_ar1| must be < 1");
  }
};

struct SimDraw {
  SimConfig config;
  MatrixXd F;         // T x (K_f + K_g), relevant block first
  MatrixXd Phi;       // M x (K_f + K_g) loadings
  MatrixXd Phi_X;     // T x M observed features
  VectorXd y;         // T
  MatrixXd Z;         // T x L proxies
  VectorXd Ey;        // conditional mean of y given the factors
  VectorXd beta_f;    // K_f
  MatrixXd Lambda_f;  // L x K_f proxy loadings on the relevant block
  VectorXd lambda0;   // L proxy intercepts
};

namespace detail {

// orthonormal columns spanning a seeded Gaussian draw; columns are exact
// to machine precision and mean zero when the input columns are demeaned
inline MatrixXd orthonormal_columns(Rng& rng, Eigen::Index rows,
                                    Eigen::Index cols, bool demean) {
  MatrixXd G = rng.normal_matrix(rows, cols);
  if (demean) G = demean_columns(G);
  const Eigen::HouseholderQR<MatrixXd> qr(G);
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(rows, cols);
  return Q;
}

}  // namespace detail

inline SimDraw simulate(const SimConfig& cfg) {
  cfg.validate();
  const Eigen::Index T = cfg.T;
  const Eigen::Index M = cfg.M;
  const Eigen::Index K = cfg.K_f + cfg.K_g;
  const auto vars = cfg.variances();
  Rng rng(cfg.seed);

  SimDraw draw;
  draw.config = cfg;

  // factors
  if (cfg.orthogonal_factors) {
    // exact sample moments: columns mutually orthogonal, mean zero, and
    // scaled so F'F/T reproduces the configured variances exactly
    const MatrixXd Q = detail::orthonormal_columns(rng, T, K, true);
    draw.F.resize(T, K);
    for (Eigen::Index k = 0; k < K; ++k)
      draw.F.col(k) =
          Q.col(k) * std::sqrt(vars[static_cast<std::size_t>(k)] *
                               static_cast<double>(T));
  } else {
    draw.F.resize(T, K);
    for (Eigen::Index k = 0; k < K; ++k)
      draw.F.col(k) = rng.normal_vector(
          T, std::sqrt(vars[static_cast<std::size_t>(k)]));
  }

  // loadings
  if (cfg.orthonormal_loadings) {
    draw.Phi = detail::orthonormal_columns(rng, M, K, false) *
               std::sqrt(static_cast<double>(M));
  } else {
    draw.Phi = rng.normal_matrix(M, K);
  }

  // feature noise, optionally AR(1) over time
  MatrixXd eps = rng.normal_matrix(T, M, cfg.eps_sd);
  if (cfg.eps_ar1 != 0.0) {
    const double rho = cfg.eps_ar1;
    const double scale = std::sqrt(1.0 - rho * rho);
    for (Eigen::Index t = 1; t < T; ++t)
      eps.row(t) = rho * eps.row(t - 1) + scale * eps.row(t);
  }
  draw.Phi_X = draw.F * draw.Phi.transpose() + eps;

  // target loads on the relevant block only
  draw.beta_f = VectorXd::Ones(cfg.K_f);
  draw.Ey = VectorXd::Constant(T, cfg.beta0) +
            draw.F.leftCols(cfg.K_f) * draw.beta_f;
  draw.y = draw.Ey + rng.normal_vector(T, cfg.eta_sd);

  // proxy loadings: identity-anchored full-rank map of the relevant block
  draw.Lambda_f.resize(cfg.L, cfg.K_f);
  for (;;) {
    for (Eigen::Index i = 0; i < cfg.L; ++i)
      for (Eigen::Index j = 0; j < cfg.K_f; ++j)
        draw.Lambda_f(i, j) = (i == j ? 1.0 : 0.0) + 0.3 * rng.normal();
    if (cfg.L != cfg.K_f) break;
    const Eigen::JacobiSVD<MatrixXd> svd(draw.Lambda_f);
    if (svd.singularValues()(cfg.L - 1) > 1e-3) break;  // redraw if degenerate
  }
  draw.lambda0 = rng.normal_vector(cfg.L, 0.5);
  draw.Z = VectorXd::Ones(T) * draw.lambda0.transpose() +
           draw.F.leftCols(cfg.K_f) * draw.Lambda_f.transpose() +
           rng.normal_matrix(T, cfg.L, cfg.omega_sd);
  return draw;
}

// fits the simulated draw with the linear kernel over the features and
// the draw's own proxies; the reference fit for all limit checks
inline K3prfFit fit_draw(const SimDraw& draw) {
  return fit(draw.Phi_X, draw.y, ProxySet::theory(draw.Z),
             KernelSpec::linear());
}

// ---------------------------------------------------------------------------
// rotation blocks.  only meaningful for a linear-kernel fit on the
// simulated features, where fit.W and fit.A are the proxy moments the
// limit theory rotates through:
//   Fhat_A = W / T,   Fhat_B = A / (M T^2)
//   H_f    = Fhat_A Fhat_B^{-1} Lambda_f Delta_f
//   G_beta = Fhat_A^{-1} Fhat_B [Lambda_f Delta_f^3 Lambda_f']^{-1}
//            Lambda_f Delta_f^2
// rows of F_hat approach f_t' H_f', and beta_hat approaches G_beta beta_f.
// ---------------------------------------------------------------------------

struct RotationPair {
  MatrixXd H_f;     // L x K_f
  MatrixXd G_beta;  // L x K_f
};

namespace detail {

inline MatrixXd sym_inverse(const MatrixXd& S, const char* name) {
  const SymSolver solver(S, name);
  const MatrixXd eye = MatrixXd::Identity(S.rows(), S.cols());
  return solver.solve(eye);
}

}  // namespace detail

inline RotationPair compute_rotations(const SimDraw& draw,
                                      const K3prfFit& fit) {
  if (fit.spec.family != KernelFamily::Linear)
    throw InvalidInput("compute_rotations: needs a linear-kernel fit");
  const double T = static_cast<double>(draw.config.T);
  const double M = static_cast<double>(draw.config.M);
  const MatrixXd Fhat_A = fit.W / T;
  const MatrixXd Fhat_B = fit.A / (M * T * T);
  const auto vars = draw.config.variances();
  const Eigen::Index Kf = draw.config.K_f;
  VectorXd delta(Kf);
  for (Eigen::Index k = 0; k < Kf; ++k)
    delta(k) = vars[static_cast<std::size_t>(k)];

  const MatrixXd B_inv = detail::sym_inverse(Fhat_B, "Fhat_B");
  const MatrixXd A_inv = detail::sym_inverse(Fhat_A, "Fhat_A");
  const MatrixXd LD3L = draw.Lambda_f * delta.array().cube().matrix().asDiagonal() *
                        draw.Lambda_f.transpose();
  const MatrixXd LD3L_inv = detail::sym_inverse(LD3L, "Lambda Delta^3 Lambda'");

  RotationPair out;
  out.H_f = Fhat_A * B_inv * draw.Lambda_f * delta.asDiagonal();
  out.G_beta = A_inv * Fhat_B * LD3L_inv * draw.Lambda_f *
               delta.array().square().matrix().asDiagonal();
  return out;
}

// per-draw deviation summaries used by the rate study
struct DrawErrors {
  double factor = 0.0;    // median over t of |F_hat_t - H_f f_t|
  double coef = 0.0;      // |beta_hat - G_beta beta_f|
  double forecast = 0.0;  // median over t of |y_hat_t - E[y_t | F]|
};

inline DrawErrors draw_errors(const SimDraw& draw, const K3prfFit& fit) {
  const RotationPair rot = compute_rotations(draw, fit);
  const MatrixXd target = draw.F.leftCols(draw.config.K_f) *
                          rot.H_f.transpose();  // T x L
  DrawErrors out;
  std::vector<double> norms(static_cast<std::size_t>(fit.F_hat.rows()));
  for (Eigen::Index t = 0; t < fit.F_hat.rows(); ++t)
    norms[static_cast<std::size_t>(t)] =
        (fit.F_hat.row(t) - target.row(t)).norm();
  out.factor = median_of(std::move(norms));
  out.coef = (fit.beta_hat - rot.G_beta * draw.beta_f).norm();
  const VectorXd y_hat = fitted_values(fit);
  std::vector<double> devs(static_cast<std::size_t>(y_hat.size()));
  for (Eigen::Index t = 0; t < y_hat.size(); ++t)
    devs[static_cast<std::size_t>(t)] = std::abs(y_hat(t) - draw.Ey(t));
  out.forecast = median_of(std::move(devs));
  return out;
}

// ---------------------------------------------------------------------------
// rate study: median errors over seeded replications per (M, T) grid
// point, and log-log slopes against delta = min(sqrt(M), sqrt(T))
// ---------------------------------------------------------------------------

struct RatePoint {
  int M = 0;
  int T = 0;
  double delta = 0.0;
  double factor = 0.0;
  double coef = 0.0;
  double forecast = 0.0;
};

struct RateCurve {
  std::vector<RatePoint> points;
  double slope_factor = 0.0;
  double slope_coef = 0.0;
  double slope_forecast = 0.0;
};

namespace detail {

inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  MatrixXd D(static_cast<Eigen::Index>(x.size()), 2);
  VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    D(static_cast<Eigen::Index>(i), 0) = 1.0;
    D(static_cast<Eigen::Index>(i), 1) = std::log(x[i]);
    v(static_cast<Eigen::Index>(i)) = std::log(y[i]);
  }
  return ols(D, v, "rate slope")(1);
}

}  // namespace detail

inline RateCurve rate_study(const SimConfig& base,
                            const std::vector<std::pair<int, int>>& grid_MT,
                            int n_reps, int threads = 0) {
  if (grid_MT.size() < 2)
    throw InvalidInput("rate_study: need at least two grid points");
  if (n_reps < 1) throw InvalidInput("rate_study: n_reps must be >= 1");

  RateCurve curve;
  curve.points.resize(grid_MT.size());
  for (std::size_t g = 0; g < grid_MT.size(); ++g) {
    std::vector<DrawErrors> errors(static_cast<std::size_t>(n_reps));
    parallel_for(static_cast<std::size_t>(n_reps), threads, [&](std::size_t r) {
      SimConfig cfg = base;
      cfg.M = grid_MT[g].first;
      cfg.T = grid_MT[g].second;
      cfg.seed = derive_seed(base.seed, g, r);  // split per grid point and rep
      const SimDraw draw = simulate(cfg);
      errors[r] = draw_errors(draw, fit_draw(draw));
    });
    std::vector<double> fe, ce, ye;
    for (const auto& e : errors) {
      fe.push_back(e.factor);
      ce.push_back(e.coef);
      ye.push_back(e.forecast);
    }
    RatePoint& pt = curve.points[g];
    pt.M = grid_MT[g].first;
    pt.T = grid_MT[g].second;
    pt.delta = std::min(std::sqrt(static_cast<double>(pt.M)),
                        std::sqrt(static_cast<double>(pt.T)));
    pt.factor = median_of(std::move(fe));
    pt.coef = median_of(std::move(ce));
    pt.forecast = median_of(std::move(ye));
  }

  std::vector<double> deltas, f, c, y;
  for (const auto& pt : curve.points) {
    deltas.push_back(pt.delta);
    f.push_back(pt.factor);
    c.push_back(pt.coef);
    y.push_back(pt.forecast);
  }
  curve.slope_factor = detail::loglog_slope(deltas, f);
  curve.slope_coef = detail::loglog_slope(deltas, c);
  curve.slope_forecast = detail::loglog_slope(deltas, y);
  return curve;
}

inline void write_rate_csv(const RateCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "schema_version,M,T,delta,median_factor_err,median_coef_err,"
         "median_forecast_err\n";
  char buf[64];
  const auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return std::string(buf);
  };
  for (const auto& pt : curve.points)
    out << 1 << ',' << pt.M << ',' << pt.T << ',' << fmt(pt.delta) << ','
        << fmt(pt.factor) << ',' << fmt(pt.coef) << ',' << fmt(pt.forecast)
        << '\n';
  out << "# slopes: factor " << fmt(curve.slope_factor) << ", coef "
      << fmt(curve.slope_coef) << ", forecast " << fmt(curve.slope_forecast)
      << '\n';
}

}  // namespace k3prf
