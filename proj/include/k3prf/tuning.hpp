#pragma once

// bandwidth selection for the Gaussian kernel: a pairwise-distance median
// heuristic sets the scale, and a two-fold contiguous cross-validation
// over scale multipliers picks the final value.  folds are the two halves
// of the sample in time order; each is fitted and scored against the
// other and the two out-of-sample scores are averaged.

#include <k3prf/auto_proxy.hpp>
#include <k3prf/common.hpp>
#include <k3prf/estimator.hpp>
#include <k3prf/kernel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace k3prf {

// median pairwise distance between rows.  exact up to 2000 rows; beyond
// that a seeded subsample of two million pairs is used.
inline double median_heuristic_sigma(const MatrixXd& X,
                                     std::uint64_t seed = 0) {
  const Eigen::Index T = X.rows();
  if (T < 2) throw InvalidInput("median_heuristic_sigma: need >= 2 rows");
  std::vector<double> d;
  if (T <= 2000) {
    d.reserve(static_cast<std::size_t>(T) * (T - 1) / 2);
    for (Eigen::Index i = 0; i < T; ++i)
      for (Eigen::Index j = i + 1; j < T; ++j)
        d.push_back((X.row(i) - X.row(j)).norm());
  } else {
    Rng rng(derive_seed(seed, 0x6d656469));
    const std::size_t n_pairs = 2'000'000;
    d.reserve(n_pairs);
    for (std::size_t s = 0; s < n_pairs; ++s) {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(T)));
      auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(T - 1)));
      if (j >= i) ++j;
      d.push_back((X.row(i) - X.row(j)).norm());
    }
  }
  const std::size_t n = d.size();
  const std::size_t mid = n / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  double med = d[mid];
  if (n % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + mid);
    med = 0.5 * (lower + med);
  }
  if (!(med > 0.0))
    throw DataError("median_heuristic_sigma: median distance is zero "
                    "(identical rows)");
  return med;
}

// how proxies are obtained inside tuning and backtesting
struct ProxyMode {
  int auto_L = 1;
  std::optional<MatrixXd> theory_Z;  // rows aligned with X when present

  static ProxyMode auto_proxies(int L) {
    ProxyMode m;
    m.auto_L = L;
    return m;
  }

  static ProxyMode theory(MatrixXd Z) {
    ProxyMode m;
    m.theory_Z = std::move(Z);
    return m;
  }

  bool is_auto() const { return !theory_Z.has_value(); }
};

struct TuneResult {
  std::vector<double> grid;       // candidate sigmas, ascending
  std::vector<double> cv_scores;  // fold-averaged out-of-sample R^2
  std::vector<std::string> notes;  // per-candidate failure notes, "" if clean
  double sigma_median = 0.0;
  double selected = 0.0;
  std::string fold_spec;
};

namespace detail {

inline K3prfFit fit_for_mode(const MatrixXd& X, const VectorXd& y,
                             const ProxyMode& mode, const KernelSpec& spec,
                             Eigen::Index row_offset) {
  if (mode.is_auto())
    return build_auto_proxies(X, y, spec, mode.auto_L).final_fit;
  const MatrixXd Z = mode.theory_Z->middleRows(row_offset, X.rows());
  return fit(X, y, ProxySet::theory(Z), spec);
}

// fit on one contiguous block, score h-step forecasts on another
inline double fold_score(const MatrixXd& X, const VectorXd& y,
                         const ProxyMode& mode, const KernelSpec& spec, int h,
                         Eigen::Index fit_begin, Eigen::Index fit_len,
                         Eigen::Index score_begin, Eigen::Index score_len) {
  const Eigen::Index n_fit = fit_len - h;
  const Eigen::Index n_score = score_len - h;
  if (n_fit < 8 || n_score < 2)
    throw InvalidInput("cv_tune_sigma: folds too short for horizon");
  const MatrixXd Xf = X.middleRows(fit_begin, n_fit);
  const VectorXd yf = y.segment(fit_begin + h, n_fit);
  const K3prfFit f = fit_for_mode(Xf, yf, mode, spec, fit_begin);
  const MatrixXd Xs = X.middleRows(score_begin, n_score);
  const VectorXd ys = y.segment(score_begin + h, n_score);
  const VectorXd pred = predict(f, Xs);
  const double sst = (ys.array() - yf.mean()).square().sum();
  if (!(sst > 0.0))
    throw NumericalError("cv_tune_sigma: zero variation in scoring fold");
  return 1.0 - (ys - pred).squaredNorm() / sst;
}

}  // namespace detail

// two-fold contiguous cross-validation over sigma = multiplier * median
// heuristic.  ties go to the smaller sigma.  candidates that fail to fit
// score -inf with a note; if every candidate fails the tuner throws.
inline TuneResult cv_tune_sigma(
    const MatrixXd& X, const VectorXd& y, const ProxyMode& mode, int h,
    std::vector<double> multipliers = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0},
    std::uint64_t seed = 0) {
  if (h < 1) throw InvalidInput("cv_tune_sigma: h must be >= 1");
  if (multipliers.empty())
    throw InvalidInput("cv_tune_sigma: empty multiplier grid");
  if (X.rows() != y.size()) throw InvalidInput("cv_tune_sigma: row mismatch");
  std::sort(multipliers.begin(), multipliers.end());

  TuneResult out;
  out.sigma_median = median_heuristic_sigma(X, seed);
  out.fold_spec = "2 contiguous folds: rows [0, T/2) and [T/2, T)";
  const Eigen::Index T = X.rows();
  const Eigen::Index half = T / 2;

  bool any_ok = false;
  for (const double m : multipliers) {
    const double sigma = m * out.sigma_median;
    const KernelSpec spec = KernelSpec::gaussian(sigma);
    out.grid.push_back(sigma);
    try {
      const double s1 = detail::fold_score(X, y, mode, spec, h, 0, half, half,
                                           T - half);
      const double s2 = detail::fold_score(X, y, mode, spec, h, half, T - half,
                                           0, half);
      out.cv_scores.push_back(0.5 * (s1 + s2));
      out.notes.emplace_back();
      any_ok = true;
    } catch (const Error& e) {
      out.cv_scores.push_back(-std::numeric_limits<double>::infinity());
      out.notes.emplace_back(e.what());
    }
  }
  if (!any_ok)
    throw NumericalError("cv_tune_sigma: every candidate sigma failed: " +
                         out.notes.front());

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.grid.size(); ++i)
    if (out.cv_scores[i] > out.cv_scores[best]) best = i;  // ties keep smaller
  out.selected = out.grid[best];
  return out;
}

}  // namespace k3prf
