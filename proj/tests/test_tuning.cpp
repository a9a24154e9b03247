#include <k3prf/tuning.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"

using namespace k3prf;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("median heuristic equals a full-sort reference") {
  for (const Eigen::Index T : {3, 4, 5, 12, 37}) {
    Rng rng(400 + static_cast<std::uint64_t>(T));
    const MatrixXd X = rng.normal_matrix(T, 3);
    CHECK(median_heuristic_sigma(X) ==
          Catch::Approx(testutil::brute_median_distance(X)).epsilon(1e-12));
  }
}

TEST_CASE("median heuristic hand case") {
  // two coincident rows and one at distance five: distances {0, 5, 5}
  MatrixXd X(3, 2);
  X << 0.0, 0.0, 0.0, 0.0, 3.0, 4.0;
  CHECK(median_heuristic_sigma(X) == 5.0);
}

TEST_CASE("median heuristic rejects degenerate inputs") {
  MatrixXd same(4, 2);
  same.setConstant(1.0);
  CHECK_THROWS_AS(median_heuristic_sigma(same), DataError);
  CHECK_THROWS_AS(median_heuristic_sigma(same.topRows(1)), InvalidInput);
}

TEST_CASE("median heuristic sampling branch stays close to exact") {
  Rng rng(405);
  const MatrixXd X = rng.normal_matrix(2001, 2);
  const double sampled = median_heuristic_sigma(X, 9);
  const double exact = testutil::brute_median_distance(X);
  CHECK(std::abs(sampled - exact) / exact < 0.05);
  // and the subsample is seeded, so the value is reproducible
  CHECK(median_heuristic_sigma(X, 9) == sampled);
}

TEST_CASE("tuner builds an ascending grid around the median") {
  const auto panel = testutil::make_factor_panel(60, 4, 1, 0.5, 406);
  const TuneResult r =
      cv_tune_sigma(panel.X, panel.y, ProxyMode::auto_proxies(1), 1,
                    {2.0, 0.5, 1.0});
  REQUIRE(r.grid.size() == 3);
  const double med = median_heuristic_sigma(panel.X);
  CHECK(r.sigma_median == med);
  CHECK(r.grid[0] == 0.5 * med);
  CHECK(r.grid[1] == 1.0 * med);
  CHECK(r.grid[2] == 2.0 * med);
  CHECK(std::is_sorted(r.grid.begin(), r.grid.end()));
  REQUIRE(r.cv_scores.size() == 3);
  CHECK(std::find(r.grid.begin(), r.grid.end(), r.selected) != r.grid.end());
  CHECK_FALSE(r.fold_spec.empty());
  for (const auto& note : r.notes) CHECK(note.empty());
}

TEST_CASE("tuning is deterministic") {
  const auto panel = testutil::make_factor_panel(50, 5, 2, 0.5, 407);
  const TuneResult a =
      cv_tune_sigma(panel.X, panel.y, ProxyMode::auto_proxies(1), 2);
  const TuneResult b =
      cv_tune_sigma(panel.X, panel.y, ProxyMode::auto_proxies(1), 2);
  CHECK(a.selected == b.selected);
  CHECK(a.cv_scores == b.cv_scores);
}

TEST_CASE("a linear relationship pushes the bandwidth upward") {
  // with y linear in the predictors a wide gaussian (nearly linear kernel)
  // should win the cross-validation most of the time
  int wide_wins = 0;
  const int reps = 40;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(408, static_cast<std::uint64_t>(rep)));
    const Eigen::Index T = 60;
    const MatrixXd X = rng.normal_matrix(T, 4);
    const VectorXd w = rng.normal_vector(4);
    const VectorXd y = X * w + 0.3 * rng.normal_vector(T);
    const TuneResult r =
        cv_tune_sigma(X, y, ProxyMode::auto_proxies(1), 1);
    if (r.selected >= 2.0 * r.sigma_median) ++wide_wins;
  }
  CHECK(wide_wins > reps / 2);
}

TEST_CASE("theory proxies tune with rows aligned to the folds") {
  const auto panel = testutil::make_factor_panel(64, 5, 1, 0.4, 409);
  MatrixXd Z(64, 1);
  Z.col(0) = panel.y;
  const TuneResult r =
      cv_tune_sigma(panel.X, panel.y, ProxyMode::theory(Z), 2);
  CHECK(std::isfinite(r.selected));
  CHECK(r.selected > 0.0);
}

TEST_CASE("when every candidate fails the tuner reports why") {
  // horizon so large that both folds lose all fit rows
  const auto panel = testutil::make_factor_panel(20, 4, 1, 0.5, 410);
  CHECK_THROWS_AS(
      cv_tune_sigma(panel.X, panel.y, ProxyMode::auto_proxies(1), 9),
      NumericalError);
  CHECK_THROWS_WITH(
      cv_tune_sigma(panel.X, panel.y, ProxyMode::auto_proxies(1), 9),
      ContainsSubstring("every candidate"));
}

TEST_CASE("tuner argument validation") {
  const auto panel = testutil::make_factor_panel(40, 4, 1, 0.5, 411);
  CHECK_THROWS_AS(
      cv_tune_sigma(panel.X, panel.y, ProxyMode::auto_proxies(1), 0),
      InvalidInput);
  CHECK_THROWS_AS(
      cv_tune_sigma(panel.X, panel.y, ProxyMode::auto_proxies(1), 1, {}),
      InvalidInput);
  CHECK_THROWS_AS(cv_tune_sigma(panel.X, panel.y.head(10),
                                ProxyMode::auto_proxies(1), 1),
                  InvalidInput);
}
