#include <gtest/gtest.h>

#include "smoothql/dynamics.hpp"
#include "smoothql/equilibrium.hpp"
#include "support.hpp"

using namespace smoothql;
using Nested = std::vector<std::vector<double>>;

namespace {

// Bimatrix game from two 2x2 matrices (row player 0).
Game bimatrix(const double a[2][2], const double b[2][2]) {
  return NormalFormGame({2, 2}, {{a[0][0], a[0][1], a[1][0], a[1][1]}, {b[0][0], b[0][1], b[1][0], b[1][1]}});
}

}  // namespace

TEST(Qre, MatchesBisectionOracleOnPennies) {
  const double a[2][2] = {{1, -1}, {-1, 1}};
  const double b[2][2] = {{-1, 1}, {1, -1}};
  const Game game = bimatrix(a, b);
  for (double t : {0.1, 0.5, 2.0}) {
    const auto sol = qre_solve(game, TemperatureVector::constant(2, t));
    const auto [p, q] = oracle::qre_2x2(a, b, t);
    EXPECT_TRUE(sol.converged);
    EXPECT_NEAR(sol.profile[0][0], p, 1e-9);
    EXPECT_NEAR(sol.profile[1][0], q, 1e-9);
  }
}

TEST(Qre, MatchesBisectionOracleOnAsymmetricGame) {
  const double a[2][2] = {{3, -1}, {0, 2}};
  const double b[2][2] = {{-2, 1}, {1.5, -0.5}};
  const Game game = bimatrix(a, b);
  for (double t : {0.3, 1.0, 4.0}) {
    const auto sol = qre_solve(game, TemperatureVector::constant(2, t));
    const auto [p, q] = oracle::qre_2x2(a, b, t);
    ASSERT_TRUE(sol.converged) << "T=" << t;
    EXPECT_NEAR(sol.profile[0][0], p, 1e-9);
    EXPECT_NEAR(sol.profile[1][0], q, 1e-9);
  }
}

TEST(Qre, SolutionIsLogitFixedPoint) {
  for (const auto& game : fixtures::random_games()) {
    const auto t = TemperatureVector::constant(game.player_count(), 1.5);
    const auto sol = qre_solve(game, t);
    ASSERT_TRUE(sol.converged);
    EXPECT_LT(sol.residual, 1e-10);
    const auto r = oracle::rewards(*game.normal_form(), sol.profile.nested());
    for (std::size_t k = 0; k < r.size(); ++k) {
      const auto br = oracle::softmax(r[k], 1.5);
      for (std::size_t i = 0; i < br.size(); ++i) EXPECT_NEAR(sol.profile[k][i], br[i], 1e-9);
    }
  }
}

TEST(Qre, IsRestPointOfQlField) {
  const Game game(shapley_network(0.5));
  const auto t = TemperatureVector::constant(3, 1.0);
  const auto sol = qre_solve(game, t);
  ASSERT_TRUE(sol.converged);
  const auto dx = ql_field(game, sol.profile, t);
  for (double v : dx.flat()) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(Qre, ZeroGameGivesUniform) {
  const Game game(constant_game(3, 4, 0.0));
  const auto sol = qre_solve(game, TemperatureVector::constant(3, 0.2));
  EXPECT_TRUE(sol.converged);
  EXPECT_EQ(sol.iterations, 0u);
  for (double v : sol.profile.flat()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Qre, LowTemperatureApproachesNash) {
  // Prisoner's dilemma: defection is dominant.
  const double a[2][2] = {{3, 0}, {5, 1}};
  const double b[2][2] = {{3, 5}, {0, 1}};
  const Game game = bimatrix(a, b);
  const auto sol = qre_solve(game, TemperatureVector::constant(2, 0.05));
  EXPECT_GT(sol.profile[0][1], 1.0 - 1e-6);
  EXPECT_LT(equilibrium_gap(game, sol.profile), 1e-5);
}

TEST(Qre, NonConvergenceIsReported) {
  const Game game(mismatching_pennies(3.0));
  QreOptions opt;
  opt.max_iterations = 2;
  const auto sol = qre_solve(game, TemperatureVector::constant(3, 0.05), std::nullopt, opt);
  EXPECT_FALSE(sol.converged);
  EXPECT_LE(sol.iterations, 2u);
  EXPECT_TRUE(std::isfinite(sol.residual));
  EXPECT_NEAR(sol.residual, qre_residual(game, sol.profile, TemperatureVector::constant(3, 0.05)), 1e-15);
}

TEST(Qre, WarmStartAndValidation) {
  const Game game(matching_pennies());
  const auto t = TemperatureVector::constant(2, 0.5);
  const auto sol = qre_solve(game, t, StrategyProfile(Nested{{0.9, 0.1}, {0.3, 0.7}}));
  EXPECT_TRUE(sol.converged);
  EXPECT_NEAR(sol.profile[0][0], 0.5, 1e-9);
  EXPECT_THROW(qre_solve(game, TemperatureVector::constant(2, 0.0)), DomainError);
  EXPECT_THROW(qre_solve(game, TemperatureVector::constant(3, 1.0)), ShapeError);
  EXPECT_THROW(qre_residual(game, StrategyProfile::uniform({2, 3}), t), ShapeError);
}

TEST(Qre, ResidualMatchesDefinition) {
  SplitMix64 rng(3);
  const Game game(random_normal_form({3, 2, -1, 1, 8}));
  const auto x = random_interior_profile(game.action_counts(), rng);
  const auto r = oracle::rewards(*game.normal_form(), x.nested());
  double expected = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto br = oracle::softmax(r[k], 0.7);
    for (std::size_t i = 0; i < 2; ++i) expected = std::max(expected, std::abs(x[k][i] - br[i]));
  }
  EXPECT_NEAR(qre_residual(game, x, TemperatureVector::constant(3, 0.7)), expected, 1e-15);
}

TEST(EquilibriumGap, MatchesVertexEnumeration) {
  SplitMix64 rng(4);
  for (const auto& game : fixtures::random_games()) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto x = random_interior_profile(game.action_counts(), rng);
      EXPECT_NEAR(equilibrium_gap(game, x), oracle::equilibrium_gap(*game.normal_form(), x.nested()), 1e-12);
    }
  }
}

TEST(EquilibriumGap, ZeroAtPureNashOfCoordination) {
  const Game game(coordination_game(3));
  EXPECT_EQ(equilibrium_gap(game, StrategyProfile::pure({3, 3}, {1, 1})), 0.0);
  EXPECT_GT(equilibrium_gap(game, StrategyProfile::pure({3, 3}, {0, 1})), 0.0);
}

TEST(EquilibriumGap, PerturbedGapVanishesAtQre) {
  const Game game(random_normal_form({3, 3, -1, 1, 9}));
  const auto t = TemperatureVector::constant(3, 0.8);
  const auto sol = qre_solve(game, t);
  ASSERT_TRUE(sol.converged);
  // At a QRE every r^H_ki is equal within a block, so the best-response gap is zero.
  EXPECT_LT(equilibrium_gap(PerturbedGameView(game, t), sol.profile), 1e-8);
  EXPECT_GT(equilibrium_gap(game, sol.profile), 1e-3);
}
