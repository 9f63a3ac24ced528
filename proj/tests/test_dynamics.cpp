#include <gtest/gtest.h>

#include "smoothql/dynamics.hpp"
#include "support.hpp"

using namespace smoothql;
using Nested = std::vector<std::vector<double>>;

namespace {

IntegratorConfig short_run(double t_end, double step = 0.01, std::size_t stride = 10) {
  IntegratorConfig c;
  c.t_end = t_end;
  c.step = step;
  c.record_stride = stride;
  return c;
}

double sup_over_trajectories(const Trajectory& a, const Trajectory& b) {
  double d = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) d = std::max(d, sup_distance(a.profiles[s].flat(), b.profiles[s].flat()));
  return d;
}

}  // namespace

TEST(ChoiceMap, MatchesLongDoubleSoftmax) {
  const std::vector<double> y{0.3, -1.2, 2.5, 0.0};
  for (double t : {0.05, 0.5, 1.0, 7.0}) {
    const auto p = entropic_choice_map(y, t);
    const auto q = oracle::softmax(y, t);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-15);
  }
}

TEST(ChoiceMap, StableForLargeInputs) {
  const std::vector<double> y{1000.0, 999.0};
  const auto p = entropic_choice_map(y, 1.0);
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_THROW(entropic_choice_map(y, 0.0), DomainError);
  EXPECT_THROW(entropic_choice_map(std::vector<double>{INFINITY, 0.0}, 1.0), DomainError);
}

TEST(Regularizer, ConjugateGradientIsChoiceMap) {
  const EntropicRegularizer reg(TemperatureVector({0.7}));
  std::vector<double> y{0.2, -0.4, 1.1};
  std::vector<double> x(3);
  reg.choice(0, y, x);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    auto up = y, dn = y;
    up[i] += h;
    dn[i] -= h;
    EXPECT_NEAR((reg.conjugate(0, up) - reg.conjugate(0, dn)) / (2 * h), x[i], 1e-8);
  }
}

TEST(Regularizer, FenchelYoungEqualityAtGradient) {
  const EntropicRegularizer reg(TemperatureVector({2.0}));
  const std::vector<double> x{0.1, 0.6, 0.3};
  std::vector<double> g(3);
  reg.gradient(0, x, g);
  EXPECT_NEAR(reg.value(0, x) + reg.conjugate(0, g), dot(x, g), 1e-12);
  std::vector<double> back(3);
  reg.choice(0, g, back);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(back[i], x[i], 1e-14);
  EXPECT_THROW(reg.gradient(0, std::vector<double>{0.0, 1.0, 0.0}, g), DomainError);
  EXPECT_EQ(reg.strong_convexity(0), 2.0);
}

TEST(Fields, QlMatchesExplicitFormula) {
  SplitMix64 rng(1);
  const Game game(random_normal_form({3, 3, -1, 1, 2}));
  const auto x = random_interior_profile(game.action_counts(), rng);
  const TemperatureVector t({0.3, 0.0, 1.5});
  const auto dx = ql_field(game, x, t);
  const auto r = oracle::rewards(*game.normal_form(), x.nested());
  for (std::size_t k = 0; k < 3; ++k) {
    double avg_r = 0.0, avg_l = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      avg_r += x[k][i] * r[k][i];
      avg_l += x[k][i] * std::log(x[k][i]);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      const double expected = x[k][i] * (r[k][i] - avg_r - t[k] * (std::log(x[k][i]) - avg_l));
      EXPECT_NEAR(dx[k][i], expected, 1e-14);
    }
  }
}

TEST(Fields, TangentToSimplex) {
  SplitMix64 rng(2);
  const Game game(shapley_network(0.5));
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = random_interior_profile(game.action_counts(), rng);
    const auto dx = ql_field(game, x, TemperatureVector::constant(3, 0.4));
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(dx[k][0] + dx[k][1] + dx[k][2], 0.0, 1e-15);
  }
}

TEST(Fields, ZeroTemperatureIsReplicator) {
  SplitMix64 rng(3);
  const Game game(random_normal_form({3, 2, -1, 1, 4}));
  const auto x = random_interior_profile(game.action_counts(), rng);
  const auto a = ql_field(game, x, TemperatureVector::constant(3, 0.0));
  const auto b = replicator_field(game, x);
  EXPECT_EQ(sup_distance(a.flat(), b.flat()), 0.0);
}

TEST(Fields, QlIsReplicatorOnPerturbedGame) {
  SplitMix64 rng(4);
  for (const auto& game : fixtures::random_games()) {
    const auto x = random_interior_profile(game.action_counts(), rng);
    const auto t = TemperatureVector::constant(game.player_count(), 0.8);
    const auto a = ql_field(game, x, t);
    const auto b = replicator_field(PerturbedGameView(game, t), x);
    EXPECT_LT(sup_distance(a.flat(), b.flat()), 1e-14);
  }
}

TEST(Fields, BoundaryProfileRejected) {
  const Game game(matching_pennies());
  EXPECT_THROW(ql_field(game, StrategyProfile(Nested{{1.0, 0.0}, {0.5, 0.5}}), TemperatureVector::constant(2, 1.0)),
               DomainError);
  EXPECT_THROW(simulate_ql(game, StrategyProfile(Nested{{1.0, 0.0}, {0.5, 0.5}}), TemperatureVector::constant(2, 1.0),
                           short_run(1.0)),
               DomainError);
}

TEST(Fields, FtrlFieldIsRewardAtChoice) {
  const Game game(matching_pennies());
  const BlockVector y = BlockVector::from_nested({{0.4, -0.1}, {1.0, 0.0}});
  const auto step = ftrl_field(game, y, EntropicRegularizer{});
  const auto r = all_rewards(game, step.x);
  EXPECT_EQ(sup_distance(r.flat(), step.ydot.flat()), 0.0);
  EXPECT_NEAR(step.x[0][0], oracle::softmax({0.4, -0.1}, 1.0)[0], 1e-15);
}

TEST(Integrator, RecordingSchedule) {
  const Game game(matching_pennies());
  const auto x0 = StrategyProfile(Nested{{0.3, 0.7}, {0.6, 0.4}});
  const auto traj = simulate_replicator(game, x0, short_run(1.005, 0.01, 25));
  ASSERT_GE(traj.size(), 3u);
  EXPECT_EQ(traj.times.front(), 0.0);
  EXPECT_NEAR(traj.times[1], 0.25, 1e-12);
  EXPECT_EQ(traj.times.back(), 1.005);
  EXPECT_EQ(traj.size(), 6u);
  EXPECT_EQ(traj.profiles.front().nested(), x0.nested());
}

TEST(Integrator, ConfigValidation) {
  const Game game(matching_pennies());
  const auto x0 = StrategyProfile::uniform({2, 2});
  auto bad = short_run(1.0);
  bad.step = 0.0;
  EXPECT_THROW(simulate_replicator(game, x0, bad), ParameterError);
  bad = short_run(1.0);
  bad.floor = 1e-3;
  EXPECT_THROW(simulate_replicator(game, x0, bad), ParameterError);
  bad = short_run(1.0);
  bad.record_stride = 0;
  EXPECT_THROW(simulate_replicator(game, x0, bad), ParameterError);
}

TEST(Integrator, FourthOrderConvergence) {
  const Game game(matching_pennies());
  const auto x0 = StrategyProfile(Nested{{0.2, 0.8}, {0.7, 0.3}});
  const auto t = TemperatureVector::constant(2, 0.2);
  const auto ref = simulate_ql(game, x0, t, short_run(5.0, 0.001, 5000)).final_profile();
  const auto coarse = simulate_ql(game, x0, t, short_run(5.0, 0.1, 50)).final_profile();
  const auto fine = simulate_ql(game, x0, t, short_run(5.0, 0.05, 100)).final_profile();
  const double e1 = sup_distance(coarse.flat(), ref.flat());
  const double e2 = sup_distance(fine.flat(), ref.flat());
  EXPECT_GT(e1 / e2, 12.0);
  EXPECT_LT(e1 / e2, 20.0);
}

TEST(Integrator, AgreesWithUnclampedReference) {
  const Game game(random_normal_form({2, 3, -1, 1, 21}));
  const auto x0 = StrategyProfile(Nested{{0.2, 0.5, 0.3}, {0.1, 0.1, 0.8}});
  const auto traj = simulate_replicator(game, x0, short_run(3.0, 0.01, 300));
  const auto f = [&](const std::vector<double>& v) {
    const auto r = oracle::rewards(*game.normal_form(), {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
    std::vector<double> d(6);
    for (std::size_t k = 0; k < 2; ++k) {
      double avg = 0.0;
      for (std::size_t i = 0; i < 3; ++i) avg += v[3 * k + i] * r[k][i];
      for (std::size_t i = 0; i < 3; ++i) d[3 * k + i] = v[3 * k + i] * (r[k][i] - avg);
    }
    return d;
  };
  const auto expected = oracle::rk4(f, {0.2, 0.5, 0.3, 0.1, 0.1, 0.8}, 0.01, 300);
  EXPECT_LT(sup_distance(traj.final_profile().flat(), expected), 1e-12);
}

TEST(Integrator, ZeroGameIsStationaryForReplicator) {
  const Game game(constant_game(3, 2, 0.0));
  SplitMix64 rng(5);
  const auto x0 = random_interior_profile(game.action_counts(), rng);
  const auto traj = simulate_ql(game, x0, TemperatureVector::constant(3, 0.0), short_run(10.0));
  for (const auto& x : traj.profiles) EXPECT_LT(sup_distance(x.flat(), x0.flat()), 1e-15);
}

TEST(Integrator, ZeroGameWithExplorationReachesUniform) {
  const Game game(constant_game(2, 3, 0.0));
  const auto x0 = StrategyProfile(Nested{{0.7, 0.2, 0.1}, {0.05, 0.05, 0.9}});
  const auto traj = simulate_ql(game, x0, TemperatureVector::constant(2, 1.0), short_run(40.0));
  EXPECT_LT(sup_distance(traj.final_profile().flat(), StrategyProfile::uniform({3, 3}).flat()), 1e-9);
}

TEST(Integrator, Deterministic) {
  const Game game(shapley_network(0.5));
  const auto x0 = StrategyProfile(Nested{{0.5, 0.3, 0.2}, {0.1, 0.3, 0.6}, {0.3, 0.3, 0.4}});
  const auto a = simulate_ql(game, x0, TemperatureVector::constant(3, 0.05), short_run(20.0));
  const auto b = simulate_ql(game, x0, TemperatureVector::constant(3, 0.05), short_run(20.0));
  EXPECT_EQ(sup_over_trajectories(a, b), 0.0);
}

TEST(Integrator, NonFiniteStateRaisesWithLastValidTime) {
  const auto field = [](const BlockVector& x, BlockVector& dx) {
    dx = BlockVector(x.action_counts(), std::numeric_limits<double>::quiet_NaN());
  };
  try {
    integrate(field, StrategyProfile::uniform({2, 2}), short_run(1.0));
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    EXPECT_EQ(e.last_valid_time, 0.0);
  }
}

TEST(Integrator, StaysInsideSimplexAtLowTemperature) {
  const Game game(mismatching_pennies(3.0));
  const auto x0 = StrategyProfile(Nested{{0.9, 0.1}, {0.2, 0.8}, {0.5, 0.5}});
  const auto traj = simulate_ql(game, x0, TemperatureVector::constant(3, 0.001), short_run(200.0));
  for (const auto& x : traj.profiles) {
    EXPECT_TRUE(x.is_interior());
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(x[k][0] + x[k][1], 1.0, 1e-12);
  }
}

TEST(Ftrl, UnitEntropicReproducesReplicator) {
  SplitMix64 rng(6);
  const Game game(random_normal_form({3, 2, -1, 1, 31}));
  const auto x0 = random_interior_profile(game.action_counts(), rng);
  const auto cfg = short_run(20.0);
  const auto rd = simulate_replicator(game, x0, cfg);
  EntropicRegularizer reg;
  const auto ftrl = integrate(FtrlField<EntropicRegularizer>{game, reg, std::nullopt}, entropic_payoff_state(x0), cfg);
  ASSERT_EQ(ftrl.size(), rd.size());
  EXPECT_LT(sup_over_trajectories(rd, ftrl), 1e-9);
  EXPECT_EQ(ftrl.payoff_states.size(), ftrl.size());
}

TEST(Ftrl, PerturbedUnitEntropicReproducesQl) {
  SplitMix64 rng(7);
  const Game game(random_normal_form({2, 3, -1, 1, 32}));
  const auto x0 = random_interior_profile(game.action_counts(), rng);
  const auto t = TemperatureVector({0.4, 1.3});
  const auto cfg = short_run(20.0);
  const auto ql = simulate_ql(game, x0, t, cfg);
  const auto ftrl =
      integrate(FtrlField<EntropicRegularizer>{game, EntropicRegularizer{}, t}, entropic_payoff_state(x0), cfg);
  EXPECT_LT(sup_over_trajectories(ql, ftrl), 1e-9);
}

TEST(Ftrl, ScaledRegularizerIsTimeRescaledReplicator) {
  // FTRL with regularizer scale s runs replicator dynamics at speed 1/s.
  SplitMix64 rng(8);
  const Game game(random_normal_form({2, 2, -1, 1, 33}));
  const auto x0 = random_interior_profile(game.action_counts(), rng);
  const double s = 2.0;
  const EntropicRegularizer reg(TemperatureVector::constant(2, s));
  const auto ftrl = integrate(FtrlField<EntropicRegularizer>{game, reg, std::nullopt}, entropic_payoff_state(x0, reg),
                              short_run(10.0, 0.01, 1000));
  const auto rd = simulate_replicator(game, x0, short_run(5.0, 0.005, 1000));
  EXPECT_LT(sup_distance(ftrl.final_profile().flat(), rd.final_profile().flat()), 1e-9);
}
