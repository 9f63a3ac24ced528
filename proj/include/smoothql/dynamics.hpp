#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "smoothql/game.hpp"
#include "smoothql/regularizer.hpp"

namespace smoothql {

struct IntegrationError : std::runtime_error {
  IntegrationError(const std::string& what, double t) : std::runtime_error(what), last_valid_time(t) {}
  double last_valid_time;
};

struct IntegratorConfig {
  double step = 0.01;
  double t_end = 500.0;
  std::size_t record_stride = 10;
  double floor = 1e-12;
  bool renormalize = true;

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw ParameterError("integrator step must be > 0");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ParameterError("integration horizon must be > 0");
    if (record_stride == 0) throw ParameterError("record stride must be >= 1");
    if (!(floor > 0.0 && floor < 1e-6)) throw ParameterError("positivity floor must lie in (0, 1e-6)");
  }
};

/// Recorded samples of a flow. `payoff_states` is filled only by FTRL runs.
struct Trajectory {
  std::vector<double> times;
  std::vector<StrategyProfile> profiles;
  std::vector<BlockVector> payoff_states;

  bool empty() const { return times.empty(); }
  std::size_t size() const { return times.size(); }
  const StrategyProfile& final_profile() const { return profiles.back(); }
  double duration() const { return empty() ? 0.0 : times.back() - times.front(); }
};

namespace detail {

inline void require_interior(const BlockVector& x) {
  for (double v : x.flat())
    if (!(v > 0.0)) throw DomainError("dynamics need a strictly interior profile");
}

/// dx_ki = x_ki (g_ki - <x_k, g_k>) for a per-player score vector g.
inline void replicator_projection(const BlockVector& x, const BlockVector& g, BlockVector& dx) {
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    const auto xk = x[k];
    const auto gk = g[k];
    auto out = dx[k];
    const double avg = dot(xk, gk);
    for (std::size_t i = 0; i < xk.size(); ++i) out[i] = xk[i] * (gk[i] - avg);
  }
}

}  // namespace detail

/// Smooth Q-learning vector field:
/// dx_ki = x_ki [ r_ki - <x_k, r_k> - T_k (ln x_ki - <x_k, ln x_k>) ].
struct QlField {
  Game game;
  TemperatureVector temperatures;

  void operator()(const BlockVector& x, BlockVector& dx) const {
    detail::require_interior(x);
    thread_local BlockVector g;
    game.rewards(x, g);
    for (std::size_t k = 0; k < x.player_count(); ++k) {
      const double t = temperatures[k];
      if (t == 0.0) continue;
      const auto xk = x[k];
      auto gk = g[k];
      for (std::size_t i = 0; i < xk.size(); ++i) gk[i] -= t * std::log(xk[i]);
    }
    if (!dx.same_layout(x)) dx = BlockVector(x.action_counts());
    detail::replicator_projection(x, g, dx);
  }
};

/// Replicator dynamics, optionally on the perturbed rewards r^H of a
/// PerturbedGameView, which is Q-learning written as replicator dynamics.
struct ReplicatorField {
  Game game;
  std::optional<TemperatureVector> perturbation;

  void operator()(const BlockVector& x, BlockVector& dx) const {
    detail::require_interior(x);
    thread_local BlockVector g;
    game.rewards(x, g);
    if (perturbation) {
      for (std::size_t k = 0; k < x.player_count(); ++k) {
        const auto xk = x[k];
        auto gk = g[k];
        for (std::size_t i = 0; i < xk.size(); ++i) gk[i] -= (*perturbation)[k] * (std::log(xk[i]) + 1.0);
      }
    }
    if (!dx.same_layout(x)) dx = BlockVector(x.action_counts());
    detail::replicator_projection(x, g, dx);
  }
};

inline QlField make_ql_field(const Game& game, const TemperatureVector& t) {
  if (t.size() != game.player_count()) throw ShapeError("one temperature per player required");
  return {game, t};
}

inline BlockVector ql_field(const Game& game, const StrategyProfile& x, const TemperatureVector& t) {
  detail::check_layout(game.action_counts(), x.action_counts());
  BlockVector dx(x.action_counts());
  make_ql_field(game, t)(x.blocks(), dx);
  return dx;
}

inline BlockVector replicator_field(const Game& game, const StrategyProfile& x) {
  detail::check_layout(game.action_counts(), x.action_counts());
  BlockVector dx(x.action_counts());
  ReplicatorField{game, std::nullopt}(x.blocks(), dx);
  return dx;
}

inline BlockVector replicator_field(const PerturbedGameView& view, const StrategyProfile& x) {
  detail::check_layout(view.base.action_counts(), x.action_counts());
  BlockVector dx(x.action_counts());
  ReplicatorField{view.base, view.temperatures}(x.blocks(), dx);
  return dx;
}

/// FTRL in payoff space: dy_k = r_k(Q(y)) (or r^H_k for a perturbed view).
template <Regularizer Reg>
struct FtrlField {
  Game game;
  Reg regularizer;
  std::optional<TemperatureVector> perturbation;

  void choice(const BlockVector& y, BlockVector& x) const {
    if (!x.same_layout(y)) x = BlockVector(y.action_counts());
    for (std::size_t k = 0; k < y.player_count(); ++k) regularizer.choice(k, y[k], x[k]);
  }

  void operator()(const BlockVector& y, BlockVector& dy) const {
    if (!y.all_finite()) throw DomainError("FTRL state must be finite");
    thread_local BlockVector x;
    choice(y, x);
    if (!dy.same_layout(y)) dy = BlockVector(y.action_counts());
    game.rewards(x, dy);
    if (perturbation) {
      for (std::size_t k = 0; k < y.player_count(); ++k) {
        const auto xk = x[k];
        auto rk = dy[k];
        for (std::size_t i = 0; i < xk.size(); ++i) {
          if (!(xk[i] > 0.0)) throw DomainError("perturbed FTRL left the simplex interior (choice map underflow)");
          rk[i] -= (*perturbation)[k] * (std::log(xk[i]) + 1.0);
        }
      }
    }
  }
};

struct FtrlStep {
  BlockVector ydot;
  StrategyProfile x;
};

template <Regularizer Reg>
FtrlStep ftrl_field(const Game& game, const BlockVector& y, const Reg& reg) {
  detail::check_layout(game.action_counts(), y.action_counts());
  FtrlField<Reg> f{game, reg, std::nullopt};
  BlockVector dy, x;
  f(y, dy);
  f.choice(y, x);
  return {std::move(dy), StrategyProfile(std::move(x))};
}

template <Regularizer Reg>
FtrlStep ftrl_field(const PerturbedGameView& view, const BlockVector& y, const Reg& reg) {
  detail::check_layout(view.base.action_counts(), y.action_counts());
  FtrlField<Reg> f{view.base, reg, view.temperatures};
  BlockVector dy, x;
  f(y, dy);
  f.choice(y, x);
  return {std::move(dy), StrategyProfile(std::move(x))};
}

namespace detail {

inline void axpy_into(const BlockVector& base, double c, const BlockVector& k, BlockVector& out) {
  if (!out.same_layout(base)) out = BlockVector(base.action_counts());
  auto o = out.flat();
  const auto b = base.flat();
  const auto d = k.flat();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = b[i] + c * d[i];
}

inline void clamp_simplex(BlockVector& x, double floor, bool renormalize) {
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    auto xk = x[k];
    double s = 0.0;
    for (double& v : xk) {
      v = std::max(v, floor);
      s += v;
    }
    if (renormalize)
      for (double& v : xk) v /= s;
  }
}

/// Classical fixed-step RK4. `project` is applied to stage and step states;
/// `record(t, state)` is called at t0, every `stride`-th step and at t_end.
template <class Field, class Project, class Record>
void rk4(const Field& field, BlockVector state, const IntegratorConfig& cfg, Project&& project, Record&& record) {
  cfg.validate();
  const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.step - 1e-9));
  BlockVector k1, k2, k3, k4, tmp;
  record(0.0, state);
  double t = 0.0;
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t_next = n == steps ? cfg.t_end : static_cast<double>(n) * cfg.step;
    const double h = t_next - t;
    field(state, k1);
    axpy_into(state, 0.5 * h, k1, tmp);
    project(tmp);
    field(tmp, k2);
    axpy_into(state, 0.5 * h, k2, tmp);
    project(tmp);
    field(tmp, k3);
    axpy_into(state, h, k3, tmp);
    project(tmp);
    field(tmp, k4);
    auto s = state.flat();
    const auto a = k1.flat(), b = k2.flat(), c = k3.flat(), d = k4.flat();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
    if (!state.all_finite())
      throw IntegrationError("integration produced a non-finite state at t=" + std::to_string(t_next), t);
    project(state);
    t = t_next;
    if (n % cfg.record_stride == 0 || n == steps) record(t, state);
  }
}

}  // namespace detail

/// Integrates a simplex field (callable as field(x, dx)) from an interior x0.
template <class Field>
Trajectory integrate(const Field& field, const StrategyProfile& x0, const IntegratorConfig& cfg) {
  if (!x0.is_interior()) throw DomainError("initial profile must be strictly interior");
  Trajectory traj;
  auto project = [&](BlockVector& x) { detail::clamp_simplex(x, cfg.floor, cfg.renormalize); };
  auto record = [&](double t, const BlockVector& x) {
    traj.times.push_back(t);
    traj.profiles.push_back(StrategyProfile::clamped(x, cfg.floor));
  };
  detail::rk4(field, x0.blocks(), cfg, project, record);
  return traj;
}

/// Integrates FTRL in payoff space from y0, recording both y and x = Q(y).
template <Regularizer Reg>
Trajectory integrate(const FtrlField<Reg>& field, const BlockVector& y0, const IntegratorConfig& cfg) {
  if (!y0.all_finite()) throw DomainError("initial payoff state must be finite");
  Trajectory traj;
  auto project = [](BlockVector&) {};
  auto record = [&](double t, const BlockVector& y) {
    BlockVector x;
    field.choice(y, x);
    traj.times.push_back(t);
    traj.profiles.push_back(StrategyProfile(std::move(x)));
    traj.payoff_states.push_back(y);
  };
  detail::rk4(field, y0, cfg, project, record);
  return traj;
}

inline Trajectory simulate_ql(const Game& game, const StrategyProfile& x0, const TemperatureVector& t,
                              const IntegratorConfig& cfg) {
  detail::check_layout(game.action_counts(), x0.action_counts());
  return integrate(make_ql_field(game, t), x0, cfg);
}

inline Trajectory simulate_replicator(const Game& game, const StrategyProfile& x0, const IntegratorConfig& cfg) {
  detail::check_layout(game.action_counts(), x0.action_counts());
  return integrate(ReplicatorField{game, std::nullopt}, x0, cfg);
}

inline Trajectory simulate_replicator(const PerturbedGameView& view, const StrategyProfile& x0,
                                      const IntegratorConfig& cfg) {
  detail::check_layout(view.base.action_counts(), x0.action_counts());
  return integrate(ReplicatorField{view.base, view.temperatures}, x0, cfg);
}

/// Payoff-space state whose entropic choice map (scale s_k) returns x0: y_k = s_k ln x0_k.
inline BlockVector entropic_payoff_state(const StrategyProfile& x0, const EntropicRegularizer& reg = {}) {
  BlockVector y(x0.action_counts());
  for (std::size_t k = 0; k < x0.player_count(); ++k)
    for (std::size_t i = 0; i < x0.action_count(k); ++i) {
      if (!(x0[k][i] > 0.0)) throw DomainError("payoff state needs an interior profile");
      y[k][i] = reg.scale(k) * std::log(x0[k][i]);
    }
  return y;
}

}  // namespace smoothql
