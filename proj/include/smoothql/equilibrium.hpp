#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "smoothql/game.hpp"
#include "smoothql/regularizer.hpp"

namespace smoothql {

struct QreSolution {
  StrategyProfile profile;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  TemperatureVector temperatures;
};

struct QreOptions {
  double damping = 0.5;
  double min_damping = 1.0 / 64.0;
  double tolerance = 1e-10;
  std::size_t max_iterations = 100000;
};

namespace detail {

inline void check_temperatures(const Game& game, const TemperatureVector& t) {
  if (t.size() != game.player_count()) throw ShapeError("one temperature per player required");
  if (!t.all_positive()) throw DomainError("QRE operations need T_k > 0 for every player");
}

/// Logit response softmax(r_k(x) / T_k) for every player, plus the sup-norm gap to x.
inline double logit_response(const Game& game, const BlockVector& x, const TemperatureVector& t,
                             BlockVector& rewards, BlockVector& response) {
  game.rewards(x, rewards);
  if (!response.same_layout(x)) response = BlockVector(x.action_counts());
  double residual = 0.0;
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    const auto p = entropic_choice_map(rewards[k], t[k]);
    auto dst = response[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      dst[i] = p[i];
      residual = std::max(residual, std::abs(x[k][i] - p[i]));
    }
  }
  return residual;
}

}  // namespace detail

/// Sup-norm distance between x and its logit response softmax(r(x) / T).
inline double qre_residual(const Game& game, const StrategyProfile& x, const TemperatureVector& t) {
  detail::check_temperatures(game, t);
  detail::check_layout(game.action_counts(), x.action_counts());
  BlockVector r, br;
  return detail::logit_response(game, x.blocks(), t, r, br);
}

/// Damped logit fixed-point iteration x <- (1 - a) x + a softmax(r(x) / T).
/// The damping halves after any residual increase, down to `min_damping`.
/// Non-convergence is reported through `converged`, never thrown.
inline QreSolution qre_solve(const Game& game, const TemperatureVector& t,
                             const std::optional<StrategyProfile>& x_init = std::nullopt, const QreOptions& opt = {}) {
  detail::check_temperatures(game, t);
  StrategyProfile start = x_init ? *x_init : StrategyProfile::uniform(game.action_counts());
  detail::check_layout(game.action_counts(), start.action_counts());

  BlockVector x = start.blocks();
  BlockVector rewards, response;
  double residual = detail::logit_response(game, x, t, rewards, response);
  BlockVector best = x;
  double best_residual = residual;
  double alpha = opt.damping;
  std::size_t it = 0;
  while (best_residual >= opt.tolerance && it < opt.max_iterations) {
    auto xs = x.flat();
    const auto bs = response.flat();
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = (1.0 - alpha) * xs[i] + alpha * bs[i];
    ++it;
    const double next = detail::logit_response(game, x, t, rewards, response);
    if (next > residual) alpha = std::max(alpha / 2.0, opt.min_damping);
    residual = next;
    if (residual < best_residual) {
      best_residual = residual;
      best = x;
    }
  }
  return {StrategyProfile(std::move(best)), best_residual, it, best_residual < opt.tolerance, t};
}

/// max_k ( max_i r_ki(x) - <x_k, r_k(x)> ); zero exactly at equilibria.
inline double equilibrium_gap(const Game& game, const StrategyProfile& x) {
  detail::check_layout(game.action_counts(), x.action_counts());
  const auto r = game.rewards(x.blocks());
  double gap = 0.0;
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    const double best = *std::max_element(r[k].begin(), r[k].end());
    gap = std::max(gap, best - dot(x[k], r[k]));
  }
  return gap;
}

/// Same gap evaluated with the perturbed rewards r^H of the view (needs interior x).
inline double equilibrium_gap(const PerturbedGameView& view, const StrategyProfile& x) {
  detail::check_layout(view.base.action_counts(), x.action_counts());
  const auto r = all_perturbed_rewards(view, x);
  double gap = 0.0;
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    const double best = *std::max_element(r[k].begin(), r[k].end());
    gap = std::max(gap, best - dot(x[k], r[k]));
  }
  return gap;
}

}  // namespace smoothql
