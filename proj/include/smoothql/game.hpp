#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "smoothql/profile.hpp"

namespace smoothql {

/// Calls fn(actions) for every pure joint profile, last player varying fastest.
inline void for_each_pure_profile(const std::vector<std::size_t>& counts,
                                  const std::function<void(const std::vector<std::size_t>&)>& fn) {
  if (counts.empty()) return;
  std::vector<std::size_t> s(counts.size(), 0);
  while (true) {
    fn(s);
    std::size_t k = counts.size();
    for (;;) {
      if (k == 0) return;
      --k;
      if (++s[k] < counts[k]) break;
      s[k] = 0;
    }
  }
}

namespace detail {

inline void check_action_counts(const std::vector<std::size_t>& counts) {
  if (counts.size() < 2) throw ShapeError("a game needs at least two players");
  for (std::size_t n : counts)
    if (n < 2) throw ShapeError("every player needs at least two actions");
}

inline void check_layout(const std::vector<std::size_t>& game_counts, const std::vector<std::size_t>& x_counts) {
  if (game_counts != x_counts) throw ShapeError("profile layout does not match the game's action counts");
}

}  // namespace detail

/// Dense N-player game. Payoff tensors are stored row-major over pure
/// profiles with player 0 varying slowest.
class NormalFormGame {
 public:
  NormalFormGame(std::vector<std::size_t> action_counts, std::vector<std::vector<double>> payoffs)
      : counts_(std::move(action_counts)), payoffs_(std::move(payoffs)) {
    detail::check_action_counts(counts_);
    strides_.assign(counts_.size(), 1);
    for (std::size_t k = counts_.size() - 1; k > 0; --k) strides_[k - 1] = strides_[k] * counts_[k];
    profile_count_ = strides_[0] * counts_[0];
    if (payoffs_.size() != counts_.size()) throw ShapeError("one payoff tensor per player required");
    for (const auto& u : payoffs_) {
      if (u.size() != profile_count_)
        throw ShapeError("payoff tensor has " + std::to_string(u.size()) + " entries, expected " +
                         std::to_string(profile_count_));
      for (double v : u)
        if (!std::isfinite(v)) throw ShapeError("payoff entries must be finite");
    }
  }

  std::size_t player_count() const { return counts_.size(); }
  const std::vector<std::size_t>& action_counts() const { return counts_; }
  std::size_t profile_count() const { return profile_count_; }
  const std::vector<double>& tensor(std::size_t k) const { return payoffs_.at(k); }
  std::size_t stride(std::size_t k) const { return strides_[k]; }

  std::size_t flat_index(const std::vector<std::size_t>& s) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < s.size(); ++k) idx += s[k] * strides_[k];
    return idx;
  }

  double entry(std::size_t k, const std::vector<std::size_t>& s) const { return payoffs_.at(k)[flat_index(s)]; }

  /// r_k(x) for all players, by contracting each tensor against the opponents' strategies.
  void rewards(std::span<const double> x, const std::vector<std::size_t>& offsets, BlockVector& out) const {
    thread_local std::vector<double> buf;
    const std::size_t N = counts_.size();
    for (std::size_t k = 0; k < N; ++k) {
      buf.assign(payoffs_[k].begin(), payoffs_[k].end());
      std::size_t size = profile_count_;
      for (std::size_t l = N - 1; l > k; --l) {
        const std::size_t n = counts_[l];
        const double* xl = x.data() + offsets[l];
        size /= n;
        for (std::size_t j = 0; j < size; ++j) {
          const double* row = buf.data() + j * n;
          double acc = 0.0;
          for (std::size_t a = 0; a < n; ++a) acc += row[a] * xl[a];
          buf[j] = acc;
        }
      }
      for (std::size_t l = 0; l < k; ++l) {
        const std::size_t n = counts_[l];
        const double* xl = x.data() + offsets[l];
        size /= n;
        for (std::size_t r = 0; r < size; ++r) buf[r] *= xl[0];
        for (std::size_t a = 1; a < n; ++a) {
          const double* src = buf.data() + a * size;
          const double xa = xl[a];
          for (std::size_t r = 0; r < size; ++r) buf[r] += xa * src[r];
        }
      }
      auto dst = out[k];
      std::copy(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(counts_[k]), dst.begin());
    }
  }

  double influence_bound() const {
    double delta = 0.0;
    std::vector<std::size_t> s(counts_.size(), 0);
    for (std::size_t idx = 0; idx < profile_count_; ++idx) {
      std::size_t rem = idx;
      for (std::size_t l = 0; l < counts_.size(); ++l) {
        s[l] = rem / strides_[l];
        rem %= strides_[l];
      }
      for (std::size_t k = 0; k < counts_.size(); ++k) {
        const auto& u = payoffs_[k];
        for (std::size_t l = 0; l < counts_.size(); ++l) {
          if (l == k) continue;
          for (std::size_t a = s[l] + 1; a < counts_[l]; ++a) {
            const std::size_t other = idx + (a - s[l]) * strides_[l];
            delta = std::max(delta, std::abs(u[idx] - u[other]));
          }
        }
      }
    }
    return delta;
  }

 private:
  std::vector<std::size_t> counts_;
  std::vector<std::vector<double>> payoffs_;
  std::vector<std::size_t> strides_;
  std::size_t profile_count_ = 0;
};

/// Payoff matrix for player `from` against player `to` (rows: from's actions).
struct PolymatrixEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  Eigen::MatrixXd matrix;
};

/// Network game u_k(x) = sum over edges (k,l) of <x_k, A^{kl} x_l>.
/// Every edge has its reverse; missing reverse edges are filled with zeros.
class PolymatrixGame {
 public:
  PolymatrixGame(std::vector<std::size_t> action_counts, std::vector<PolymatrixEdge> edges)
      : counts_(std::move(action_counts)) {
    detail::check_action_counts(counts_);
    const std::size_t N = counts_.size();
    for (auto& e : edges) {
      if (e.from >= N || e.to >= N) throw ShapeError("edge endpoint out of range");
      if (e.from == e.to) throw ShapeError("self-loop edges are not allowed");
      if (static_cast<std::size_t>(e.matrix.rows()) != counts_[e.from] ||
          static_cast<std::size_t>(e.matrix.cols()) != counts_[e.to])
        throw ShapeError("edge (" + std::to_string(e.from) + "," + std::to_string(e.to) +
                         ") matrix dimensions do not match action counts");
      if (!e.matrix.allFinite()) throw ShapeError("edge matrices must be finite");
      if (find(e.from, e.to)) throw ShapeError("duplicate edge");
      edges_.push_back(std::move(e));
    }
    const std::size_t given = edges_.size();
    for (std::size_t i = 0; i < given; ++i) {
      const auto from = edges_[i].from, to = edges_[i].to;
      if (!find(to, from)) edges_.push_back({to, from, Eigen::MatrixXd::Zero(counts_[to], counts_[from])});
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const auto& a, const auto& b) { return std::pair(a.from, a.to) < std::pair(b.from, b.to); });
  }

  std::size_t player_count() const { return counts_.size(); }
  const std::vector<std::size_t>& action_counts() const { return counts_; }
  const std::vector<PolymatrixEdge>& edges() const { return edges_; }

  const PolymatrixEdge* find(std::size_t from, std::size_t to) const {
    for (const auto& e : edges_)
      if (e.from == from && e.to == to) return &e;
    return nullptr;
  }

  void rewards(std::span<const double> x, const std::vector<std::size_t>& offsets, BlockVector& out) const {
    for (double& v : out.flat()) v = 0.0;
    for (const auto& e : edges_) {
      Eigen::Map<const Eigen::VectorXd> xl(x.data() + offsets[e.to], static_cast<Eigen::Index>(counts_[e.to]));
      auto dst = out[e.from];
      Eigen::Map<Eigen::VectorXd> r(dst.data(), static_cast<Eigen::Index>(dst.size()));
      r.noalias() += e.matrix * xl;
    }
  }

  double influence_bound() const {
    double delta = 0.0;
    for (const auto& e : edges_)
      for (Eigen::Index i = 0; i < e.matrix.rows(); ++i)
        delta = std::max(delta, e.matrix.row(i).maxCoeff() - e.matrix.row(i).minCoeff());
    return delta;
  }

  NormalFormGame to_normal_form() const {
    const std::size_t N = counts_.size();
    std::vector<std::vector<double>> payoffs(N);
    for_each_pure_profile(counts_, [&](const std::vector<std::size_t>& s) {
      for (std::size_t k = 0; k < N; ++k) {
        double u = 0.0;
        for (const auto& e : edges_)
          if (e.from == k) u += e.matrix(static_cast<Eigen::Index>(s[k]), static_cast<Eigen::Index>(s[e.to]));
        payoffs[k].push_back(u);
      }
    });
    return NormalFormGame(counts_, std::move(payoffs));
  }

 private:
  std::vector<std::size_t> counts_;
  std::vector<PolymatrixEdge> edges_;
};

/// Immutable, cheaply copyable handle over either game representation.
class Game {
 public:
  using Variant = std::variant<NormalFormGame, PolymatrixGame>;

  Game(NormalFormGame g) : impl_(std::make_shared<const Variant>(std::move(g))) {}
  Game(PolymatrixGame g) : impl_(std::make_shared<const Variant>(std::move(g))) {}

  const Variant& variant() const { return *impl_; }
  const NormalFormGame* normal_form() const { return std::get_if<NormalFormGame>(impl_.get()); }
  const PolymatrixGame* polymatrix() const { return std::get_if<PolymatrixGame>(impl_.get()); }

  std::size_t player_count() const { return action_counts().size(); }
  const std::vector<std::size_t>& action_counts() const {
    return std::visit([](const auto& g) -> const std::vector<std::size_t>& { return g.action_counts(); }, *impl_);
  }

  /// All reward vectors at x, written into `out` (same layout as x).
  void rewards(const BlockVector& x, BlockVector& out) const {
    detail::check_layout(action_counts(), x.action_counts());
    if (!out.same_layout(x)) out = BlockVector(x.action_counts());
    std::vector<std::size_t> offsets(x.player_count());
    for (std::size_t k = 0; k < offsets.size(); ++k) offsets[k] = x.offset(k);
    std::visit([&](const auto& g) { g.rewards(x.flat(), offsets, out); }, *impl_);
  }

  BlockVector rewards(const BlockVector& x) const {
    BlockVector out(x.action_counts());
    rewards(x, out);
    return out;
  }

 private:
  std::shared_ptr<const Variant> impl_;
};

/// A game seen through the entropic perturbation r^H = r - T (ln x + 1).
struct PerturbedGameView {
  PerturbedGameView(Game g, TemperatureVector t) : base(std::move(g)), temperatures(std::move(t)) {
    if (temperatures.size() != base.player_count()) throw ShapeError("one temperature per player required");
    if (!temperatures.all_positive()) throw DomainError("perturbed game needs strictly positive temperatures");
  }
  Game base;
  TemperatureVector temperatures;
};

inline BlockVector all_rewards(const Game& game, const StrategyProfile& x) { return game.rewards(x.blocks()); }

inline std::vector<double> reward_vector(const Game& game, const StrategyProfile& x, std::size_t k) {
  if (k >= game.player_count()) throw ShapeError("player index out of range");
  const auto r = game.rewards(x.blocks());
  return {r[k].begin(), r[k].end()};
}

inline double payoff(const Game& game, const StrategyProfile& x, std::size_t k) {
  const auto r = reward_vector(game, x, k);
  return dot(x[k], r);
}

inline double social_welfare(const Game& game, const StrategyProfile& x) {
  const auto r = game.rewards(x.blocks());
  double sw = 0.0;
  for (std::size_t k = 0; k < x.player_count(); ++k) sw += dot(x[k], r[k]);
  return sw;
}

/// r_k(x) - T_k (ln x_k + 1). Requires a strictly interior block for player k.
inline std::vector<double> perturbed_reward(const Game& game, const StrategyProfile& x, std::size_t k, double temperature) {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw DomainError("temperature must be finite and >= 0");
  auto r = reward_vector(game, x, k);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(x[k][i] > 0.0)) throw DomainError("perturbed reward needs an interior strategy (log of zero)");
    r[i] -= temperature * (std::log(x[k][i]) + 1.0);
  }
  return r;
}

inline std::vector<double> perturbed_reward(const PerturbedGameView& view, const StrategyProfile& x, std::size_t k) {
  return perturbed_reward(view.base, x, k, view.temperatures[k]);
}

inline BlockVector all_perturbed_rewards(const PerturbedGameView& view, const StrategyProfile& x) {
  auto r = view.base.rewards(x.blocks());
  for (std::size_t k = 0; k < x.player_count(); ++k)
    for (std::size_t i = 0; i < x.action_count(k); ++i) {
      if (!(x[k][i] > 0.0)) throw DomainError("perturbed reward needs an interior strategy (log of zero)");
      r[k][i] -= view.temperatures[k] * (std::log(x[k][i]) + 1.0);
    }
  return r;
}

/// F(x; w) = (-w_k r_k(x))_k, concatenated. Weights default to all ones.
inline BlockVector pseudo_gradient(const Game& game, const StrategyProfile& x,
                                   const std::optional<WeightVector>& w = std::nullopt) {
  auto f = game.rewards(x.blocks());
  if (w && w->size() != x.player_count()) throw ShapeError("one weight per player required");
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    const double wk = w ? (*w)[k] : 1.0;
    for (double& v : f[k]) v = -wk * v;
  }
  return f;
}

inline BlockVector pseudo_gradient(const PerturbedGameView& view, const StrategyProfile& x,
                                   const std::optional<WeightVector>& w = std::nullopt) {
  auto f = all_perturbed_rewards(view, x);
  if (w && w->size() != x.player_count()) throw ShapeError("one weight per player required");
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    const double wk = w ? (*w)[k] : 1.0;
    for (double& v : f[k]) v = -wk * v;
  }
  return f;
}

inline double influence_bound(const Game& game) {
  return std::visit([](const auto& g) { return g.influence_bound(); }, game.variant());
}

/// Exploration threshold delta * (N - 1); temperatures above it guarantee convergence.
inline double exploration_threshold(const Game& game) {
  return influence_bound(game) * static_cast<double>(game.player_count() - 1);
}

inline NormalFormGame to_normal_form(const Game& game) {
  if (const auto* nf = game.normal_form()) return *nf;
  return game.polymatrix()->to_normal_form();
}

/// max over pure joint profiles of |SW(s)|; normalizer for welfare comparisons across games.
inline double max_abs_pure_welfare(const Game& game) {
  const auto nf = to_normal_form(game);
  double m = 0.0;
  for (std::size_t idx = 0; idx < nf.profile_count(); ++idx) {
    double sw = 0.0;
    for (std::size_t k = 0; k < nf.player_count(); ++k) sw += nf.tensor(k)[idx];
    m = std::max(m, std::abs(sw));
  }
  return m;
}

}  // namespace smoothql
