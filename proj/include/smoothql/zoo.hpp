#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "smoothql/game.hpp"
#include "smoothql/random.hpp"

namespace smoothql {

inline Eigen::MatrixXd random_matrix(std::size_t rows, std::size_t cols, SplitMix64& rng, double lo = -1.0,
                                     double hi = 1.0) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

/// Three players on a directed cycle, u_k = x_k A x_{k-1} with A = [[0, 1], [M, 0]].
inline PolymatrixGame mismatching_pennies(double m) {
  if (!(m >= 1.0) || !std::isfinite(m)) throw ParameterError("mismatching pennies needs M >= 1");
  Eigen::MatrixXd a(2, 2);
  a << 0.0, 1.0, m, 0.0;
  std::vector<PolymatrixEdge> edges;
  for (std::size_t k = 0; k < 3; ++k) edges.push_back({k, (k + 2) % 3, a});
  return PolymatrixGame({2, 2, 2}, std::move(edges));
}

/// Three-player network Shapley game, u_k = x_k A x_{k-1} + x_k B' x_{k+1}.
inline PolymatrixGame shapley_network(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("shapley network needs 0 < beta < 1");
  Eigen::MatrixXd a(3, 3), b(3, 3);
  a << 1.0, 0.0, beta, beta, 1.0, 0.0, 0.0, beta, 1.0;
  b << -beta, 1.0, 0.0, 0.0, -beta, 1.0, 1.0, 0.0, -beta;
  std::vector<PolymatrixEdge> edges;
  for (std::size_t k = 0; k < 3; ++k) {
    edges.push_back({k, (k + 2) % 3, a});
    edges.push_back({k, (k + 1) % 3, b.transpose()});
  }
  return PolymatrixGame({3, 3, 3}, std::move(edges));
}

/// Classical two-player matching pennies (zero-sum, unique interior equilibrium).
inline PolymatrixGame matching_pennies() {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, -1.0, -1.0, 1.0;
  return PolymatrixGame({2, 2}, {{0, 1, a}, {1, 0, -a.transpose()}});
}

/// Two-player pure coordination game with identity payoffs.
inline PolymatrixGame coordination_game(std::size_t n = 2) {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  return PolymatrixGame({n, n}, {{0, 1, id}, {1, 0, id}});
}

/// Every player receives `value` at every pure profile.
inline NormalFormGame constant_game(std::size_t players, std::size_t actions, double value = 0.0) {
  std::vector<std::size_t> counts(players, actions);
  std::size_t profiles = 1;
  for (auto n : counts) profiles *= n;
  return NormalFormGame(counts, std::vector<std::vector<double>>(players, std::vector<double>(profiles, value)));
}

struct RandomGameSpec {
  std::size_t players = 2;
  std::size_t actions = 2;
  double lo = -1.0;
  double hi = 1.0;
  std::uint64_t seed = 0;
};

/// i.i.d. uniform payoffs on [lo, hi], drawn player by player in tensor order.
inline NormalFormGame random_normal_form(const RandomGameSpec& spec) {
  if (!(spec.lo < spec.hi)) throw ParameterError("random game needs lo < hi");
  if (spec.players < 2 || spec.actions < 2) throw ParameterError("random game needs N >= 2 and n >= 2");
  SplitMix64 rng(spec.seed);
  std::vector<std::size_t> counts(spec.players, spec.actions);
  std::size_t profiles = 1;
  for (auto n : counts) profiles *= n;
  std::vector<std::vector<double>> payoffs(spec.players, std::vector<double>(profiles));
  for (auto& u : payoffs)
    for (double& v : u) v = rng.uniform(spec.lo, spec.hi);
  return NormalFormGame(std::move(counts), std::move(payoffs));
}

namespace detail {

inline std::vector<std::pair<std::size_t, std::size_t>> cycle_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n == 2) return {{0, 1}};
  for (std::size_t k = 0; k < n; ++k) out.emplace_back(k, (k + 1) % n);
  return out;
}

}  // namespace detail

/// Weighted zero-sum polymatrix game on a cycle: random forward matrices and
/// reverse matrices A^{l,k} = -(w_k / w_l) (A^{k,l})' so that sum_k w_k u_k = 0.
inline PolymatrixGame weighted_zero_sum_cycle(std::size_t players, std::size_t actions, std::uint64_t seed,
                                              const WeightVector& w) {
  if (players < 2 || actions < 2) throw ParameterError("weighted zero-sum cycle needs N >= 2 and n >= 2");
  if (w.size() != players) throw ShapeError("one weight per player required");
  SplitMix64 rng(seed);
  std::vector<PolymatrixEdge> edges;
  for (auto [k, l] : detail::cycle_pairs(players)) {
    Eigen::MatrixXd a = random_matrix(actions, actions, rng);
    Eigen::MatrixXd back = -(w[k] / w[l]) * a.transpose();
    edges.push_back({k, l, std::move(a)});
    edges.push_back({l, k, std::move(back)});
  }
  return PolymatrixGame(std::vector<std::size_t>(players, actions), std::move(edges));
}

/// Default weights for generated weighted zero-sum games: w_k = k + 1.
inline WeightVector default_zero_sum_weights(std::size_t players) {
  std::vector<double> w(players);
  for (std::size_t k = 0; k < players; ++k) w[k] = static_cast<double>(k + 1);
  return WeightVector(std::move(w));
}

/// Weighted potential game with a concave potential, realized as a polymatrix game.
///
/// A potential of a finite game is multilinear, so its Hessian has zero diagonal
/// blocks; concavity on the product of simplices then forces every cross block to
/// vanish on the tangent space. The generated cross blocks therefore have the form
/// P = a 1' + 1 c' (symmetric across each edge), plus a linear term b_k per player:
///   U(x) = sum_k <b_k, x_k> + sum_{edges k<l} x_k' P_kl x_l,   u_k = (U-terms of k) / w_k.
struct PotentialGame {
  PolymatrixGame game;
  WeightVector weights;
  std::vector<Eigen::VectorXd> linear;
  std::vector<std::tuple<std::size_t, std::size_t, Eigen::MatrixXd>> cross;

  double potential(const StrategyProfile& x) const {
    detail::check_layout(game.action_counts(), x.action_counts());
    auto vec = [&](std::size_t k) {
      return Eigen::Map<const Eigen::VectorXd>(x[k].data(), static_cast<Eigen::Index>(x[k].size()));
    };
    double u = 0.0;
    for (std::size_t k = 0; k < linear.size(); ++k) u += linear[k].dot(vec(k));
    for (const auto& [k, l, p] : cross) u += vec(k).dot(p * vec(l));
    return u;
  }
};

inline PotentialGame weighted_potential_quadratic(std::size_t players, std::size_t actions, std::uint64_t seed,
                                                  const WeightVector& w) {
  if (players < 2 || actions < 2) throw ParameterError("potential game needs N >= 2 and n >= 2");
  if (w.size() != players) throw ShapeError("one weight per player required");
  SplitMix64 rng(seed);
  const auto n = static_cast<Eigen::Index>(actions);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  std::vector<Eigen::VectorXd> linear;
  std::vector<std::tuple<std::size_t, std::size_t, Eigen::MatrixXd>> cross;
  for (std::size_t k = 0; k < players; ++k) linear.push_back(random_matrix(actions, 1, rng).col(0));

  std::vector<PolymatrixEdge> edges;
  std::vector<bool> linear_placed(players, false);
  for (auto [k, l] : detail::cycle_pairs(players)) {
    const Eigen::VectorXd a = random_matrix(actions, 1, rng).col(0);
    const Eigen::VectorXd c = random_matrix(actions, 1, rng).col(0);
    const Eigen::MatrixXd p = a * ones.transpose() + ones * c.transpose();
    cross.emplace_back(k, l, p);
    Eigen::MatrixXd forward = p;
    Eigen::MatrixXd backward = p.transpose();
    // <b_k, x_k> = x_k' (b_k 1') x_l on any edge leaving k.
    if (!linear_placed[k]) {
      forward += linear[k] * ones.transpose();
      linear_placed[k] = true;
    }
    if (!linear_placed[l]) {
      backward += linear[l] * ones.transpose();
      linear_placed[l] = true;
    }
    edges.push_back({k, l, forward / w[k]});
    edges.push_back({l, k, backward / w[l]});
  }
  return {PolymatrixGame(std::vector<std::size_t>(players, actions), std::move(edges)), w, std::move(linear),
          std::move(cross)};
}

/// A zoo construction plus the weights it certifies against, when it has any.
struct ZooGame {
  std::string name;
  Game game;
  std::optional<WeightVector> weights;
};

namespace detail {

inline std::map<std::string, std::string> parse_params(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParameterError("game parameter '" + item + "' is not key=value");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

inline double number_param(const std::map<std::string, std::string>& p, const std::string& key,
                           std::optional<double> fallback = std::nullopt) {
  const auto it = p.find(key);
  if (it == p.end()) {
    if (fallback) return *fallback;
    throw ParameterError("missing game parameter '" + key + "'");
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParameterError("game parameter '" + key + "' is not a number: " + it->second);
  }
}

inline std::size_t count_param(const std::map<std::string, std::string>& p, const std::string& key,
                               std::optional<double> fallback = std::nullopt) {
  const double v = number_param(p, key, fallback);
  if (v < 0 || v != std::floor(v)) throw ParameterError("game parameter '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline std::optional<WeightVector> weight_param(const std::map<std::string, std::string>& p, std::size_t players) {
  const auto it = p.find("w");
  if (it == p.end()) return std::nullopt;
  std::vector<double> w;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, '/')) {
    try {
      w.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ParameterError("weight '" + item + "' is not a number");
    }
  }
  if (w.size() != players) throw ParameterError("w needs one '/'-separated value per player");
  return WeightVector(std::move(w));
}

}  // namespace detail

/// Builds a game from a selector such as "mismatching:M=3", "shapley:beta=0.5",
/// "random:N=5,n=5,seed=7", "wzs:N=3,n=3,seed=7", "potential:N=3,n=3,seed=7",
/// "zero:N=2,n=2", "constant:N=2,n=2,c=1", "pennies" or "coordination:n=2".
/// Weight lists are written w=1/2/3.
inline ZooGame make_zoo_game(const std::string& selector) {
  const auto colon = selector.find(':');
  const std::string name = selector.substr(0, colon);
  const auto p = detail::parse_params(colon == std::string::npos ? "" : selector.substr(colon + 1));

  if (name == "mismatching") return {selector, mismatching_pennies(detail::number_param(p, "M")), std::nullopt};
  if (name == "shapley") return {selector, shapley_network(detail::number_param(p, "beta")), std::nullopt};
  if (name == "pennies") return {selector, matching_pennies(), WeightVector::ones(2)};
  if (name == "coordination") return {selector, coordination_game(detail::count_param(p, "n", 2)), std::nullopt};
  if (name == "zero" || name == "constant") {
    const double c = name == "zero" ? 0.0 : detail::number_param(p, "c");
    return {selector, constant_game(detail::count_param(p, "N", 2), detail::count_param(p, "n", 2), c), std::nullopt};
  }
  if (name == "random") {
    RandomGameSpec spec;
    spec.players = detail::count_param(p, "N");
    spec.actions = detail::count_param(p, "n");
    spec.seed = detail::count_param(p, "seed", 0);
    spec.lo = detail::number_param(p, "lo", -1.0);
    spec.hi = detail::number_param(p, "hi", 1.0);
    return {selector, random_normal_form(spec), std::nullopt};
  }
  if (name == "wzs" || name == "potential") {
    const auto players = detail::count_param(p, "N");
    const auto actions = detail::count_param(p, "n");
    const auto seed = detail::count_param(p, "seed", 0);
    auto w = detail::weight_param(p, players);
    if (name == "wzs") {
      if (!w) w = default_zero_sum_weights(players);
      return {selector, weighted_zero_sum_cycle(players, actions, seed, *w), w};
    }
    if (!w) w = WeightVector::ones(players);
    return {selector, weighted_potential_quadratic(players, actions, seed, *w).game, w};
  }
  throw ParameterError("unknown game selector '" + selector + "'");
}

}  // namespace smoothql
