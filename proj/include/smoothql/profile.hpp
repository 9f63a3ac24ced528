#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smoothql {

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation (log of zero, T <= 0, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSimplexTolerance = 1e-12;
inline constexpr double kRenormalizeTolerance = 1e-9;

/// Flat storage for one real vector per player. Used for tangent vectors,
/// pseudo-gradients and payoff-space (FTRL) states.
class BlockVector {
 public:
  BlockVector() = default;

  explicit BlockVector(std::vector<std::size_t> counts, double fill = 0.0)
      : counts_(std::move(counts)), offsets_(counts_.size() + 1, 0) {
    for (std::size_t k = 0; k < counts_.size(); ++k) offsets_[k + 1] = offsets_[k] + counts_[k];
    data_.assign(offsets_.back(), fill);
  }

  BlockVector(std::vector<std::size_t> counts, std::vector<double> flat) : BlockVector(std::move(counts)) {
    if (flat.size() != data_.size())
      throw ShapeError("flat vector has " + std::to_string(flat.size()) + " entries, layout needs " +
                       std::to_string(data_.size()));
    data_ = std::move(flat);
  }

  static BlockVector from_nested(const std::vector<std::vector<double>>& blocks) {
    std::vector<std::size_t> counts;
    std::vector<double> flat;
    for (const auto& b : blocks) {
      counts.push_back(b.size());
      flat.insert(flat.end(), b.begin(), b.end());
    }
    return BlockVector(std::move(counts), std::move(flat));
  }

  std::size_t player_count() const { return counts_.size(); }
  std::size_t action_count(std::size_t k) const { return counts_.at(k); }
  const std::vector<std::size_t>& action_counts() const { return counts_; }
  std::size_t offset(std::size_t k) const { return offsets_.at(k); }
  std::size_t size() const { return data_.size(); }

  std::span<const double> operator[](std::size_t k) const {
    return {data_.data() + offsets_[k], counts_[k]};
  }
  std::span<double> operator[](std::size_t k) { return {data_.data() + offsets_[k], counts_[k]}; }

  std::span<const double> flat() const { return data_; }
  std::span<double> flat() { return data_; }

  std::vector<std::vector<double>> nested() const {
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < player_count(); ++k) out.emplace_back((*this)[k].begin(), (*this)[k].end());
    return out;
  }

  bool same_layout(const BlockVector& other) const { return counts_ == other.counts_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> offsets_{0};
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("sup_distance: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// One probability vector per player. Entries are non-negative and each
/// block sums to one within 1e-12; construction renormalizes drift up to 1e-9.
class StrategyProfile {
 public:
  StrategyProfile() = default;

  explicit StrategyProfile(BlockVector probabilities) : p_(std::move(probabilities)) { validate_and_fix(); }

  StrategyProfile(const std::vector<std::vector<double>>& per_player)
      : StrategyProfile(BlockVector::from_nested(per_player)) {}

  static StrategyProfile uniform(const std::vector<std::size_t>& counts) {
    BlockVector b(counts);
    for (std::size_t k = 0; k < counts.size(); ++k)
      for (double& v : b[k]) v = 1.0 / static_cast<double>(counts[k]);
    return StrategyProfile(std::move(b));
  }

  static StrategyProfile pure(const std::vector<std::size_t>& counts, const std::vector<std::size_t>& actions) {
    if (actions.size() != counts.size()) throw ShapeError("pure profile: one action per player required");
    BlockVector b(counts);
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (actions[k] >= counts[k]) throw ShapeError("pure profile: action index out of range");
      b[k][actions[k]] = 1.0;
    }
    return StrategyProfile(std::move(b));
  }

  /// Clamps every entry to at least `floor` and renormalizes each block.
  /// Intended for integrator output; rejects non-finite input.
  static StrategyProfile clamped(BlockVector b, double floor) {
    for (std::size_t k = 0; k < b.player_count(); ++k) {
      double s = 0.0;
      for (double& v : b[k]) {
        if (!std::isfinite(v)) throw DomainError("clamped: non-finite probability");
        v = std::max(v, floor);
        s += v;
      }
      for (double& v : b[k]) v /= s;
    }
    StrategyProfile out;
    out.p_ = std::move(b);
    return out;
  }

  std::size_t player_count() const { return p_.player_count(); }
  std::size_t action_count(std::size_t k) const { return p_.action_count(k); }
  const std::vector<std::size_t>& action_counts() const { return p_.action_counts(); }
  std::span<const double> operator[](std::size_t k) const { return p_[k]; }
  std::span<const double> flat() const { return p_.flat(); }
  const BlockVector& blocks() const { return p_; }
  std::vector<std::vector<double>> nested() const { return p_.nested(); }

  bool is_interior() const {
    for (double v : p_.flat())
      if (!(v > 0.0)) return false;
    return true;
  }

 private:
  void validate_and_fix() {
    if (p_.player_count() == 0) throw ShapeError("strategy profile needs at least one player");
    for (std::size_t k = 0; k < p_.player_count(); ++k) {
      if (p_.action_count(k) == 0) throw ShapeError("player " + std::to_string(k) + " has no actions");
      double s = 0.0;
      for (double v : p_[k]) {
        if (!std::isfinite(v) || v < 0.0)
          throw DomainError("player " + std::to_string(k) + ": probabilities must be finite and non-negative");
        s += v;
      }
      if (std::abs(s - 1.0) > kRenormalizeTolerance)
        throw DomainError("player " + std::to_string(k) + ": probabilities sum to " + std::to_string(s));
      if (std::abs(s - 1.0) > 0.0)
        for (double& v : p_[k]) v /= s;
    }
  }

  BlockVector p_;
};

/// Exploration rates T_k >= 0. Zero selects replicator behaviour for that player.
class TemperatureVector {
 public:
  TemperatureVector() = default;
  explicit TemperatureVector(std::vector<double> t) : t_(std::move(t)) {
    for (double v : t_)
      if (!std::isfinite(v) || v < 0.0) throw ParameterError("temperatures must be finite and >= 0");
  }
  static TemperatureVector constant(std::size_t n, double t) { return TemperatureVector(std::vector<double>(n, t)); }

  std::size_t size() const { return t_.size(); }
  double operator[](std::size_t k) const { return t_.at(k); }
  const std::vector<double>& values() const { return t_; }
  bool all_positive() const {
    for (double v : t_)
      if (!(v > 0.0)) return false;
    return true;
  }
  double min() const { return t_.empty() ? 0.0 : *std::min_element(t_.begin(), t_.end()); }

 private:
  std::vector<double> t_;
};

/// Positive per-player weights for weighted monotonicity and weighted divergences.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> w) : w_(std::move(w)) {
    for (double v : w_)
      if (!std::isfinite(v) || !(v > 0.0)) throw ParameterError("weights must be finite and > 0");
  }
  static WeightVector ones(std::size_t n) { return WeightVector(std::vector<double>(n, 1.0)); }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t k) const { return w_.at(k); }
  const std::vector<double>& values() const { return w_; }
  double min() const { return w_.empty() ? 0.0 : *std::min_element(w_.begin(), w_.end()); }

 private:
  std::vector<double> w_;
};

}  // namespace smoothql
