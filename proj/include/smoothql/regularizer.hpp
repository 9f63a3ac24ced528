#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "smoothql/profile.hpp"

namespace smoothql {

/// Contract for an FTRL regularizer h_k on the simplex, evaluated per player.
template <class R>
concept Regularizer = requires(const R& r, std::size_t k, std::span<const double> in, std::span<double> out) {
  { r.name() } -> std::convertible_to<std::string_view>;
  { r.value(k, in) } -> std::convertible_to<double>;
  { r.gradient(k, in, out) };
  { r.choice(k, in, out) };
  { r.conjugate(k, in) } -> std::convertible_to<double>;
  { r.strong_convexity(k) } -> std::convertible_to<double>;
};

/// softmax(y / T) with max-subtraction.
inline std::vector<double> entropic_choice_map(std::span<const double> y, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw DomainError("choice map needs T > 0");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : y) {
    if (!std::isfinite(v)) throw DomainError("choice map needs finite input");
    m = std::max(m, v);
  }
  std::vector<double> p(y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    p[i] = std::exp((y[i] - m) / temperature);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

/// h_k(x) = s_k * sum_i x_i ln x_i. The per-player scale s_k defaults to 1.
/// With scale s the choice map is softmax(y / s) and h*(y) = s * logsumexp(y / s).
class EntropicRegularizer {
 public:
  EntropicRegularizer() = default;
  explicit EntropicRegularizer(TemperatureVector scales) : scales_(std::move(scales)) {
    if (!scales_.all_positive()) throw DomainError("entropic regularizer scales must be > 0");
  }

  std::string_view name() const { return "entropic"; }

  double scale(std::size_t k) const { return scales_.size() == 0 ? 1.0 : scales_[k]; }

  double value(std::size_t k, std::span<const double> x) const {
    double h = 0.0;
    for (double v : x)
      if (v > 0.0) h += v * std::log(v);
    return scale(k) * h;
  }

  void gradient(std::size_t k, std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(x[i] > 0.0)) throw DomainError("entropic gradient is undefined on the simplex boundary");
      out[i] = scale(k) * (std::log(x[i]) + 1.0);
    }
  }

  void choice(std::size_t k, std::span<const double> y, std::span<double> out) const {
    const auto p = entropic_choice_map(y, scale(k));
    std::copy(p.begin(), p.end(), out.begin());
  }

  double conjugate(std::size_t k, std::span<const double> y) const {
    const double s = scale(k);
    double m = -std::numeric_limits<double>::infinity();
    for (double v : y) m = std::max(m, v / s);
    double acc = 0.0;
    for (double v : y) acc += std::exp(v / s - m);
    return s * (m + std::log(acc));
  }

  /// Strong convexity modulus on the simplex (Pinsker, l1 norm; also a valid l2 bound).
  double strong_convexity(std::size_t k) const { return scale(k); }

  /// Lipschitz constant of the gradient on {x : x_i >= floor}; unbounded as floor -> 0 (steepness).
  double gradient_lipschitz(std::size_t k, double floor) const { return scale(k) / floor; }

 private:
  TemperatureVector scales_;
};

static_assert(Regularizer<EntropicRegularizer>);

}  // namespace smoothql
