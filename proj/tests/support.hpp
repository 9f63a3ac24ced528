#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "smoothql/game.hpp"
#include "smoothql/random.hpp"
#include "smoothql/zoo.hpp"

// Independent reference computations. None of these call the library's
// contraction, softmax or solver code.
namespace oracle {

using smoothql::NormalFormGame;
using smoothql::StrategyProfile;

/// Decodes a row-major flat index into one action per player (player 0 slowest).
inline std::vector<std::size_t> decode(std::size_t flat, const std::vector<std::size_t>& counts) {
  std::vector<std::size_t> s(counts.size());
  for (std::size_t k = counts.size(); k-- > 0;) {
    s[k] = flat % counts[k];
    flat /= counts[k];
  }
  return s;
}

inline std::size_t profile_count(const std::vector<std::size_t>& counts) {
  std::size_t n = 1;
  for (auto c : counts) n *= c;
  return n;
}

/// r_k,i(x) = sum over joint profiles with s_k = i of u_k(s) prod_{l != k} x_l(s_l).
inline std::vector<std::vector<double>> rewards(const NormalFormGame& g, const std::vector<std::vector<double>>& x) {
  const auto& counts = g.action_counts();
  std::vector<std::vector<double>> r(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) r[k].assign(counts[k], 0.0);
  for (std::size_t f = 0; f < profile_count(counts); ++f) {
    const auto s = decode(f, counts);
    for (std::size_t k = 0; k < counts.size(); ++k) {
      double p = g.tensor(k)[f];
      for (std::size_t l = 0; l < counts.size(); ++l)
        if (l != k) p *= x[l][s[l]];
      r[k][s[k]] += p;
    }
  }
  return r;
}

/// Expected utility E_{s ~ x}[u_k(s)] by enumeration; x need not be normalized.
inline double expected_utility(const NormalFormGame& g, const std::vector<std::vector<double>>& x, std::size_t k) {
  const auto& counts = g.action_counts();
  double u = 0.0;
  for (std::size_t f = 0; f < profile_count(counts); ++f) {
    const auto s = decode(f, counts);
    double p = g.tensor(k)[f];
    for (std::size_t l = 0; l < counts.size(); ++l) p *= x[l][s[l]];
    u += p;
  }
  return u;
}

/// softmax(y / T) in long double, no max shift.
inline std::vector<double> softmax(const std::vector<double>& y, double t) {
  long double z = 0.0L;
  std::vector<long double> e(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z += e[i] = std::exp(static_cast<long double>(y[i]) / t);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = static_cast<double>(e[i] / z);
  return out;
}

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Logit equilibrium of a 2x2 bimatrix game by bisection on the first player's
/// probability p of action 0. a, b are the two players' 2x2 payoff matrices.
/// Returns {p, q}.
inline std::pair<double, double> qre_2x2(const double a[2][2], const double b[2][2], double t) {
  auto q_of = [&](double p) {
    const double d = (p * b[0][0] + (1 - p) * b[1][0]) - (p * b[0][1] + (1 - p) * b[1][1]);
    return logistic(d / t);
  };
  auto g = [&](double p) {
    const double q = q_of(p);
    const double d = (q * a[0][0] + (1 - q) * a[0][1]) - (q * a[1][0] + (1 - q) * a[1][1]);
    return p - logistic(d / t);
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? hi : lo) = mid;
  }
  const double p = 0.5 * (lo + hi);
  return {p, q_of(p)};
}

/// max over players and pure deviations of u_k(a, x_-k) - u_k(x), by enumeration.
inline double equilibrium_gap(const NormalFormGame& g, const std::vector<std::vector<double>>& x) {
  double gap = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double base = expected_utility(g, x, k);
    for (std::size_t a = 0; a < x[k].size(); ++a) {
      auto y = x;
      std::fill(y[k].begin(), y[k].end(), 0.0);
      y[k][a] = 1.0;
      gap = std::max(gap, expected_utility(g, y, k) - base);
    }
  }
  return gap;
}

/// KL(p || q) per block, summed, in long double.
inline double kl(const std::vector<std::vector<double>>& p, const std::vector<std::vector<double>>& q) {
  long double s = 0.0L;
  for (std::size_t k = 0; k < p.size(); ++k)
    for (std::size_t i = 0; i < p[k].size(); ++i)
      if (p[k][i] > 0) s += p[k][i] * std::log(static_cast<long double>(p[k][i]) / q[k][i]);
  return static_cast<double>(s);
}

/// Classical fixed-step RK4 on a plain vector field, without any simplex clamping.
inline std::vector<double> rk4(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                               std::vector<double> x, double h, std::size_t steps) {
  auto axpy = [](const std::vector<double>& a, double c, const std::vector<double>& b) {
    std::vector<double> o(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i] + c * b[i];
    return o;
  };
  for (std::size_t s = 0; s < steps; ++s) {
    const auto k1 = f(x), k2 = f(axpy(x, h / 2, k1)), k3 = f(axpy(x, h / 2, k2)), k4 = f(axpy(x, h, k3));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return x;
}

}  // namespace oracle

namespace fixtures {

inline std::vector<smoothql::Game> random_games() {
  using namespace smoothql;
  return {random_normal_form({2, 2, -1, 1, 11}), random_normal_form({2, 3, -1, 1, 12}),
          random_normal_form({3, 2, -2, 2, 13}), random_normal_form({3, 3, -1, 1, 14}),
          random_normal_form({4, 2, 0, 5, 15})};
}

}  // namespace fixtures
