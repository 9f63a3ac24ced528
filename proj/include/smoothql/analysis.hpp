#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smoothql/dynamics.hpp"
#include "smoothql/equilibrium.hpp"
#include "smoothql/game.hpp"
#include "smoothql/random.hpp"
#include "smoothql/regularizer.hpp"

namespace smoothql {

namespace detail {

inline WeightVector weights_or_ones(const std::optional<WeightVector>& w, std::size_t n) {
  if (!w) return WeightVector::ones(n);
  if (w->size() != n) throw ShapeError("one weight per player required");
  return *w;
}

inline void check_same_layout(const StrategyProfile& x, const StrategyProfile& y) {
  if (x.action_counts() != y.action_counts()) throw ShapeError("profiles have different layouts");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Divergences and Lyapunov monitors

/// sum_k w_k KL(x_k || y_k), with 0 ln 0 = 0. Returns +infinity when some
/// y_ki = 0 while x_ki > 0.
inline double weighted_kl(const StrategyProfile& x, const StrategyProfile& y,
                          const std::optional<WeightVector>& w = std::nullopt) {
  detail::check_same_layout(x, y);
  const auto wv = detail::weights_or_ones(w, x.player_count());
  double total = 0.0;
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.action_count(k); ++i) {
      const double a = x[k][i], b = y[k][i];
      if (a == 0.0) continue;
      if (b == 0.0) return std::numeric_limits<double>::infinity();
      d += a * std::log(a / b);
    }
    total += wv[k] * d;
  }
  return total;
}

/// sum_k w_k [ h_k(y_k) - h_k(x_k) - <grad h_k(x_k), y_k - x_k> ].
/// For the entropic regularizer this equals weighted_kl(y, x, w).
template <Regularizer Reg>
double bregman_divergence(const StrategyProfile& x, const StrategyProfile& y, const Reg& reg,
                          const std::optional<WeightVector>& w = std::nullopt) {
  detail::check_same_layout(x, y);
  const auto wv = detail::weights_or_ones(w, x.player_count());
  double total = 0.0;
  std::vector<double> grad;
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    grad.assign(x.action_count(k), 0.0);
    reg.gradient(k, x[k], grad);
    double lin = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) lin += grad[i] * (y[k][i] - x[k][i]);
    total += wv[k] * (reg.value(k, y[k]) - reg.value(k, x[k]) - lin);
  }
  return total;
}

/// sum_k w_k [ h_k(x_k) + h*_k(y_k) - <x_k, y_k> ], nonnegative by Fenchel-Young.
template <Regularizer Reg>
double fenchel_coupling(const StrategyProfile& x, const BlockVector& y, const Reg& reg,
                        const std::optional<WeightVector>& w = std::nullopt) {
  if (x.action_counts() != y.action_counts()) throw ShapeError("profile and payoff state layouts differ");
  if (!y.all_finite()) throw DomainError("payoff state must be finite");
  const auto wv = detail::weights_or_ones(w, x.player_count());
  double total = 0.0;
  for (std::size_t k = 0; k < x.player_count(); ++k)
    total += wv[k] * (reg.value(k, x[k]) + reg.conjugate(k, y[k]) - dot(x[k], y[k]));
  return total;
}

/// weighted_kl(reference || x(t_i)) at every recorded sample.
inline std::vector<double> kl_series(const Trajectory& traj, const StrategyProfile& reference,
                                     const std::optional<WeightVector>& w = std::nullopt) {
  std::vector<double> out;
  out.reserve(traj.size());
  for (const auto& x : traj.profiles) out.push_back(weighted_kl(reference, x, w));
  return out;
}

/// <x - y, F(x; w) - F(y; w)> for the base game.
inline double monotonicity_inner_product(const Game& game, const StrategyProfile& x, const StrategyProfile& y,
                                         const std::optional<WeightVector>& w = std::nullopt) {
  detail::check_same_layout(x, y);
  const auto fx = pseudo_gradient(game, x, w);
  const auto fy = pseudo_gradient(game, y, w);
  double s = 0.0;
  for (std::size_t i = 0; i < fx.size(); ++i) s += (x.flat()[i] - y.flat()[i]) * (fx.flat()[i] - fy.flat()[i]);
  return s;
}

inline double monotonicity_inner_product(const PerturbedGameView& view, const StrategyProfile& x,
                                         const StrategyProfile& y,
                                         const std::optional<WeightVector>& w = std::nullopt) {
  detail::check_same_layout(x, y);
  const auto fx = pseudo_gradient(view, x, w);
  const auto fy = pseudo_gradient(view, y, w);
  double s = 0.0;
  for (std::size_t i = 0; i < fx.size(); ++i) s += (x.flat()[i] - y.flat()[i]) * (fx.flat()[i] - fy.flat()[i]);
  return s;
}

/// Perturbed-game monotonicity split into the base term plus the entropic term
/// sum_k w_k T_k <x_k - y_k, ln x_k - ln y_k>.
inline double perturbed_monotonicity_margin(const Game& game, const StrategyProfile& x, const StrategyProfile& y,
                                            const std::optional<WeightVector>& w, const TemperatureVector& t) {
  detail::check_same_layout(x, y);
  if (!x.is_interior() || !y.is_interior()) throw DomainError("perturbed margin needs interior profiles");
  if (t.size() != x.player_count()) throw ShapeError("one temperature per player required");
  const auto wv = detail::weights_or_ones(w, x.player_count());
  double entropic = 0.0;
  for (std::size_t k = 0; k < x.player_count(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.action_count(k); ++i)
      s += (x[k][i] - y[k][i]) * (std::log(x[k][i]) - std::log(y[k][i]));
    entropic += wv[k] * t[k] * s;
  }
  return monotonicity_inner_product(game, x, y, wv) + entropic;
}

/// -( <x - xbar, F(x;w) - F(xbar;w)> + <x - xbar, F(xbar;w)> ): the time derivative of the
/// weighted Fenchel coupling / Bregman divergence to xbar along FTRL at state x.
inline double lyapunov_rate(const Game& game, const StrategyProfile& x, const StrategyProfile& xbar,
                            const std::optional<WeightVector>& w = std::nullopt) {
  detail::check_same_layout(x, xbar);
  const auto fbar = pseudo_gradient(game, xbar, w);
  double linear = 0.0;
  for (std::size_t i = 0; i < fbar.size(); ++i) linear += (x.flat()[i] - xbar.flat()[i]) * fbar.flat()[i];
  return -(monotonicity_inner_product(game, x, xbar, w) + linear);
}

// ---------------------------------------------------------------------------
// Monotonicity certificates

enum class Verdict { weighted_monotone, weighted_strictly_monotone, not_monotone, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::weighted_monotone: return "weighted_monotone";
    case Verdict::weighted_strictly_monotone: return "weighted_strictly_monotone";
    case Verdict::not_monotone: return "not_monotone";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

inline bool is_monotone(Verdict v) {
  return v == Verdict::weighted_monotone || v == Verdict::weighted_strictly_monotone;
}

enum class CertificateMethod { exact_polymatrix, sampled };

struct MonotonicityReport {
  Verdict verdict = Verdict::inconclusive;
  WeightVector weights;
  CertificateMethod method = CertificateMethod::exact_polymatrix;
  /// Minimal projected eigenvalue (exact) or minimal sampled inner product (sampled).
  double certificate = 0.0;
  /// Pair (x, y) with <x - y, F(x;w) - F(y;w)> < 0 when the verdict is not_monotone.
  std::optional<std::pair<StrategyProfile, StrategyProfile>> witness;
  std::size_t sample_count = 0;
};

inline constexpr double kEigenZeroBand = 1e-10;
inline constexpr double kSampledViolation = 1e-9;

namespace detail {

/// Orthonormal basis (Helmert columns) of the product of simplex tangent spaces.
inline Eigen::MatrixXd tangent_basis(const std::vector<std::size_t>& counts) {
  std::size_t rows = 0, cols = 0;
  for (auto n : counts) {
    rows += n;
    cols += n - 1;
  }
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t r0 = 0, c0 = 0;
  for (auto n : counts) {
    for (std::size_t j = 1; j < n; ++j) {
      const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
      for (std::size_t i = 0; i < j; ++i)
        u(static_cast<Eigen::Index>(r0 + i), static_cast<Eigen::Index>(c0 + j - 1)) = 1.0 / norm;
      u(static_cast<Eigen::Index>(r0 + j), static_cast<Eigen::Index>(c0 + j - 1)) = -static_cast<double>(j) / norm;
    }
    r0 += n;
    c0 += n - 1;
  }
  return u;
}

inline MonotonicityReport exact_report(const PolymatrixGame& game, const WeightVector& w) {
  const auto& counts = game.action_counts();
  std::vector<Eigen::Index> off(counts.size() + 1, 0);
  for (std::size_t k = 0; k < counts.size(); ++k) off[k + 1] = off[k] + static_cast<Eigen::Index>(counts[k]);
  const Eigen::Index dim = off.back();

  // F(x; w) = -W M x, so <d, F(x;w) - F(y;w)> = d' S d with S = -(W M + M' W) / 2.
  Eigen::MatrixXd wm = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& e : game.edges())
    wm.block(off[e.from], off[e.to], e.matrix.rows(), e.matrix.cols()) += w[e.from] * e.matrix;
  const Eigen::MatrixXd s = -0.5 * (wm + wm.transpose());
  const Eigen::MatrixXd u = tangent_basis(counts);
  const Eigen::MatrixXd projected = u.transpose() * s * u;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(projected);
  const double lambda = eig.eigenvalues()(0);

  MonotonicityReport rep;
  rep.weights = w;
  rep.method = CertificateMethod::exact_polymatrix;
  rep.certificate = lambda;
  if (lambda > kEigenZeroBand) {
    rep.verdict = Verdict::weighted_strictly_monotone;
  } else if (lambda >= -kEigenZeroBand) {
    rep.verdict = Verdict::weighted_monotone;
  } else {
    rep.verdict = Verdict::not_monotone;
    const Eigen::VectorXd d = u * eig.eigenvectors().col(0);
    auto centre = StrategyProfile::uniform(counts);
    double scale = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < dim; ++i)
      if (std::abs(d(i)) > 1e-15) scale = std::min(scale, 0.5 * centre.flat()[static_cast<std::size_t>(i)] / std::abs(d(i)));
    BlockVector a(counts), b(counts);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      a.flat()[idx] = centre.flat()[idx] + scale * d(i);
      b.flat()[idx] = centre.flat()[idx] - scale * d(i);
    }
    rep.witness.emplace(StrategyProfile(std::move(a)), StrategyProfile(std::move(b)));
  }
  return rep;
}

inline int verdict_rank(Verdict v) {
  switch (v) {
    case Verdict::weighted_strictly_monotone: return 2;
    case Verdict::weighted_monotone: return 1;
    default: return 0;
  }
}

}  // namespace detail

/// Exact certificate for a polymatrix game: the minimal eigenvalue of the
/// symmetrized weighted operator restricted to the simplex tangent space.
inline MonotonicityReport monotonicity_exact_polymatrix(const PolymatrixGame& game, const WeightVector& w) {
  if (w.size() != game.player_count()) throw ShapeError("one weight per player required");
  return detail::exact_report(game, w);
}

/// Without weights: all-ones first, then (for N <= 4) the grid {1/4, 1/2, 1, 2, 4}^N
/// with w_0 = 1 fixed (the verdict is invariant under a common rescaling).
inline MonotonicityReport monotonicity_exact_polymatrix(const PolymatrixGame& game) {
  const std::size_t n = game.player_count();
  auto best = detail::exact_report(game, WeightVector::ones(n));
  if (best.verdict == Verdict::weighted_strictly_monotone || n > 4) return best;
  static constexpr double grid[] = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<std::size_t> idx(n - 1, 0);
  while (true) {
    std::vector<double> w{1.0};
    for (auto i : idx) w.push_back(grid[i]);
    auto rep = detail::exact_report(game, WeightVector(w));
    const int r = detail::verdict_rank(rep.verdict), rb = detail::verdict_rank(best.verdict);
    if (r > rb || (r == rb && r == 0 && rep.certificate > best.certificate)) best = std::move(rep);
    if (best.verdict == Verdict::weighted_strictly_monotone) return best;
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == std::size(grid)) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  return best;
}

namespace detail {

template <class InnerProduct>
MonotonicityReport sampled_report(const std::vector<std::size_t>& counts, const WeightVector& w,
                                  std::size_t pair_count, std::uint64_t seed, InnerProduct&& inner) {
  SplitMix64 rng(seed);
  MonotonicityReport rep;
  rep.weights = w;
  rep.method = CertificateMethod::sampled;
  rep.sample_count = pair_count;
  rep.certificate = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < pair_count; ++s) {
    auto x = random_interior_profile(counts, rng);
    auto y = random_interior_profile(counts, rng);
    const double v = inner(x, y);
    if (v < rep.certificate) {
      rep.certificate = v;
      if (v < -kSampledViolation) rep.witness.emplace(std::move(x), std::move(y));
    }
  }
  rep.verdict = rep.certificate < -kSampledViolation ? Verdict::not_monotone : Verdict::inconclusive;
  if (rep.verdict == Verdict::inconclusive) rep.witness.reset();
  return rep;
}

}  // namespace detail

/// Refutation-only check of weighted monotonicity on seeded random interior pairs.
inline MonotonicityReport monotonicity_sampled(const Game& game, const std::optional<WeightVector>& w,
                                               std::size_t pair_count, std::uint64_t seed) {
  const auto wv = detail::weights_or_ones(w, game.player_count());
  return detail::sampled_report(game.action_counts(), wv, pair_count, seed,
                                [&](const auto& x, const auto& y) { return monotonicity_inner_product(game, x, y, wv); });
}

inline MonotonicityReport monotonicity_sampled(const PerturbedGameView& view, const std::optional<WeightVector>& w,
                                               std::size_t pair_count, std::uint64_t seed) {
  const auto wv = detail::weights_or_ones(w, view.base.player_count());
  return detail::sampled_report(view.base.action_counts(), wv, pair_count, seed, [&](const auto& x, const auto& y) {
    return perturbed_monotonicity_margin(view.base, x, y, wv, view.temperatures);
  });
}

// ---------------------------------------------------------------------------
// Regret and welfare along trajectories

/// Per-sample payoff bookkeeping shared by the regret and welfare reports.
struct PayoffSeries {
  std::vector<double> times;
  std::vector<double> social_welfare;
  std::vector<double> running_tsw;
  /// regret[k][i] = R_k(t_i)
  std::vector<std::vector<double>> regret;
};

/// Trapezoidal accumulation of SW, realized payoffs and per-action rewards.
inline PayoffSeries payoff_series(const Trajectory& traj, const Game& game) {
  if (traj.empty()) throw std::invalid_argument("empty trajectory");
  const std::size_t N = game.player_count();
  PayoffSeries out;
  out.times = traj.times;
  out.regret.assign(N, {});
  BlockVector r_prev, r;
  std::vector<double> realized_prev(N), realized(N);
  BlockVector action_integral(game.action_counts());
  std::vector<double> realized_integral(N, 0.0);
  double sw_integral = 0.0;
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const auto& x = traj.profiles[s];
    detail::check_layout(game.action_counts(), x.action_counts());
    game.rewards(x.blocks(), r);
    double sw = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      realized[k] = dot(x[k], r[k]);
      sw += realized[k];
    }
    if (s > 0) {
      const double h = traj.times[s] - traj.times[s - 1];
      sw_integral += 0.5 * h * (out.social_welfare.back() + sw);
      for (std::size_t k = 0; k < N; ++k) {
        realized_integral[k] += 0.5 * h * (realized_prev[k] + realized[k]);
        for (std::size_t i = 0; i < r[k].size(); ++i) action_integral[k][i] += 0.5 * h * (r_prev[k][i] + r[k][i]);
      }
    }
    out.social_welfare.push_back(sw);
    const double elapsed = traj.times[s] - traj.times.front();
    out.running_tsw.push_back(elapsed > 0.0 ? sw_integral / elapsed : sw);
    for (std::size_t k = 0; k < N; ++k) {
      const double best = *std::max_element(action_integral[k].begin(), action_integral[k].end());
      out.regret[k].push_back(best - realized_integral[k]);
    }
    r_prev = r;
    realized_prev = realized;
  }
  return out;
}

/// R_k(t_end): best fixed action in hindsight minus realized cumulative payoff.
inline double regret(const Trajectory& traj, const Game& game, std::size_t k) {
  if (k >= game.player_count()) throw ShapeError("player index out of range");
  return payoff_series(traj, game).regret[k].back();
}

/// mu(t_end) = (1 / t) * integral of x(s) ds (trapezoidal).
inline StrategyProfile time_average(const Trajectory& traj) {
  if (traj.empty()) throw std::invalid_argument("empty trajectory");
  if (traj.size() == 1 || traj.duration() <= 0.0) return traj.profiles.front();
  BlockVector acc(traj.profiles.front().action_counts());
  for (std::size_t s = 1; s < traj.size(); ++s) {
    const double h = traj.times[s] - traj.times[s - 1];
    const auto a = traj.profiles[s - 1].flat(), b = traj.profiles[s].flat();
    for (std::size_t i = 0; i < acc.size(); ++i) acc.flat()[i] += 0.5 * h * (a[i] + b[i]);
  }
  for (double& v : acc.flat()) v /= traj.duration();
  return StrategyProfile(std::move(acc));
}

/// Finite-horizon time-averaged social welfare.
inline double tsw(const Trajectory& traj, const Game& game) { return payoff_series(traj, game).running_tsw.back(); }

/// Least-squares slope of `values` against `times` over the last `fraction` of samples.
inline double tail_slope(const std::vector<double>& times, const std::vector<double>& values, double fraction = 0.2) {
  if (times.size() != values.size()) throw ShapeError("tail_slope: size mismatch");
  const std::size_t n = times.size();
  const auto count = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  if (n < 2) return 0.0;
  const std::size_t start = n - std::min(count, n);
  double mt = 0.0, mv = 0.0;
  for (std::size_t i = start; i < n; ++i) {
    mt += times[i];
    mv += values[i];
  }
  const double m = static_cast<double>(n - start);
  mt /= m;
  mv /= m;
  double num = 0.0, den = 0.0;
  for (std::size_t i = start; i < n; ++i) {
    num += (times[i] - mt) * (values[i] - mv);
    den += (times[i] - mt) * (times[i] - mt);
  }
  return den > 0.0 ? num / den : 0.0;
}

struct WelfareReport {
  double tsw = 0.0;
  double sw_at_equilibrium = 0.0;
  double normalized_tsw = 0.0;
  std::vector<double> regret;
  StrategyProfile time_average;
  /// Slope of the running TSW over the last 20% of samples; near zero once settled.
  double tsw_tail_slope = 0.0;
};

inline WelfareReport welfare_report(const Trajectory& traj, const Game& game, const StrategyProfile& equilibrium) {
  const auto series = payoff_series(traj, game);
  WelfareReport rep;
  rep.tsw = series.running_tsw.back();
  rep.sw_at_equilibrium = social_welfare(game, equilibrium);
  const double norm = max_abs_pure_welfare(game);
  rep.normalized_tsw = norm > 0.0 ? rep.tsw / norm : 0.0;
  for (const auto& r : series.regret) rep.regret.push_back(r.back());
  rep.time_average = time_average(traj);
  rep.tsw_tail_slope = tail_slope(series.times, series.running_tsw);
  return rep;
}

inline WelfareReport welfare_report(const Trajectory& traj, const Game& game, const QreSolution& qre) {
  return welfare_report(traj, game, qre.profile);
}

}  // namespace smoothql
