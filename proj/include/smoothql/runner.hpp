#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "smoothql/analysis.hpp"
#include "smoothql/dynamics.hpp"
#include "smoothql/equilibrium.hpp"
#include "smoothql/io.hpp"
#include "smoothql/zoo.hpp"

namespace smoothql {

enum class DynamicKind { ql, rd, ftrl };

inline DynamicKind parse_dynamic(const std::string& s) {
  if (s == "ql") return DynamicKind::ql;
  if (s == "rd") return DynamicKind::rd;
  if (s == "ftrl") return DynamicKind::ftrl;
  throw ParseError("unknown dynamic '" + s + "' (expected ql, rd or ftrl)");
}

inline std::string to_string(DynamicKind d) {
  switch (d) {
    case DynamicKind::ql: return "ql";
    case DynamicKind::rd: return "rd";
    case DynamicKind::ftrl: return "ftrl";
  }
  return "ql";
}

struct RunConfig {
  std::string game;
  DynamicKind dynamic = DynamicKind::ql;
  std::vector<double> temperatures{0.1};
  std::size_t init_count = 3;
  std::uint64_t seed = 0;
  std::vector<StrategyProfile> initial_conditions;
  IntegratorConfig integrator;
  std::filesystem::path out_dir = "out";
  std::size_t jobs = 0;
  /// sweep: number of games; member i uses seed + i of a seeded selector.
  std::size_t ensemble = 1;
  std::optional<WeightVector> weights;
  std::size_t pair_count = 10000;
  std::size_t qre_max_iterations = 100000;

  void validate() const {
    for (double t : temperatures)
      if (!(t >= 0.0) || !std::isfinite(t)) throw ParseError("temperatures must be finite and >= 0");
    if (temperatures.empty()) throw ParseError("temperature grid is empty");
    if (initial_conditions.empty() && init_count == 0) throw ParseError("need at least one initial condition");
    if (ensemble == 0) throw ParseError("ensemble size must be >= 1");
    try {
      integrator.validate();
    } catch (const ParameterError& e) {
      throw ParseError(e.what());
    }
  }
};

/// Applies keys of a JSON config document onto `cfg` (flags are applied afterwards by the caller).
inline void apply_config_json(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw ParseError("config: top level must be an object");
  try {
    if (doc.contains("game")) cfg.game = doc["game"].get<std::string>();
    if (doc.contains("dynamic")) cfg.dynamic = parse_dynamic(doc["dynamic"].get<std::string>());
    if (doc.contains("temps")) cfg.temperatures = doc["temps"].get<std::vector<double>>();
    if (doc.contains("inits")) {
      const auto& v = doc["inits"];
      if (v.is_number_unsigned()) {
        cfg.init_count = v.get<std::size_t>();
      } else {
        cfg.initial_conditions.clear();
        for (const auto& p : v) cfg.initial_conditions.emplace_back(p.get<std::vector<std::vector<double>>>());
      }
    }
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("t_end")) cfg.integrator.t_end = doc["t_end"].get<double>();
    if (doc.contains("step")) cfg.integrator.step = doc["step"].get<double>();
    if (doc.contains("stride")) cfg.integrator.record_stride = doc["stride"].get<std::size_t>();
    if (doc.contains("out")) cfg.out_dir = doc["out"].get<std::string>();
    if (doc.contains("jobs")) cfg.jobs = doc["jobs"].get<std::size_t>();
    if (doc.contains("ensemble")) cfg.ensemble = doc["ensemble"].get<std::size_t>();
    if (doc.contains("weights")) cfg.weights = WeightVector(doc["weights"].get<std::vector<double>>());
    if (doc.contains("pairs")) cfg.pair_count = doc["pairs"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("config: ") + e.what());
  } catch (const ParameterError& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  RunConfig cfg;
  try {
    apply_config_json(cfg, json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return cfg;
}

/// Zoo selector, or a path to a game JSON file.
inline ZooGame resolve_game(const std::string& selector) {
  if (selector.empty()) throw ParseError("no game given (--game)");
  if (std::filesystem::exists(selector)) return {selector, load_game_file(selector), std::nullopt};
  try {
    return make_zoo_game(selector);
  } catch (const ParameterError& e) {
    throw ParseError(e.what());
  } catch (const ShapeError& e) {
    throw ParseError(e.what());
  }
}

/// Replaces (or appends) the seed parameter of a zoo selector.
inline std::string selector_with_seed(const std::string& selector, std::uint64_t seed) {
  const auto colon = selector.find(':');
  if (colon == std::string::npos) return selector + ":seed=" + std::to_string(seed);
  const auto params = detail::parse_params(selector.substr(colon + 1));
  std::string out = selector.substr(0, colon + 1);
  bool first = true, placed = false;
  for (const auto& [k, v] : params) {
    out += (first ? "" : ",") + k + "=" + (k == "seed" ? std::to_string(seed) : v);
    placed |= k == "seed";
    first = false;
  }
  if (!placed) out += (first ? "" : ",") + std::string("seed=") + std::to_string(seed);
  return out;
}

inline std::vector<ZooGame> resolve_ensemble(const RunConfig& cfg) {
  std::vector<ZooGame> games{resolve_game(cfg.game)};
  if (cfg.ensemble == 1) return games;
  if (std::filesystem::exists(cfg.game)) throw ParseError("an ensemble needs a seeded zoo selector, not a file");
  const auto colon = cfg.game.find(':');
  const auto params = detail::parse_params(colon == std::string::npos ? "" : cfg.game.substr(colon + 1));
  const std::uint64_t base = params.count("seed") ? std::stoull(params.at("seed")) : 0;
  for (std::size_t i = 1; i < cfg.ensemble; ++i) games.push_back(resolve_game(selector_with_seed(cfg.game, base + i)));
  return games;
}

inline std::vector<StrategyProfile> initial_profiles(const RunConfig& cfg, const Game& game) {
  if (!cfg.initial_conditions.empty()) {
    for (const auto& x : cfg.initial_conditions)
      if (x.action_counts() != game.action_counts()) throw ParseError("initial condition does not match the game");
    return cfg.initial_conditions;
  }
  SplitMix64 rng(cfg.seed);
  std::vector<StrategyProfile> out;
  for (std::size_t i = 0; i < cfg.init_count; ++i) out.push_back(random_interior_profile(game.action_counts(), rng));
  return out;
}

/// One trajectory of the selected dynamic. FTRL uses the unit-scale entropic
/// regularizer on the perturbed rewards, which reproduces Q-learning at T > 0.
inline Trajectory run_dynamic(const Game& game, DynamicKind dynamic, double temperature, const StrategyProfile& x0,
                              const IntegratorConfig& cfg) {
  const auto t = TemperatureVector::constant(game.player_count(), temperature);
  switch (dynamic) {
    case DynamicKind::ql: return simulate_ql(game, x0, t, cfg);
    case DynamicKind::rd: return simulate_replicator(game, x0, cfg);
    case DynamicKind::ftrl: {
      EntropicRegularizer reg;
      FtrlField<EntropicRegularizer> field{game, reg, std::nullopt};
      if (temperature > 0.0) field.perturbation = t;
      return integrate(field, entropic_payoff_state(x0, reg), cfg);
    }
  }
  throw ParseError("unknown dynamic");
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// simulate

struct RunSummary {
  double temperature = 0.0;
  std::size_t init_index = 0;
  StrategyProfile initial_profile;
  std::optional<StrategyProfile> final_profile;
  double endpoint_residual = 0.0;
  std::size_t samples = 0;
  std::optional<WelfareReport> welfare;
  std::vector<double> lyapunov_kl;
  std::string trajectory_file;
  std::string welfare_file;
  std::string error;
};

struct SimulateResult {
  std::vector<RunSummary> runs;
  std::vector<std::optional<QreSolution>> qre;  // per temperature, when T > 0
  json summary;
};

inline json to_json(const RunSummary& r) {
  json doc{{"temperature", r.temperature}, {"init", r.init_index}, {"initial_profile", to_json(r.initial_profile)}};
  if (!r.error.empty()) {
    doc["error"] = r.error;
    return doc;
  }
  doc["final_profile"] = to_json(*r.final_profile);
  doc["endpoint_residual"] = r.endpoint_residual;
  doc["samples"] = r.samples;
  doc["welfare"] = to_json(*r.welfare);
  doc["lyapunov_kl"] = r.lyapunov_kl;
  doc["trajectory_csv"] = r.trajectory_file;
  doc["welfare_csv"] = r.welfare_file;
  return doc;
}

/// One trajectory per (T, x0). Writes trajectory_T<i>_x<j>.csv, welfare_T<i>_x<j>.csv
/// and summary.json into cfg.out_dir. A failing run is recorded and the others proceed.
inline SimulateResult cmd_simulate(const RunConfig& cfg) {
  cfg.validate();
  const auto zoo = resolve_game(cfg.game);
  const Game& game = zoo.game;
  const auto inits = initial_profiles(cfg, game);
  std::filesystem::create_directories(cfg.out_dir);

  SimulateResult result;
  for (double t : cfg.temperatures) {
    if (t > 0.0)
      result.qre.push_back(qre_solve(game, TemperatureVector::constant(game.player_count(), t), std::nullopt,
                                     QreOptions{.max_iterations = cfg.qre_max_iterations}));
    else
      result.qre.emplace_back(std::nullopt);
  }

  const std::size_t runs = cfg.temperatures.size() * inits.size();
  result.runs.resize(runs);
  parallel_for(runs, cfg.jobs, [&](std::size_t r) {
    const std::size_t ti = r / inits.size(), xi = r % inits.size();
    RunSummary& s = result.runs[r];
    s.temperature = cfg.temperatures[ti];
    s.init_index = xi;
    s.initial_profile = inits[xi];
    try {
      const auto traj = run_dynamic(game, cfg.dynamic, s.temperature, inits[xi], cfg.integrator);
      const auto& qre = result.qre[ti];
      s.final_profile = traj.final_profile();
      s.samples = traj.size();
      s.endpoint_residual = s.temperature > 0.0 ? qre_residual(game, traj.final_profile(),
                                                                 TemperatureVector::constant(game.player_count(), s.temperature))
                                                : equilibrium_gap(game, traj.final_profile());
      const StrategyProfile reference = qre ? qre->profile : time_average(traj);
      s.welfare = welfare_report(traj, game, reference);
      s.lyapunov_kl = kl_series(traj, reference);
      const std::string stem = "_T" + std::to_string(ti) + "_x" + std::to_string(xi) + ".csv";
      s.trajectory_file = "trajectory" + stem;
      s.welfare_file = "welfare" + stem;
      std::ofstream tf(cfg.out_dir / s.trajectory_file);
      write_trajectory_csv(tf, traj);
      std::ofstream wf(cfg.out_dir / s.welfare_file);
      write_welfare_series_csv(wf, payoff_series(traj, game));
    } catch (const std::exception& e) {
      s.error = e.what();
    }
  });

  json doc{{"game", zoo.name},
           {"dynamic", to_string(cfg.dynamic)},
           {"influence_bound", influence_bound(game)},
           {"threshold", exploration_threshold(game)},
           {"step", cfg.integrator.step},
           {"t_end", cfg.integrator.t_end},
           {"runs", json::array()},
           {"qre", json::array()}};
  for (std::size_t i = 0; i < cfg.temperatures.size(); ++i)
    doc["qre"].push_back(result.qre[i] ? to_json(*result.qre[i]) : json(nullptr));
  for (const auto& s : result.runs) doc["runs"].push_back(to_json(s));
  std::ofstream(cfg.out_dir / "summary.json") << doc.dump(2) << "\n";
  result.summary = std::move(doc);
  return result;
}

inline bool any_run_failed(const SimulateResult& r) {
  return std::any_of(r.runs.begin(), r.runs.end(), [](const auto& s) { return !s.error.empty(); });
}

// ---------------------------------------------------------------------------
// sweep

/// Mean normalized TSW per (game, T) over the initial conditions; writes sweep.csv.
/// Initial conditions are shared across temperatures (matched starts).
inline std::vector<SweepRow> cmd_sweep(const RunConfig& cfg) {
  cfg.validate();
  const auto games = resolve_ensemble(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  const std::size_t G = games.size(), T = cfg.temperatures.size();

  std::vector<std::vector<StrategyProfile>> inits;
  std::vector<double> normalizer;
  for (const auto& g : games) {
    inits.push_back(initial_profiles(cfg, g.game));
    normalizer.push_back(max_abs_pure_welfare(g.game));
  }
  const std::size_t X = inits.front().size();

  std::vector<double> tsw_values(G * T * X, 0.0);
  std::vector<double> eq_values(G * T, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> errors(G * T * X);

  parallel_for(G * T, cfg.jobs, [&](std::size_t gt) {
    const std::size_t gi = gt / T, ti = gt % T;
    const double temp = cfg.temperatures[ti];
    const auto& game = games[gi].game;
    const double norm = normalizer[gi];
    if (temp > 0.0) {
      const auto q = qre_solve(game, TemperatureVector::constant(game.player_count(), temp), std::nullopt,
                               QreOptions{.max_iterations = cfg.qre_max_iterations});
      eq_values[gt] = norm > 0.0 ? social_welfare(game, q.profile) / norm : 0.0;
    }
    for (std::size_t xi = 0; xi < X; ++xi) {
      const std::size_t idx = gt * X + xi;
      try {
        const auto traj = run_dynamic(game, cfg.dynamic, temp, inits[gi][xi], cfg.integrator);
        const double v = tsw(traj, game);
        tsw_values[idx] = norm > 0.0 ? v / norm : 0.0;
      } catch (const std::exception& e) {
        errors[idx] = e.what();
      }
    }
  });

  std::vector<SweepRow> rows;
  for (std::size_t gi = 0; gi < G; ++gi)
    for (std::size_t ti = 0; ti < T; ++ti) {
      double sum = 0.0;
      std::size_t ok = 0;
      for (std::size_t xi = 0; xi < X; ++xi) {
        const std::size_t idx = (gi * T + ti) * X + xi;
        if (!errors[idx].empty()) continue;
        sum += tsw_values[idx];
        ++ok;
      }
      rows.push_back({gi, cfg.temperatures[ti], ok ? sum / static_cast<double>(ok) : std::nan(""),
                      eq_values[gi * T + ti]});
    }
  std::ofstream out(cfg.out_dir / "sweep.csv");
  write_sweep_csv(out, rows);
  return rows;
}

// ---------------------------------------------------------------------------
// qre / influence / check-monotone

inline json cmd_qre(const Game& game, double temperature, std::size_t max_iterations = 100000) {
  const auto q = qre_solve(game, TemperatureVector::constant(game.player_count(), temperature), std::nullopt,
                           QreOptions{.max_iterations = max_iterations});
  return to_json(q);
}

inline json cmd_influence(const Game& game) {
  return {{"delta", influence_bound(game)},
          {"players", game.player_count()},
          {"threshold", exploration_threshold(game)}};
}

/// Exact certificate for polymatrix games (the sampled check is attached as a
/// cross-check); sampled refutation otherwise. With temperature > 0 the sampled
/// check of the perturbed game is attached as well.
inline json cmd_check_monotone(const ZooGame& zoo, const std::optional<WeightVector>& weights, std::size_t pairs,
                               std::uint64_t seed, std::optional<double> temperature = std::nullopt) {
  const auto w = weights ? weights : zoo.weights;
  json doc;
  if (const auto* pm = zoo.game.polymatrix()) {
    const auto exact = w ? monotonicity_exact_polymatrix(*pm, *w) : monotonicity_exact_polymatrix(*pm);
    doc = to_json(exact);
    doc["sampled_check"] = to_json(monotonicity_sampled(zoo.game, exact.weights, pairs, seed));
  } else {
    doc = to_json(monotonicity_sampled(zoo.game, w, pairs, seed));
  }
  if (temperature && *temperature > 0.0) {
    const PerturbedGameView view(zoo.game, TemperatureVector::constant(zoo.game.player_count(), *temperature));
    doc["perturbed_sampled"] = to_json(monotonicity_sampled(view, w, pairs, seed));
    doc["perturbed_sampled"]["temperature"] = *temperature;
  }
  return doc;
}

}  // namespace smoothql
