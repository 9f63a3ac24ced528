#include <iostream>

#include <CLI11.hpp>

#include "smoothql/runner.hpp"

using namespace smoothql;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitNumeric = 3;

std::vector<double> parse_list(const std::string& text, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError("not a number: '" + item + "'");
    }
  }
  return out;
}

struct Flags {
  std::string config, game, dynamic, temps, inits, out, weights;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_end, step;
  std::optional<std::size_t> jobs, stride, ensemble, pairs, max_iter;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (flags override it)");
  cmd->add_option("--game", f.game, "zoo selector (e.g. mismatching:M=3) or game JSON file");
  cmd->add_option("--seed", f.seed, "seed for initial conditions and sampling");
  cmd->add_option("--jobs", f.jobs, "worker threads (default: available cores)");
  cmd->add_option("--out", f.out, "output directory");
}

void add_run(CLI::App* cmd, Flags& f) {
  cmd->add_option("--dynamic", f.dynamic, "ql, rd or ftrl");
  cmd->add_option("--temps", f.temps, "comma-separated temperature grid");
  cmd->add_option("--inits", f.inits,
                  "number of seeded interior starts, or a JSON list of profiles / path to one");
  cmd->add_option("--t-end", f.t_end, "integration horizon");
  cmd->add_option("--step", f.step, "RK4 step size");
  cmd->add_option("--stride", f.stride, "record every stride-th step");
  cmd->add_option("--ensemble", f.ensemble, "sweep: number of games (seed, seed+1, ...)");
  cmd->add_option("--qre-max-iter", f.max_iter, "iteration cap of the equilibrium solver");
}

RunConfig build_config(const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config_file(f.config);
  if (!f.game.empty()) cfg.game = f.game;
  if (!f.dynamic.empty()) cfg.dynamic = parse_dynamic(f.dynamic);
  if (!f.temps.empty()) cfg.temperatures = parse_list(f.temps);
  if (!f.inits.empty()) {
    if (std::all_of(f.inits.begin(), f.inits.end(), ::isdigit)) {
      cfg.init_count = std::stoull(f.inits);
      cfg.initial_conditions.clear();
    } else {
      json doc;
      try {
        if (std::filesystem::exists(f.inits)) {
          std::ifstream in(f.inits);
          doc = json::parse(in);
        } else {
          doc = json::parse(f.inits);
        }
      } catch (const json::parse_error& e) {
        throw ParseError(std::string("--inits: ") + e.what());
      }
      apply_config_json(cfg, json{{"inits", doc}});
    }
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.t_end) cfg.integrator.t_end = *f.t_end;
  if (f.step) cfg.integrator.step = *f.step;
  if (f.stride) cfg.integrator.record_stride = *f.stride;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (f.ensemble) cfg.ensemble = *f.ensemble;
  if (f.pairs) cfg.pair_count = *f.pairs;
  if (f.max_iter) cfg.qre_max_iterations = *f.max_iter;
  if (!f.weights.empty()) cfg.weights = WeightVector(parse_list(f.weights, '/'));
  return cfg;
}

void emit(const json& doc, const std::string& out_dir, const std::string& name) {
  std::cout << doc.dump(2) << "\n";
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);
  std::ofstream(std::filesystem::path(out_dir) / name) << doc.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smooth Q-learning, replicator and FTRL dynamics on finite games"};
  app.require_subcommand(1);
  Flags f;

  auto* simulate = app.add_subcommand("simulate", "one trajectory per (temperature, start)");
  add_common(simulate, f);
  add_run(simulate, f);

  auto* sweep = app.add_subcommand("sweep", "mean normalized TSW per (game, temperature)");
  add_common(sweep, f);
  add_run(sweep, f);

  double qre_temp = 0.1;
  auto* qre = app.add_subcommand("qre", "solve the logit equilibrium");
  add_common(qre, f);
  qre->add_option("--temp,--temps", qre_temp, "temperature (same for every player)");
  qre->add_option("--qre-max-iter", f.max_iter, "iteration cap");

  std::optional<double> mono_temp;
  auto* mono = app.add_subcommand("check-monotone", "weighted monotonicity certificate");
  add_common(mono, f);
  mono->add_option("--weights", f.weights, "player weights, e.g. 1/2/3");
  mono->add_option("--pairs", f.pairs, "sampled pairs");
  mono->add_option("--temp,--temps", mono_temp, "also check the entropy-perturbed game at this temperature");

  auto* influence = app.add_subcommand("influence", "influence bound and exploration threshold");
  add_common(influence, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    if (simulate->parsed()) {
      const auto result = cmd_simulate(build_config(f));
      std::cout << result.summary.dump(2) << "\n";
      return any_run_failed(result) ? kExitNumeric : 0;
    }
    if (sweep->parsed()) {
      const auto cfg = build_config(f);
      const auto rows = cmd_sweep(cfg);
      write_sweep_csv(std::cout, rows);
      for (const auto& r : rows)
        if (!std::isfinite(r.mean_tsw)) return kExitNumeric;
      return 0;
    }
    const auto cfg = build_config(f);
    const auto zoo = resolve_game(cfg.game);
    const std::string out = f.out;
    if (qre->parsed()) {
      if (!(qre_temp > 0.0)) throw ParseError("--temp must be > 0");
      emit(cmd_qre(zoo.game, qre_temp, cfg.qre_max_iterations), out, "qre.json");
    } else if (mono->parsed()) {
      emit(cmd_check_monotone(zoo, cfg.weights, cfg.pair_count, cfg.seed, mono_temp), out, "monotone.json");
    } else if (influence->parsed()) {
      emit(cmd_influence(zoo.game), out, "influence.json");
    }
    return 0;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ShapeError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ParameterError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}
