#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "smoothql/analysis.hpp"
#include "smoothql/dynamics.hpp"
#include "smoothql/equilibrium.hpp"
#include "smoothql/game.hpp"

namespace smoothql {

using json = nlohmann::json;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kCsvSchemaVersion = 1;

/// Shortest round-trip decimal text for a double ("%.17g"), stable across runs.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Game files

namespace detail {

inline void flatten_payoffs(const json& node, std::size_t depth, const std::vector<std::size_t>& counts,
                            std::vector<double>& out, const std::string& where) {
  if (depth == counts.size()) {
    if (!node.is_number()) throw ParseError(where + ": expected a number");
    out.push_back(node.get<double>());
    return;
  }
  if (!node.is_array() || node.size() != counts[depth])
    throw ParseError(where + ": expected an array of length " + std::to_string(counts[depth]));
  for (std::size_t i = 0; i < node.size(); ++i)
    flatten_payoffs(node[i], depth + 1, counts, out, where + "[" + std::to_string(i) + "]");
}

inline json nest_payoffs(const std::vector<double>& flat, std::size_t depth, const std::vector<std::size_t>& counts,
                         std::size_t& pos) {
  if (depth == counts.size()) return flat[pos++];
  json arr = json::array();
  for (std::size_t i = 0; i < counts[depth]; ++i) arr.push_back(nest_payoffs(flat, depth + 1, counts, pos));
  return arr;
}

template <class T>
T field(const json& doc, const std::string& key, const std::string& where) {
  if (!doc.contains(key)) throw ParseError(where + ": missing field \"" + key + "\"");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": field \"" + key + "\" has the wrong type (" + e.what() + ")");
  }
}

}  // namespace detail

/// Parses {"type": "normal_form", "action_counts": [...], "payoffs": [...]} or
/// {"type": "polymatrix", "action_counts": [...], "edges": [{"from", "to", "matrix"}]}.
inline Game game_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("game: top level must be a JSON object");
  const auto type = detail::field<std::string>(doc, "type", "game");
  const auto counts = detail::field<std::vector<std::size_t>>(doc, "action_counts", "game");
  try {
    if (type == "normal_form") {
      if (!doc.contains("payoffs")) throw ParseError("game: missing field \"payoffs\"");
      const auto& pay = doc["payoffs"];
      if (!pay.is_array() || pay.size() != counts.size())
        throw ParseError("game.payoffs: expected one entry per player (" + std::to_string(counts.size()) + ")");
      std::vector<std::vector<double>> tensors;
      for (std::size_t k = 0; k < pay.size(); ++k) {
        std::vector<double> flat;
        const std::string where = "game.payoffs[" + std::to_string(k) + "]";
        std::size_t total = 1;
        for (auto n : counts) total *= n;
        if (pay[k].is_array() && pay[k].size() == total && (pay[k].empty() || pay[k][0].is_number()) &&
            counts.size() > 1) {
          for (std::size_t i = 0; i < pay[k].size(); ++i) {
            if (!pay[k][i].is_number()) throw ParseError(where + "[" + std::to_string(i) + "]: expected a number");
            flat.push_back(pay[k][i].get<double>());
          }
        } else {
          detail::flatten_payoffs(pay[k], 0, counts, flat, where);
        }
        tensors.push_back(std::move(flat));
      }
      return NormalFormGame(counts, std::move(tensors));
    }
    if (type == "polymatrix") {
      if (!doc.contains("edges") || !doc["edges"].is_array()) throw ParseError("game: missing array field \"edges\"");
      std::vector<PolymatrixEdge> edges;
      for (std::size_t e = 0; e < doc["edges"].size(); ++e) {
        const auto& node = doc["edges"][e];
        const std::string where = "game.edges[" + std::to_string(e) + "]";
        if (!node.is_object()) throw ParseError(where + ": expected an object");
        PolymatrixEdge edge;
        edge.from = detail::field<std::size_t>(node, "from", where);
        edge.to = detail::field<std::size_t>(node, "to", where);
        const auto rows = detail::field<std::vector<std::vector<double>>>(node, "matrix", where);
        const std::size_t cols = rows.empty() ? 0 : rows.front().size();
        edge.matrix.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (rows[i].size() != cols) throw ParseError(where + ".matrix: ragged rows");
          for (std::size_t j = 0; j < cols; ++j)
            edge.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
        edges.push_back(std::move(edge));
      }
      return PolymatrixGame(counts, std::move(edges));
    }
  } catch (const ShapeError& e) {
    throw ParseError(std::string("game: ") + e.what());
  }
  throw ParseError("game.type: expected \"normal_form\" or \"polymatrix\", got \"" + type + "\"");
}

inline Game load_game_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open game file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    return game_from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline json game_to_json(const Game& game) {
  json doc;
  doc["action_counts"] = game.action_counts();
  if (const auto* nf = game.normal_form()) {
    doc["type"] = "normal_form";
    doc["payoffs"] = json::array();
    for (std::size_t k = 0; k < nf->player_count(); ++k) {
      std::size_t pos = 0;
      doc["payoffs"].push_back(detail::nest_payoffs(nf->tensor(k), 0, nf->action_counts(), pos));
    }
    return doc;
  }
  doc["type"] = "polymatrix";
  doc["edges"] = json::array();
  for (const auto& e : game.polymatrix()->edges()) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < e.matrix.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < e.matrix.cols(); ++j) row.push_back(e.matrix(i, j));
      rows.push_back(std::move(row));
    }
    doc["edges"].push_back({{"from", e.from}, {"to", e.to}, {"matrix", std::move(rows)}});
  }
  return doc;
}

// ---------------------------------------------------------------------------
// CSV outputs

inline void write_schema_footer(std::ostream& out) { out << "# schema_version=" << kCsvSchemaVersion << "\n"; }

/// t,player,action,probability; one row per recorded component.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,player,action,probability\n";
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const auto& x = traj.profiles[s];
    const std::string t = format_number(traj.times[s]);
    for (std::size_t k = 0; k < x.player_count(); ++k)
      for (std::size_t i = 0; i < x.action_count(k); ++i)
        out << t << ',' << k << ',' << i << ',' << format_number(x[k][i]) << '\n';
  }
  write_schema_footer(out);
}

/// t,sw,running_tsw
inline void write_welfare_series_csv(std::ostream& out, const PayoffSeries& series) {
  out << "t,sw,running_tsw\n";
  for (std::size_t s = 0; s < series.times.size(); ++s)
    out << format_number(series.times[s]) << ',' << format_number(series.social_welfare[s]) << ','
        << format_number(series.running_tsw[s]) << '\n';
  write_schema_footer(out);
}

struct SweepRow {
  std::size_t game_id = 0;
  double temperature = 0.0;
  double mean_tsw = 0.0;
  double sw_equilibrium = 0.0;
};

/// game_id,T,mean_tsw,sw_equilibrium (both welfare columns normalized per game).
inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "game_id,T,mean_tsw,sw_equilibrium\n";
  for (const auto& r : rows)
    out << r.game_id << ',' << format_number(r.temperature) << ',' << format_number(r.mean_tsw) << ','
        << format_number(r.sw_equilibrium) << '\n';
  write_schema_footer(out);
}

// ---------------------------------------------------------------------------
// JSON reports

inline json to_json(const StrategyProfile& x) { return x.nested(); }

inline json to_json(const QreSolution& q) {
  return {{"profile", to_json(q.profile)},
          {"residual", q.residual},
          {"iterations", q.iterations},
          {"converged", q.converged},
          {"temperatures", q.temperatures.values()}};
}

inline json to_json(const MonotonicityReport& r) {
  json doc{{"verdict", to_string(r.verdict)},
           {"weights", r.weights.values()},
           {"method", r.method == CertificateMethod::exact_polymatrix ? "exact_polymatrix" : "sampled"},
           {"certificate", r.certificate},
           {"sample_count", r.sample_count}};
  if (r.witness) doc["witness"] = {to_json(r.witness->first), to_json(r.witness->second)};
  else doc["witness"] = nullptr;
  return doc;
}

inline json to_json(const WelfareReport& r) {
  return {{"TSW", r.tsw},
          {"SW_at_equilibrium", r.sw_at_equilibrium},
          {"normalized_TSW", r.normalized_tsw},
          {"regret", r.regret},
          {"time_averaged_profile", to_json(r.time_average)},
          {"TSW_tail_slope", r.tsw_tail_slope}};
}

}  // namespace smoothql
