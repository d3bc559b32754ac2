#pragma once

#include "agpc/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace agpc {

// ===========================================================================
// Trace CSV + sidecar metadata
// ===========================================================================
//
// CSV columns: t, x_1_1 .. x_N_d, Jx, disagreement, V, then one w_i_k column
// per unordered pair in lexicographic order; 9 significant digits.
// The sibling "<path>.meta" JSON stores everything needed to re-verify the
// trace (plant, Q, gains, schedule, topologies, seed, cost summary) at full
// double precision.

namespace detail {

[[nodiscard]] inline std::string fmt_sig(double value, int digits) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*g", digits, value);
  return buffer;
}

[[nodiscard]] inline Json matrix_to_json(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return Json(flat);
}

[[nodiscard]] inline Matrix matrix_from_json(const Json& node, Eigen::Index rows,
                                             Eigen::Index cols, const std::string& field) {
  if (!node.is_array() || node.size() != static_cast<std::size_t>(rows * cols)) {
    throw std::runtime_error("trace metadata: bad matrix field " + field);
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = node[static_cast<std::size_t>(r * cols + c)].get<double>();
    }
  }
  return m;
}

[[nodiscard]] inline Json hook_to_json(const NonlinearityHook& hook) {
  Json j;
  switch (hook.kind) {
    case NonlinearityHook::Kind::none:
      j["kind"] = "none";
      break;
    case NonlinearityHook::Kind::sin_component:
      j["kind"] = "sin_component";
      j["source"] = hook.source + 1;  // files are 1-based
      j["target"] = hook.target + 1;
      j["scale"] = hook.scale;
      j["mu"] = hook.mu;
      break;
    case NonlinearityHook::Kind::custom:
      throw std::runtime_error(
          "trace metadata: a custom nonlinearity cannot be restored from a trace file");
  }
  return j;
}

[[nodiscard]] inline NonlinearityHook hook_from_json(const Json& j) {
  const std::string kind = j.value("kind", "none");
  if (kind == "none") return NonlinearityHook::none_hook();
  if (kind == "sin_component") {
    return NonlinearityHook::sine(j.at("source").get<int>() - 1,
                                  j.at("target").get<int>() - 1,
                                  j.at("scale").get<double>(), j.at("mu").get<double>());
  }
  throw std::runtime_error(
      "trace metadata: a custom nonlinearity cannot be restored from a trace file");
}

}  // namespace detail

/// Write the trace CSV plus its "<path>.meta" sidecar.
inline void export_trace(const Trace& trace, const std::string& path) {
  require(!trace.samples.empty(), "empty trace");
  // Fail before writing anything: a file that cannot be imported again must
  // not be produced in the first place.
  const detail::Json hook_json = detail::hook_to_json(trace.problem.hook);
  const int n = trace.agents();
  const int d = trace.problem.plant.d;
  const TraceAnalysis analysis =
      lyapunov_diagnostic(trace, trace.gains, gamma_estimates(trace));
  const CostReport cost = guaranteed_cost_bound(trace, trace.gains);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
  out << "t";
  for (int i = 1; i <= n; ++i) {
    for (int c = 1; c <= d; ++c) out << ",x_" << i << "_" << c;
  }
  out << ",Jx,disagreement,V";
  for (int i = 1; i <= n; ++i) {
    for (int k = i + 1; k <= n; ++k) out << ",w_" << i << "_" << k;
  }
  out << "\n";
  for (std::size_t j = 0; j < trace.samples.size(); ++j) {
    const TraceSample& s = trace.samples[j];
    out << detail::fmt_sig(s.t, 9);
    for (Eigen::Index c = 0; c < s.x.size(); ++c)
      out << ',' << detail::fmt_sig(s.x[c], 9);
    out << ',' << detail::fmt_sig(s.cumulative_cost, 9);
    out << ',' << detail::fmt_sig(s.disagreement, 9);
    out << ',' << detail::fmt_sig(analysis.V[static_cast<Eigen::Index>(j)], 9);
    for (Eigen::Index c = 0; c < s.weights.size(); ++c)
      out << ',' << detail::fmt_sig(s.weights[c], 9);
    out << "\n";
  }
  if (!out) throw std::runtime_error("failed while writing trace file: " + path);

  detail::Json meta;
  meta["format"] = 1;
  meta["agents"] = n;
  meta["d"] = d;
  meta["p"] = trace.problem.plant.p;
  meta["seed"] = trace.problem.seed;
  meta["step"] = trace.problem.integrator.step;
  meta["horizon"] = trace.problem.integrator.horizon;
  meta["plant"]["A"] = detail::matrix_to_json(trace.problem.plant.A);
  meta["plant"]["B"] = detail::matrix_to_json(trace.problem.plant.B);
  meta["Q"] = detail::matrix_to_json(trace.problem.Q);
  meta["nonlinearity"] = hook_json;
  meta["gains"]["mode"] = trace.gains.mode == GainMode::linear ? "linear" : "lipschitz";
  meta["gains"]["gamma"] = trace.gains.gamma;
  meta["gains"]["K_u"] = detail::matrix_to_json(trace.gains.K_u);
  meta["gains"]["K_w"] = detail::matrix_to_json(trace.gains.K_w);
  meta["gains"]["certificate"] = detail::matrix_to_json(trace.gains.certificate);
  meta["schedule"]["breakpoints"] = trace.schedule.breakpoints;
  meta["schedule"]["indices"] = trace.schedule.indices;
  meta["topology"]["dwell"] = trace.problem.topologies.dwell;
  detail::Json graph_list = detail::Json::array();
  for (const Graph& g : trace.problem.topologies.graphs) {
    detail::Json edges = detail::Json::array();
    for (auto [i, k] : g.edges) edges.push_back({i + 1, k + 1});
    graph_list.push_back({{"edges", edges}});
  }
  meta["topology"]["graphs"] = graph_list;
  meta["cost"]["J_x_final"] = cost.J_x_final;
  meta["cost"]["J_star"] = cost.J_star;
  meta["cost"]["J_star_initial"] = cost.J_star_initial;
  meta["cost"]["J_star_state"] = cost.J_star_state;
  meta["cost"]["satisfied"] = cost.satisfied;

  std::ofstream meta_out(path + ".meta");
  if (!meta_out) throw std::runtime_error("cannot open metadata file for writing: " + path);
  meta_out << meta.dump(2) << "\n";
}

struct ImportedTrace {
  Trace trace;
  Vector v_column;  // V as stored in the file (recomputable from the rest)
};

/// Read a trace CSV and its sidecar back into memory. The per-sample cost
/// rate is recomputed from the states (it is not a CSV column).
[[nodiscard]] inline ImportedTrace import_trace(const std::string& path) {
  std::ifstream meta_in(path + ".meta");
  if (!meta_in) throw std::runtime_error("cannot open trace metadata: " + path + ".meta");
  detail::Json meta;
  try {
    meta = detail::Json::parse(meta_in);
  } catch (const detail::Json::exception& e) {
    throw std::runtime_error("trace metadata parse error: " + std::string(e.what()));
  }

  ImportedTrace imported;
  SimulationProblem& problem = imported.trace.problem;
  const int n = meta.at("agents").get<int>();
  const int d = meta.at("d").get<int>();
  const int p = meta.at("p").get<int>();
  problem.agents = n;
  problem.seed = meta.value("seed", std::uint64_t{0});
  problem.integrator.step = meta.at("step").get<double>();
  problem.integrator.horizon = meta.at("horizon").get<double>();
  problem.plant = PlantModel(detail::matrix_from_json(meta.at("plant").at("A"), d, d, "A"),
                             detail::matrix_from_json(meta.at("plant").at("B"), d, p, "B"));
  problem.Q = detail::matrix_from_json(meta.at("Q"), d, d, "Q");
  problem.hook = detail::hook_from_json(meta.at("nonlinearity"));

  const detail::Json& gains = meta.at("gains");
  const GainMode mode =
      gains.at("mode").get<std::string>() == "lipschitz" ? GainMode::lipschitz
                                                         : GainMode::linear;
  problem.gains = GainSet(detail::matrix_from_json(gains.at("K_u"), p, d, "K_u"),
                          detail::matrix_from_json(gains.at("K_w"), d, d, "K_w"),
                          detail::matrix_from_json(gains.at("certificate"), d, d,
                                                   "certificate"),
                          gains.at("gamma").get<double>(), mode);

  problem.schedule.breakpoints =
      meta.at("schedule").at("breakpoints").get<std::vector<double>>();
  problem.schedule.indices = meta.at("schedule").at("indices").get<std::vector<int>>();

  std::vector<Graph> graphs;
  for (const detail::Json& g : meta.at("topology").at("graphs")) {
    std::vector<std::pair<int, int>> edges;
    for (const detail::Json& e : g.at("edges")) {
      edges.emplace_back(e[0].get<int>() - 1, e[1].get<int>() - 1);
    }
    graphs.emplace_back(n, std::move(edges));
  }
  problem.topologies = SwitchingSet(std::move(graphs), meta.at("topology").at("dwell").get<double>());

  imported.trace.schedule = problem.schedule;
  imported.trace.gains = problem.gains;

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace file is empty: " + path);

  std::ostringstream expected;
  expected << "t";
  for (int i = 1; i <= n; ++i)
    for (int c = 1; c <= d; ++c) expected << ",x_" << i << "_" << c;
  expected << ",Jx,disagreement,V";
  for (int i = 1; i <= n; ++i)
    for (int k = i + 1; k <= n; ++k) expected << ",w_" << i << "_" << k;
  if (line != expected.str()) throw std::runtime_error("trace header mismatch: " + path);

  const int pairs = pair_count(n);
  const int columns = 1 + n * d + 3 + pairs;
  std::vector<double> row(static_cast<std::size_t>(columns));
  std::vector<double> v_values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < columns; ++c) {
      if (!std::getline(ss, cell, ',')) {
        throw std::runtime_error("trace row has too few columns: " + path);
      }
      row[static_cast<std::size_t>(c)] = std::stod(cell);
    }
    TraceSample sample;
    sample.t = row[0];
    sample.x = Eigen::Map<const Vector>(row.data() + 1, n * d);
    sample.cumulative_cost = row[static_cast<std::size_t>(1 + n * d)];
    sample.disagreement = row[static_cast<std::size_t>(1 + n * d + 1)];
    v_values.push_back(row[static_cast<std::size_t>(1 + n * d + 2)]);
    sample.weights = Eigen::Map<const Vector>(row.data() + 1 + n * d + 3, pairs);
    sample.cost_rate = cost_rate(sample.x, problem.Q, n);
    imported.trace.samples.push_back(std::move(sample));
  }
  require(!imported.trace.samples.empty(), "trace file has no samples");
  problem.initial_state = imported.trace.samples.front().x;
  imported.v_column =
      Eigen::Map<const Vector>(v_values.data(), static_cast<Eigen::Index>(v_values.size()));
  return imported;
}

// ===========================================================================
// Trace verification
// ===========================================================================

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  CostReport cost;

  [[nodiscard]] bool pass() const {
    for (const VerifyCheck& c : checks)
      if (!c.pass) return false;
    return true;
  }

  [[nodiscard]] std::string summary() const {
    std::ostringstream oss;
    for (const VerifyCheck& c : checks) {
      oss << (c.pass ? "[ ok ] " : "[FAIL] ") << c.name;
      if (!c.detail.empty()) oss << " (" << c.detail << ")";
      oss << "\n";
    }
    oss << "J_x(final) = " << detail::fmt_sig(cost.J_x_final, 9)
        << "  J* = " << detail::fmt_sig(cost.J_star, 9)
        << "  (initial " << detail::fmt_sig(cost.J_star_initial, 9) << " + state "
        << detail::fmt_sig(cost.J_star_state, 9) << ", horizon-truncated)\n"
        << "bound " << (cost.satisfied ? "satisfied" : "VIOLATED") << ", margin "
        << detail::fmt_sig(cost.margin, 9) << "\n";
    return oss.str();
  }
};

/// Re-check an imported trace against its own metadata: recomputed columns,
/// protocol invariants, Lyapunov descent, and the cost bound.
[[nodiscard]] inline VerifyReport verify_trace(const ImportedTrace& imported) {
  const Trace& trace = imported.trace;
  const SimulationProblem& problem = trace.problem;
  const int n = trace.agents();
  const auto count = static_cast<Eigen::Index>(trace.samples.size());
  VerifyReport report;

  const auto add = [&report](const std::string& name, bool pass, std::string detail = "") {
    report.checks.push_back({name, pass, std::move(detail)});
  };
  const auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-6 * (1.0 + std::max(std::abs(a), std::abs(b)));
  };

  bool increasing = trace.samples.front().t == 0.0;
  for (Eigen::Index j = 1; j < count; ++j) {
    increasing = increasing && trace.samples[j].t > trace.samples[j - 1].t;
  }
  add("time axis starts at 0 and strictly increases", increasing);

  bool jx_monotone = true;
  for (Eigen::Index j = 1; j < count; ++j) {
    jx_monotone = jx_monotone && trace.samples[j].cumulative_cost >=
                                     trace.samples[j - 1].cumulative_cost - 1e-12;
  }
  add("cumulative cost nondecreasing", jx_monotone);

  const Vector jx = cumulative_cost(trace, problem.Q);
  bool jx_match = true;
  double jx_err = 0.0;
  for (Eigen::Index j = 0; j < count; ++j) {
    jx_err = std::max(jx_err, std::abs(jx[j] - trace.samples[j].cumulative_cost));
    jx_match = jx_match && close(jx[j], trace.samples[j].cumulative_cost);
  }
  add("cumulative cost matches recomputation", jx_match,
      "max deviation " + detail::fmt_sig(jx_err, 3));

  bool dis_match = true;
  for (Eigen::Index j = 0; j < count; ++j) {
    dis_match = dis_match &&
                close(disagreement_norm(trace.samples[j].x, n), trace.samples[j].disagreement);
  }
  add("disagreement matches recomputation", dis_match);

  const TraceAnalysis analysis =
      lyapunov_diagnostic(trace, trace.gains, gamma_estimates(trace));
  bool v_match = true;
  for (Eigen::Index j = 0; j < count; ++j) {
    v_match = v_match && close(analysis.V[j], imported.v_column[j]);
  }
  add("Lyapunov column matches recomputation", v_match);
  add("Lyapunov function non-increasing within segments",
      analysis.interior_increases.empty(),
      analysis.interior_increases.empty()
          ? ""
          : std::to_string(analysis.interior_increases.size()) + " interior increases");

  bool weights_floor = true;
  for (const TraceSample& s : trace.samples) {
    weights_floor = weights_floor && (s.weights.array() >= 1.0 - 1e-12).all();
  }
  add("weights never fall below 1", weights_floor);

  bool weights_monotone = true;
  bool resets_ok = true;
  for (Eigen::Index j = 1; j < count; ++j) {
    const int seg_prev = trace.schedule.segment_at(trace.samples[j - 1].t);
    const int seg = trace.schedule.segment_at(trace.samples[j].t);
    if (seg == seg_prev) {
      weights_monotone =
          weights_monotone &&
          (trace.samples[j].weights.array() >= trace.samples[j - 1].weights.array() - 1e-12)
              .all();
    } else {
      const Graph& old_graph = problem.topologies.graphs[trace.schedule.indices[seg_prev]];
      const Graph& new_graph = problem.topologies.graphs[trace.schedule.indices[seg]];
      for (auto [a, b] : new_graph.edges) {
        if (!old_graph.has_edge(a, b)) {
          resets_ok =
              resets_ok && trace.samples[j].weights[pair_index(n, a, b)] == 1.0;
        }
      }
    }
  }
  add("weights nondecreasing between switches", weights_monotone);
  add("weights reset to exactly 1 on newly added edges", resets_ok);

  bool control_balanced = true;
  double control_sum_max = 0.0;
  for (const TraceSample& s : trace.samples) {
    SystemState state{s.t, s.x, WeightState(n)};
    state.weights.w = s.weights;
    const Graph& graph = problem.topologies.graphs[trace.schedule.index_at(s.t)];
    const Vector u = control_inputs(state, graph, trace.gains.K_u);
    Vector total = Vector::Zero(problem.plant.p);
    for (int i = 0; i < n; ++i) total += u.segment(i * problem.plant.p, problem.plant.p);
    const double imbalance = total.cwiseAbs().maxCoeff();
    control_sum_max = std::max(control_sum_max, imbalance);
    control_balanced = control_balanced && imbalance <= 1e-9;
  }
  add("control inputs sum to zero", control_balanced,
      "max imbalance " + detail::fmt_sig(control_sum_max, 3));

  report.cost = guaranteed_cost_bound(trace, trace.gains);
  add("cost bound satisfied", report.cost.satisfied,
      "J_x " + detail::fmt_sig(report.cost.J_x_final, 9) + " vs J* " +
          detail::fmt_sig(report.cost.J_star, 9));
  return report;
}

}  // namespace agpc
