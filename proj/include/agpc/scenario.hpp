#pragma once

#include "agpc/performance.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

namespace agpc {

// ===========================================================================
// Scenario files: JSON descriptions of a full synthesis + simulation setup
// ===========================================================================
//
// Node and state-component indices are 1-based in files, 0-based in memory.

struct Scenario {
  std::string name;
  int agents = 0;
  PlantModel plant;
  NonlinearityHook hook;
  PerformanceSpec performance;
  SwitchingSet topologies;
  double switch_interval = 0.0;
  std::uint64_t seed = 0;
  Vector initial_state;  // stacked, N*d
  IntegratorConfig integrator;
};

namespace detail {

using Json = nlohmann::json;

class ScenarioIssues {
 public:
  void add(const std::string& field, const std::string& problem) {
    items_.push_back(field + ": " + problem);
  }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[noreturn]] void raise() const {
    std::string message = "scenario validation failed";
    for (const std::string& item : items_) message += "\n  - " + item;
    throw std::invalid_argument(message);
  }

 private:
  std::vector<std::string> items_;
};

[[nodiscard]] inline Matrix parse_matrix(const Json& node, int rows, int cols,
                                         const std::string& field, ScenarioIssues& issues) {
  if (!node.is_array() || node.size() != static_cast<std::size_t>(rows) * cols) {
    issues.add(field, "expected a flat row-major array of " + std::to_string(rows * cols) +
                          " numbers");
    return Matrix::Zero(rows, cols);
  }
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Json& value = node[static_cast<std::size_t>(r) * cols + c];
      if (!value.is_number()) {
        issues.add(field, "non-numeric entry");
        return Matrix::Zero(rows, cols);
      }
      m(r, c) = value.get<double>();
    }
  }
  return m;
}

[[nodiscard]] inline NonlinearityHook parse_hook(const Json& node, int d,
                                                 ScenarioIssues& issues) {
  const std::string kind = node.value("kind", "none");
  if (kind == "none") return NonlinearityHook::none_hook();
  if (kind == "sin_component") {
    const int source = node.value("source", 0);
    const int target = node.value("target", 0);
    const double scale = node.value("scale", 0.0);
    const double mu = node.value("mu", std::abs(scale));
    if (source < 1 || source > d || target < 1 || target > d) {
      issues.add("nonlinearity", "source/target must be 1-based state components");
      return NonlinearityHook::none_hook();
    }
    if (mu < 0.0 || std::abs(scale) > mu * (1.0 + 1e-9)) {
      issues.add("nonlinearity", "declared mu must cover |scale|");
      return NonlinearityHook::none_hook();
    }
    return NonlinearityHook::sine(source - 1, target - 1, scale, mu);
  }
  issues.add("nonlinearity.kind", "unknown kind '" + kind + "'");
  return NonlinearityHook::none_hook();
}

}  // namespace detail

/// Load and fully validate a scenario file; throws std::runtime_error on
/// I/O or parse failures and std::invalid_argument listing every
/// validation violation.
[[nodiscard]] inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  detail::Json j;
  try {
    j = detail::Json::parse(in);
  } catch (const detail::Json::exception& e) {
    throw std::runtime_error("scenario parse error in " + path + ": " + e.what());
  }

  detail::ScenarioIssues issues;
  Scenario sc;
  sc.name = j.value("name", "");

  sc.agents = j.value("agents", 0);
  if (sc.agents < 2) issues.add("agents", "at least two agents required");

  // Plant -------------------------------------------------------------------
  const detail::Json plant = j.value("plant", detail::Json::object());
  const int d = plant.value("d", 0);
  const int p = plant.value("p", 0);
  if (d < 1 || p < 1) {
    issues.add("plant", "dimensions d and p must be >= 1");
    issues.raise();  // nothing else is checkable without dimensions
  }
  const Matrix a = detail::parse_matrix(plant.value("A", detail::Json::array()), d, d,
                                        "plant.A", issues);
  const Matrix b = detail::parse_matrix(plant.value("B", detail::Json::array()), d, p,
                                        "plant.B", issues);
  sc.plant = PlantModel(a, b);

  // Nonlinearity ------------------------------------------------------------
  sc.hook = detail::parse_hook(j.value("nonlinearity", detail::Json::object()), d, issues);

  // Performance spec ----------------------------------------------------------
  const detail::Json perf = j.value("performance", detail::Json::object());
  sc.performance.Q = detail::parse_matrix(perf.value("Q", detail::Json::array()), d, d,
                                          "performance.Q", issues);
  if (!is_spd(sc.performance.Q)) issues.add("performance.Q", "Q not positive definite");
  sc.performance.gamma = perf.value("gamma", 0.0);
  if (perf.contains("gamma") && !(sc.performance.gamma > 0.0)) {
    issues.add("performance.gamma", "gamma must be positive");
  }
  if (perf.contains("eps")) {
    const double eps = perf.value("eps", 0.0);
    if (!(eps > 0.0)) {
      issues.add("performance.eps", "eps must be positive");
    } else {
      sc.performance.eps = eps;
    }
  }
  sc.performance.mu = sc.hook.mu;

  // Topology ------------------------------------------------------------------
  const detail::Json topo = j.value("topology", detail::Json::object());
  const double dwell = topo.value("dwell", 0.0);
  sc.switch_interval = topo.value("switch_interval", 0.0);
  sc.seed = topo.value("seed", std::uint64_t{0});
  std::vector<Graph> graphs;
  const detail::Json graph_list = topo.value("graphs", detail::Json::array());
  for (std::size_t g = 0; g < graph_list.size(); ++g) {
    const std::string field = "topology.graphs[" + std::to_string(g) + "]";
    std::vector<std::pair<int, int>> edges;
    bool ok = true;
    for (const detail::Json& e : graph_list[g].value("edges", detail::Json::array())) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer()) {
        issues.add(field, "edges must be [i, k] pairs of 1-based node ids");
        ok = false;
        break;
      }
      edges.emplace_back(e[0].get<int>() - 1, e[1].get<int>() - 1);
    }
    if (!ok) continue;
    try {
      Graph graph(sc.agents, std::move(edges));
      if (!is_connected(graph)) issues.add(field, "graph not connected");
      graphs.push_back(std::move(graph));
    } catch (const std::invalid_argument& e) {
      issues.add(field, e.what());
    }
  }
  if (graphs.empty()) {
    issues.add("topology.graphs", "at least one graph required");
  } else if (dwell <= 0.0) {
    issues.add("topology.dwell", "dwell must be positive");
  } else {
    try {
      sc.topologies = SwitchingSet(std::move(graphs), dwell);
    } catch (const std::invalid_argument& e) {
      issues.add("topology", e.what());
    }
  }
  if (!(sc.switch_interval >= dwell) || sc.switch_interval <= 0.0) {
    issues.add("topology.switch_interval", "switch interval must be >= dwell");
  }

  // Initial states --------------------------------------------------------------
  const detail::Json init = j.value("initial_states", detail::Json::array());
  sc.initial_state = Vector::Zero(static_cast<Eigen::Index>(sc.agents) * d);
  if (!init.is_array() || init.size() != static_cast<std::size_t>(sc.agents)) {
    issues.add("initial_states", "expected one d-vector per agent");
  } else {
    for (int i = 0; i < sc.agents; ++i) {
      const Matrix xi = detail::parse_matrix(init[static_cast<std::size_t>(i)], d, 1,
                                             "initial_states[" + std::to_string(i) + "]",
                                             issues);
      sc.initial_state.segment(static_cast<Eigen::Index>(i) * d, d) = xi.col(0);
    }
  }
  if (!sc.initial_state.allFinite()) issues.add("initial_states", "entries must be finite");

  // Integrator ---------------------------------------------------------------
  const detail::Json integ = j.value("integrator", detail::Json::object());
  sc.integrator.step = integ.value("step", 1e-3);
  sc.integrator.horizon = integ.value("horizon", 0.0);
  if (!(sc.integrator.step > 0.0)) issues.add("integrator.step", "step must be positive");
  if (!(sc.integrator.horizon > 0.0)) {
    issues.add("integrator.horizon", "horizon must be positive");
  }

  if (!issues.empty()) issues.raise();
  return sc;
}

// ===========================================================================
// Scenario-level synthesis and simulation
// ===========================================================================

/// Direct (gamma-based) synthesis for the scenario's mode: linear when no
/// nonlinearity is declared, Lipschitz otherwise.
[[nodiscard]] inline GainSet synthesize_for(const Scenario& sc, double interior_slack = 0.0) {
  require(sc.performance.gamma > 0.0, "scenario has no gamma for direct synthesis");
  if (sc.hook.is_none()) return synthesize_linear(sc.plant, sc.performance, interior_slack);
  return synthesize_lipschitz(sc.plant, sc.performance, interior_slack);
}

/// Bounded-gain (eps-based) synthesis for the scenario's mode.
[[nodiscard]] inline EpsSynthesis synthesize_eps_for(const Scenario& sc, double eps) {
  if (sc.hook.is_none()) return synthesize_linear_eps(sc.plant, sc.performance.Q, eps);
  return synthesize_lipschitz_eps(sc.plant, sc.performance.Q, eps, sc.performance.mu);
}

[[nodiscard]] inline SimulationProblem make_problem(const Scenario& sc, const GainSet& gains) {
  SimulationProblem problem;
  problem.plant = sc.plant;
  problem.agents = sc.agents;
  problem.gains = gains;
  problem.hook = sc.hook;
  problem.Q = sc.performance.Q;
  problem.topologies = sc.topologies;
  problem.schedule = sample_switching_signal(sc.topologies, sc.integrator.horizon,
                                             sc.switch_interval, sc.seed);
  problem.initial_state = sc.initial_state;
  problem.integrator = sc.integrator;
  problem.seed = sc.seed;
  return problem;
}

/// Synthesize gains for the scenario and run it end to end.
[[nodiscard]] inline Trace run_scenario(const Scenario& sc, double interior_slack = 0.0) {
  return simulate(make_problem(sc, synthesize_for(sc, interior_slack)));
}

/// Directory holding the bundled scenario files: $AGPC_SCENARIO_DIR if set,
/// otherwise ./scenarios.
[[nodiscard]] inline std::string default_scenario_dir() {
  if (const char* env = std::getenv("AGPC_SCENARIO_DIR")) return env;
  return "scenarios";
}

}  // namespace agpc
