#pragma once

#include "agpc/metrics.hpp"
#include "agpc/protocol.hpp"

#include <cstdint>
#include <sstream>
#include <vector>

namespace agpc {

// ===========================================================================
// Fixed-step simulation of the coupled state/weight dynamics
// ===========================================================================

struct IntegratorConfig {
  double step = 1e-3;    // h, seconds; classical RK4 is the only method
  double horizon = 0.0;  // seconds
};

struct TraceSample {
  double t = 0.0;
  Vector x;                 // stacked states
  Vector weights;           // all pair weights
  double cost_rate = 0.0;   // x^T (2 L_N kron Q) x
  double cumulative_cost = 0.0;
  double disagreement = 0.0;
};

/// Everything a simulation run consumes; kept on the trace as provenance.
struct SimulationProblem {
  PlantModel plant;
  int agents = 0;
  GainSet gains;
  NonlinearityHook hook;
  Matrix Q;
  SwitchingSet topologies;
  SwitchingSchedule schedule;
  Vector initial_state;  // stacked, N*d
  IntegratorConfig integrator;
  std::uint64_t seed = 0;  // schedule seed, recorded for reproducibility
};

struct Trace {
  std::vector<TraceSample> samples;
  SwitchingSchedule schedule;
  GainSet gains;
  SimulationProblem problem;

  [[nodiscard]] int agents() const { return problem.agents; }
  [[nodiscard]] const TraceSample& back() const { return samples.back(); }
};

namespace detail {

[[noreturn]] inline void throw_divergence(double t) {
  std::ostringstream oss;
  oss << "divergence detected at t = " << t;
  throw std::runtime_error(oss.str());
}

}  // namespace detail

/// One classical 4th-order Runge-Kutta step of the coupled (x, w) system.
/// `deriv` maps a SystemState to the pair (dx, dw).
template <class Deriv>
[[nodiscard]] SystemState rk4_step(Deriv&& deriv, const SystemState& state, double h) {
  require(h > 0.0, "step must be positive");
  const auto stage = [&](const std::pair<Vector, Vector>& k, double frac) {
    SystemState s = state;
    s.t = state.t + frac * h;
    s.x += (frac * h) * k.first;
    s.weights.w += (frac * h) * k.second;
    return s;
  };
  const std::pair<Vector, Vector> k1 = deriv(state);
  const std::pair<Vector, Vector> k2 = deriv(stage(k1, 0.5));
  const std::pair<Vector, Vector> k3 = deriv(stage(k2, 0.5));
  const std::pair<Vector, Vector> k4 = deriv(stage(k3, 1.0));
  SystemState next = state;
  next.t = state.t + h;
  next.x += (h / 6.0) * (k1.first + 2.0 * k2.first + 2.0 * k3.first + k4.first);
  next.weights.w +=
      (h / 6.0) * (k1.second + 2.0 * k2.second + 2.0 * k3.second + k4.second);
  if (!next.x.allFinite() || !next.weights.w.allFinite()) detail::throw_divergence(next.t);
  return next;
}

/// Integrate across the switching schedule. Steps never straddle a switch:
/// each segment is integrated on its own grid, with a shortened final step
/// landing exactly on the breakpoint, where apply_switch runs before the
/// sample is recorded (the switch instant belongs to the new graph).
[[nodiscard]] inline Trace simulate(const SimulationProblem& problem) {
  const int n = problem.agents;
  const int d = problem.plant.d;
  require(n >= 2, "at least two agents required");
  require(problem.initial_state.size() == n * d, "initial state size must equal N*d");
  require(problem.initial_state.allFinite(), "initial state must be finite");
  require(problem.topologies.nodes() == n, "topology node count mismatch");
  require(problem.Q.rows() == d && problem.Q.cols() == d, "Q size mismatch");
  require(problem.gains.K_u.cols() == d && problem.gains.K_u.rows() == problem.plant.p,
          "gains inconsistent with the plant");
  const double h = problem.integrator.step;
  const double horizon = problem.integrator.horizon;
  require(h > 0.0, "step must be positive");
  require(horizon > 0.0, "horizon must be positive");

  const SwitchingSchedule& schedule = problem.schedule;
  require(!schedule.breakpoints.empty() && schedule.breakpoints.front() == 0.0,
          "schedule must start at t = 0");
  require(schedule.breakpoints.size() == schedule.indices.size(),
          "schedule breakpoints/indices mismatch");
  const auto graph_count = static_cast<int>(problem.topologies.graphs.size());
  for (std::size_t m = 0; m < schedule.indices.size(); ++m) {
    require(schedule.indices[m] >= 0 && schedule.indices[m] < graph_count,
            "schedule index out of range");
    if (m > 0) {
      require(schedule.breakpoints[m] > schedule.breakpoints[m - 1],
              "breakpoints must be strictly increasing");
    }
  }

  // Segment boundaries clipped to the horizon.
  std::vector<double> seg_start, seg_end;
  std::vector<int> seg_index;
  for (std::size_t m = 0; m < schedule.breakpoints.size(); ++m) {
    const double start = schedule.breakpoints[m];
    if (start >= horizon - 1e-12) break;
    const double end = (m + 1 < schedule.breakpoints.size())
                           ? std::min(schedule.breakpoints[m + 1], horizon)
                           : horizon;
    seg_start.push_back(start);
    seg_end.push_back(end);
    seg_index.push_back(schedule.indices[m]);
    require(h <= end - start + 1e-12, "step exceeds a segment length");
  }
  require(!seg_start.empty(), "schedule does not cover the horizon");

  Trace trace;
  trace.problem = problem;
  trace.schedule = schedule;
  trace.gains = problem.gains;

  SystemState state{0.0, problem.initial_state, WeightState(n)};
  double jx = 0.0;
  double prev_rate = cost_rate(state.x, problem.Q, n);

  const auto record = [&](double rate) {
    trace.samples.push_back({state.t, state.x, state.weights.w, rate, jx,
                             disagreement_norm(state.x, n)});
  };
  record(prev_rate);

  const auto segment_count = static_cast<int>(seg_start.size());
  for (int m = 0; m < segment_count; ++m) {
    const Graph& graph = problem.topologies.graphs[seg_index[m]];
    if (m > 0) {
      state = apply_switch(std::move(state), problem.topologies.graphs[seg_index[m - 1]],
                           graph);
      record(prev_rate);  // breakpoint sample, weights post-switch
    }
    const auto deriv = [&](const SystemState& s) {
      return system_derivative(s, graph, problem.plant, problem.gains, problem.hook);
    };
    const double length = seg_end[m] - seg_start[m];
    auto full_steps = static_cast<long>(std::floor(length / h + 1e-9));
    double remainder = length - full_steps * h;
    if (remainder <= 1e-12) remainder = 0.0;
    const long total_steps = full_steps + (remainder > 0.0 ? 1 : 0);
    for (long j = 1; j <= total_steps; ++j) {
      const bool last = (j == total_steps);
      const double step = (last && remainder > 0.0) ? remainder : h;
      state = rk4_step(deriv, state, step);
      state.t = last ? seg_end[m] : seg_start[m] + j * h;  // exact grid times
      const double rate = cost_rate(state.x, problem.Q, n);
      jx += 0.5 * step * (prev_rate + rate);
      prev_rate = rate;
      if (!last) record(rate);
    }
    if (m == segment_count - 1) record(prev_rate);  // horizon sample
  }
  return trace;
}

}  // namespace agpc
