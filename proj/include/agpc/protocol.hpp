#pragma once

#include "agpc/graph.hpp"
#include "agpc/riccati.hpp"

#include <functional>
#include <utility>

namespace agpc {

// ===========================================================================
// Agent nonlinearity
// ===========================================================================

/// Optional per-agent drift term f(x_i) added to A x_i. The sine hook writes
/// scale * sin(x[source]) into component `target` (indices 0-based).
struct NonlinearityHook {
  enum class Kind { none, sin_component, custom };

  Kind kind = Kind::none;
  int source = 0;
  int target = 0;
  double scale = 0.0;
  double mu = 0.0;  // declared Lipschitz constant
  std::function<Vector(const Vector&)> custom_fn;

  [[nodiscard]] static NonlinearityHook none_hook() { return {}; }

  [[nodiscard]] static NonlinearityHook sine(int source, int target, double scale,
                                             double mu) {
    require(source >= 0 && target >= 0, "component indices must be nonnegative");
    require(mu >= 0.0, "mu must be nonnegative");
    NonlinearityHook hook;
    hook.kind = Kind::sin_component;
    hook.source = source;
    hook.target = target;
    hook.scale = scale;
    hook.mu = mu;
    return hook;
  }

  [[nodiscard]] static NonlinearityHook custom(std::function<Vector(const Vector&)> fn,
                                               double mu) {
    require(static_cast<bool>(fn), "custom hook needs a callable");
    require(mu >= 0.0, "mu must be nonnegative");
    NonlinearityHook hook;
    hook.kind = Kind::custom;
    hook.mu = mu;
    hook.custom_fn = std::move(fn);
    return hook;
  }

  [[nodiscard]] bool is_none() const { return kind == Kind::none; }

  [[nodiscard]] Vector eval(const Vector& xi) const {
    switch (kind) {
      case Kind::none:
        return Vector::Zero(xi.size());
      case Kind::sin_component: {
        require(source < xi.size() && target < xi.size(), "component index out of range");
        Vector f = Vector::Zero(xi.size());
        f[target] = scale * std::sin(xi[source]);
        return f;
      }
      case Kind::custom:
        return custom_fn(xi);
    }
    return Vector::Zero(xi.size());
  }
};

// ===========================================================================
// Coupled agent/weight state and the adaptive protocol
// ===========================================================================

struct SystemState {
  double t = 0.0;
  Vector x;             // stacked agent states, N*d
  WeightState weights;  // one weight per unordered pair
};

/// u_i = K_u * sum over current neighbors k of w_ik (x_k - x_i), stacked.
/// Virtual (non-edge) weights do not contribute.
[[nodiscard]] inline Vector control_inputs(const SystemState& state, const Graph& graph,
                                           const Matrix& k_u) {
  const int n = graph.n;
  const auto d = k_u.cols();
  const auto p = k_u.rows();
  require(state.x.size() == n * d, "state size must equal N*d");
  require(state.weights.n == n, "weight state node count mismatch");
  Vector u = Vector::Zero(n * p);
  for (auto [i, k] : graph.edges) {
    const Vector diff = state.x.segment(k * d, d) - state.x.segment(i * d, d);
    const Vector pull = state.weights.at(i, k) * (k_u * diff);
    u.segment(i * p, p) += pull;
    u.segment(k * p, p) -= pull;
  }
  return u;
}

/// Adaptation rate (x_k - x_i)^T K_w (x_k - x_i) for EVERY unordered pair:
/// virtual channels keep adapting while their edge is absent. Rates are
/// clamped at zero to keep them nonnegative under round-off.
[[nodiscard]] inline Vector weight_rates(const SystemState& state, const Matrix& k_w) {
  const auto d = k_w.rows();
  require(k_w.cols() == d, "K_w must be square");
  const int n = state.weights.n;
  require(state.x.size() == n * d, "state size must equal N*d");
  Vector rates(pair_count(n));
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const Vector diff = state.x.segment(k * d, d) - state.x.segment(i * d, d);
      rates[pair_index(n, i, k)] = std::max(0.0, diff.dot(k_w * diff));
    }
  }
  return rates;
}

/// Coupled derivative: dx_i = A x_i + f(x_i) + B u_i, dw = adaptation rates.
[[nodiscard]] inline std::pair<Vector, Vector> system_derivative(const SystemState& state,
                                                                 const Graph& graph,
                                                                 const PlantModel& plant,
                                                                 const GainSet& gains,
                                                                 const NonlinearityHook& f) {
  const int n = graph.n;
  const int d = plant.d;
  require(state.x.size() == n * d, "state size must equal N*d");
  require(gains.K_u.cols() == d && gains.K_u.rows() == plant.p,
          "gain dimensions must match the plant");
  const Vector u = control_inputs(state, graph, gains.K_u);
  Vector dx(n * d);
  for (int i = 0; i < n; ++i) {
    const auto xi = state.x.segment(i * d, d);
    dx.segment(i * d, d) = plant.A * xi + plant.B * u.segment(i * plant.p, plant.p);
    if (!f.is_none()) dx.segment(i * d, d) += f.eval(xi);
  }
  return {std::move(dx), weight_rates(state, gains.K_w)};
}

/// Topology switch: every pair that is an edge of `new_graph` but not of
/// `old_graph` has its weight reset to exactly 1; all other weights (kept
/// edges, dropped edges, never-edges) continue unchanged.
[[nodiscard]] inline SystemState apply_switch(SystemState state, const Graph& old_graph,
                                              const Graph& new_graph) {
  require(old_graph.n == new_graph.n, "node-count mismatch");
  require(state.weights.n == new_graph.n, "weight state node count mismatch");
  for (auto [i, k] : new_graph.edges) {
    if (!old_graph.has_edge(i, k)) state.weights.at(i, k) = 1.0;
  }
  return state;
}

}  // namespace agpc
