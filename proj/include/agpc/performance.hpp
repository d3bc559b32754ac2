#pragma once

#include "agpc/simulate.hpp"

#include <limits>

namespace agpc {

// ===========================================================================
// Guaranteed-cost bound
// ===========================================================================

struct CostReport {
  double J_x_final = 0.0;
  double J_star = 0.0;          // J_star_initial + J_star_state
  double J_star_initial = 0.0;  // x(0)^T (L_N kron R) x(0)
  double J_star_state = 0.0;    // gamma * integral of x^T (L_N kron K_w) x dt
  bool truncated = true;        // state integral cut at the horizon
  double tail_estimate = 0.0;   // last integrand value x characteristic decay time
  bool satisfied = false;       // J_x_final <= J_star
  double margin = 0.0;          // J_star - J_x_final
};

namespace detail {

/// Exponential-decay tail estimate for a nonnegative integrand series:
/// last value divided by the fitted decay rate over the trailing window.
/// NaN when the integrand is not decaying (flagged, never silently used).
[[nodiscard]] inline double decay_tail_estimate(const std::vector<TraceSample>& samples,
                                                const std::vector<double>& integrand) {
  const std::size_t count = samples.size();
  if (count < 4) return 0.0;
  const double last = integrand.back();
  double peak = 0.0;
  for (const double v : integrand) peak = std::max(peak, v);
  if (last <= 1e-12 * std::max(1.0, peak)) return 0.0;
  const std::size_t start = count - std::max<std::size_t>(2, count / 5);
  const double v0 = integrand[start];
  const double t0 = samples[start].t;
  const double t1 = samples.back().t;
  if (v0 <= 0.0 || last <= 0.0 || t1 <= t0) return std::numeric_limits<double>::quiet_NaN();
  const double decay_rate = std::log(v0 / last) / (t1 - t0);
  if (decay_rate <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return last / decay_rate;
}

inline void check_trace_gains(const Trace& trace, const GainSet& gains) {
  const bool dims_ok = gains.K_u.rows() == trace.gains.K_u.rows() &&
                       gains.K_u.cols() == trace.gains.K_u.cols();
  if (!dims_ok || (gains.K_u - trace.gains.K_u).cwiseAbs().maxCoeff() > 1e-9 ||
      (gains.certificate - trace.gains.certificate).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("gains/trace mismatch");
  }
}

}  // namespace detail

/// Cumulative performance cost along the trace: the trapezoid integral of
/// cost_rate(x, Q, N), one value per sample.
[[nodiscard]] inline Vector cumulative_cost(const Trace& trace, const Matrix& q) {
  const int n = trace.agents();
  Vector series(static_cast<Eigen::Index>(trace.samples.size()));
  double acc = 0.0;
  double prev_rate = 0.0;
  for (std::size_t j = 0; j < trace.samples.size(); ++j) {
    const double rate = cost_rate(trace.samples[j].x, q, n);
    if (j > 0) {
      acc += 0.5 * (trace.samples[j].t - trace.samples[j - 1].t) * (prev_rate + rate);
    }
    prev_rate = rate;
    series[static_cast<Eigen::Index>(j)] = acc;
  }
  return series;
}

/// The guaranteed-cost bound J* = J*_{x(0)} + J*_{x(t)} for the trace's
/// gains: the initial term is a quadratic form in the certificate, and the
/// state term integrates gamma * x^T (L_N kron K_w) x (K_w equals
/// certificate B B^T certificate, which makes the integrand computable from
/// the gains alone). The state integral is horizon-truncated; a decay-based
/// tail estimate ships as metadata next to it.
[[nodiscard]] inline CostReport guaranteed_cost_bound(const Trace& trace,
                                                      const GainSet& gains) {
  detail::check_trace_gains(trace, gains);
  const int n = trace.agents();
  require(!trace.samples.empty(), "empty trace");

  CostReport report;
  report.J_star_initial =
      detail::projection_quadratic(trace.samples.front().x, n, gains.certificate);

  std::vector<double> integrand(trace.samples.size());
  for (std::size_t j = 0; j < trace.samples.size(); ++j) {
    integrand[j] =
        gains.gamma * detail::projection_quadratic(trace.samples[j].x, n, gains.K_w);
  }
  double acc = 0.0;
  for (std::size_t j = 1; j < trace.samples.size(); ++j) {
    acc += 0.5 * (trace.samples[j].t - trace.samples[j - 1].t) *
           (integrand[j - 1] + integrand[j]);
  }
  report.J_star_state = acc;
  report.J_star = report.J_star_initial + report.J_star_state;
  report.truncated = true;
  report.tail_estimate = detail::decay_tail_estimate(trace.samples, integrand);
  report.J_x_final = trace.samples.back().cumulative_cost;
  report.satisfied = report.J_x_final <= report.J_star;
  report.margin = report.J_star - report.J_x_final;
  return report;
}

// ===========================================================================
// Lyapunov diagnostic
// ===========================================================================

struct TraceAnalysis {
  Vector disagreement;  // per sample
  Vector V;             // per sample
  Vector weight_max;    // per pair: max observed weight over the trace
  std::vector<int> interior_increases;           // sample indices with dV > 1e-6 in-segment
  std::vector<std::pair<int, double>> switch_jumps;  // (sample index at switch, dV)
};

/// Observed per-pair weight maxima along a trace.
[[nodiscard]] inline Vector weight_maxima(const Trace& trace) {
  require(!trace.samples.empty(), "empty trace");
  Vector maxima = trace.samples.front().weights;
  for (const TraceSample& s : trace.samples) maxima = maxima.cwiseMax(s.weights);
  return maxima;
}

/// Post-hoc stand-ins for the per-pair weight bounds: observed maxima plus
/// a hair, so the bound-gap term stays nonnegative.
[[nodiscard]] inline Vector gamma_estimates(const Trace& trace) {
  return weight_maxima(trace).array() + 1e-9;
}

/// Evaluate the segment-wise Lyapunov function along the trace:
///   V = sum_i y_i^T R y_i  +  sum over current edges of (w - 1)^2
///     + (2 gamma / N) * sum over all pairs of (gamma_est - w).
/// Within a switch-free segment V must not increase (beyond 1e-6); jumps at
/// switch instants are logged as events, not failures.
[[nodiscard]] inline TraceAnalysis lyapunov_diagnostic(const Trace& trace,
                                                       const GainSet& gains,
                                                       const Vector& gamma_est) {
  detail::check_trace_gains(trace, gains);
  const int n = trace.agents();
  require(gamma_est.size() == pair_count(n), "gamma estimate size mismatch");
  const auto count = static_cast<Eigen::Index>(trace.samples.size());

  TraceAnalysis analysis;
  analysis.disagreement.resize(count);
  analysis.V.resize(count);
  analysis.weight_max = weight_maxima(trace);

  int prev_segment = -1;
  for (Eigen::Index j = 0; j < count; ++j) {
    const TraceSample& s = trace.samples[j];
    const int segment = trace.schedule.segment_at(s.t);
    const Graph& graph = trace.problem.topologies.graphs[trace.schedule.indices[segment]];

    double v = detail::projection_quadratic(s.x, n, gains.certificate);
    for (auto [i, k] : graph.edges) {
      const double w = s.weights[pair_index(n, i, k)];
      v += (w - 1.0) * (w - 1.0);
    }
    v += (2.0 * gains.gamma / n) * (gamma_est - s.weights).sum();

    analysis.V[j] = v;
    analysis.disagreement[j] = s.disagreement;
    if (j > 0) {
      const double dv = analysis.V[j] - analysis.V[j - 1];
      if (segment != prev_segment) {
        analysis.switch_jumps.emplace_back(static_cast<int>(j), dv);
      } else if (dv > 1e-6) {
        analysis.interior_increases.push_back(static_cast<int>(j));
      }
    }
    prev_segment = segment;
  }
  return analysis;
}

// ===========================================================================
// Lipschitz verification
// ===========================================================================

struct LipschitzReport {
  double max_ratio = 0.0;  // max ||f(x)-f(y)|| / ||x-y|| over sampled pairs
  double margin = 0.0;     // max_ratio / mu (infinity if mu = 0 and ratio > 0)
  bool pass = false;       // max_ratio <= mu * (1 + 1e-9)
};

/// Sampled check of ||f(x) - f(y)|| <= mu ||x - y|| on seeded random pairs
/// drawn from [-10, 10]^dim.
[[nodiscard]] inline LipschitzReport verify_lipschitz(const NonlinearityHook& f, int dim,
                                                      double mu, int sample_count,
                                                      std::uint64_t seed) {
  require(mu >= 0.0, "mu must be nonnegative");
  require(dim >= 1, "dimension must be positive");
  require(sample_count >= 1, "sample count must be positive");
  std::mt19937_64 rng(seed);
  const auto uniform = [&rng]() {
    return 20.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 10.0;
  };
  double max_ratio = 0.0;
  for (int s = 0; s < sample_count; ++s) {
    Vector x(dim), y(dim);
    for (int j = 0; j < dim; ++j) x[j] = uniform();
    for (int j = 0; j < dim; ++j) y[j] = uniform();
    const double dist = (x - y).norm();
    if (dist <= 1e-12) continue;
    max_ratio = std::max(max_ratio, (f.eval(x) - f.eval(y)).norm() / dist);
  }
  LipschitzReport report;
  report.max_ratio = max_ratio;
  report.margin = mu > 0.0 ? max_ratio / mu
                           : (max_ratio > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  report.pass = max_ratio <= mu * (1.0 + 1e-9);
  return report;
}

}  // namespace agpc
