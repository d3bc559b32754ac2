// Command-line front end: synthesis, simulation, trace verification, and
// end-to-end reproduction of the two bundled benchmark scenarios.

#include <agpc/agpc.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using agpc::Matrix;
using agpc::Vector;

[[nodiscard]] std::string fmt(double value, int digits = 9) {
  return agpc::detail::fmt_sig(value, digits);
}

[[nodiscard]] std::string fmt_row(const Matrix& m, int digits = 6) {
  std::ostringstream oss;
  oss << "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (r + c > 0) oss << ", ";
      oss << fmt(m(r, c), digits);
    }
    if (m.rows() > 1 && r + 1 < m.rows()) oss << ";";
  }
  oss << "]";
  return oss.str();
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << fmt(m(r, c), 12);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed while writing output file: " + path);
}

struct CheckTable {
  struct Row {
    std::string name;
    bool pass;
    std::string detail;
  };
  std::vector<Row> rows;

  void add(const std::string& name, bool pass, std::string detail = "") {
    rows.push_back({name, pass, std::move(detail)});
  }
  [[nodiscard]] bool all_pass() const {
    for (const Row& r : rows)
      if (!r.pass) return false;
    return true;
  }
  void print() const {
    for (const Row& r : rows) {
      std::cout << (r.pass ? "[ ok ] " : "[FAIL] ") << r.name;
      if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
      std::cout << "\n";
    }
  }
};

// Reference gain values documented for the bundled example1 configuration.
const Matrix& reference_ku_example1() {
  static const Matrix k = [] {
    Matrix m(1, 4);
    m << 0.2653, 1.0549, 0.7878, 0.6790;
    return m;
  }();
  return k;
}

const Matrix& reference_kw_example1() {
  static const Matrix k = [] {
    Matrix m(4, 4);
    m << 0.0704, 0.2799, 0.2090, 0.1801,
         0.2799, 1.1128, 0.8311, 0.7163,
         0.2090, 0.8311, 0.6207, 0.5349,
         0.1801, 0.7163, 0.5349, 0.4610;
    return m;
  }();
  return k;
}

[[nodiscard]] agpc::LmiMargin margin_for(const agpc::GainSet& gains,
                                         const agpc::PlantModel& plant, const Matrix& q,
                                         double mu) {
  const Matrix tilde = agpc::symmetrized(gains.certificate.inverse());
  if (gains.mode == agpc::GainMode::linear) {
    return agpc::lmi_margin_linear(tilde, gains.gamma, plant, q);
  }
  return agpc::lmi_margin_lipschitz(tilde, gains.gamma, plant, q, mu);
}

[[nodiscard]] double max_pairwise_state_difference(const Vector& x, int n) {
  const auto d = x.size() / n;
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      worst = std::max(worst, (x.segment(i * d, d) - x.segment(k * d, d)).norm());
    }
  }
  return worst;
}

/// Dense complete-graph projection quadratic form, assembled the slow way as
/// an independent cross-check of the per-agent evaluation.
[[nodiscard]] double kron_projection_quadratic(const Vector& x, int n, const Matrix& s) {
  const auto d = s.rows();
  const Matrix proj =
      Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Matrix big = Matrix::Zero(n * d, n * d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) big.block(i * d, k * d, d, d) = proj(i, k) * s;
  }
  return x.dot(big * x);
}

int run_synth(const std::string& scenario_path, const std::optional<double>& eps,
              double slack, const std::string& out_dir) {
  const agpc::Scenario sc = agpc::load_scenario(scenario_path);
  agpc::GainSet gains;
  if (eps) {
    const agpc::EpsSynthesis result = agpc::synthesize_eps_for(sc, *eps);
    gains = result.gains;
    std::cout << "bounded-gain search accepted gamma = " << fmt(result.gamma) << "\n";
  } else {
    gains = agpc::synthesize_for(sc, slack);
  }

  agpc::PerformanceSpec spec = sc.performance;
  spec.gamma = gains.gamma;
  const double residual = agpc::riccati_residual(gains.certificate, sc.plant, spec, gains.mode);
  const agpc::LmiMargin margin = margin_for(gains, sc.plant, sc.performance.Q, sc.performance.mu);

  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  write_matrix_csv((dir / "gains_ku.csv").string(), gains.K_u);
  write_matrix_csv((dir / "gains_kw.csv").string(), gains.K_w);
  write_matrix_csv((dir / "certificate.csv").string(), gains.certificate);

  std::cout << "mode      = " << (gains.mode == agpc::GainMode::linear ? "linear" : "lipschitz")
            << "\n"
            << "gamma     = " << fmt(gains.gamma) << "\n"
            << "K_u       = " << fmt_row(gains.K_u) << "\n"
            << "residual  = " << fmt(residual) << "  (certifies when <= 1e-8)\n"
            << "margin    = " << fmt(margin.value) << "  (feasible: "
            << (margin.feasible ? "yes" : "no") << ")\n";
  if (!margin.input_norm_ok) {
    std::cout << "note: bounded-gain feasibility margins assume lambda_max(B B') <= 1;"
                 " this plant violates that normalization, margin is diagnostic only\n";
  }
  std::cout << "wrote " << (dir / "gains_ku.csv").string() << ", "
            << (dir / "gains_kw.csv").string() << ", "
            << (dir / "certificate.csv").string() << "\n";
  return 0;
}

int run_simulate(const std::string& scenario_path, const std::string& out_path, double slack) {
  const agpc::Scenario sc = agpc::load_scenario(scenario_path);
  const agpc::GainSet gains = agpc::synthesize_for(sc, slack);
  const agpc::Trace trace = agpc::simulate(agpc::make_problem(sc, gains));
  agpc::export_trace(trace, out_path);

  const agpc::CostReport cost = agpc::guaranteed_cost_bound(trace, gains);
  const agpc::TraceSample& last = trace.samples.back();
  std::cout << "scenario            = " << sc.name << "\n"
            << "samples             = " << trace.samples.size() << "\n"
            << "final time          = " << fmt(last.t) << "\n"
            << "final disagreement  = " << fmt(last.disagreement) << "\n"
            << "J_x(final)          = " << fmt(cost.J_x_final) << "\n"
            << "J*                  = " << fmt(cost.J_star) << "  (initial "
            << fmt(cost.J_star_initial) << " + state " << fmt(cost.J_star_state)
            << ", horizon-truncated)\n"
            << "tail estimate       = " << fmt(cost.tail_estimate) << "\n"
            << "bound satisfied     = " << (cost.satisfied ? "yes" : "NO") << "  (margin "
            << fmt(cost.margin) << ")\n"
            << "wrote " << out_path << " and " << out_path << ".meta\n";
  return cost.satisfied ? 0 : 1;
}

int run_verify(const std::string& trace_path) {
  const agpc::ImportedTrace imported = agpc::import_trace(trace_path);
  const agpc::VerifyReport report = agpc::verify_trace(imported);
  std::cout << report.summary();
  std::cout << (report.pass() ? "verification passed\n" : "verification FAILED\n");
  return report.pass() ? 0 : 1;
}

int reproduce_example1(const std::string& dir) {
  const agpc::Scenario sc =
      agpc::load_scenario((std::filesystem::path(dir) / "example1.json").string());
  const agpc::GainSet gains = agpc::synthesize_for(sc);
  agpc::PerformanceSpec spec = sc.performance;
  spec.gamma = gains.gamma;

  std::cout << "synthesized K_u = " << fmt_row(gains.K_u) << "\n"
            << "reference   K_u = " << fmt_row(reference_ku_example1()) << "\n";

  CheckTable table;
  const double ku_dev = (gains.K_u - reference_ku_example1()).cwiseAbs().maxCoeff();
  const double kw_dev = (gains.K_w - reference_kw_example1()).cwiseAbs().maxCoeff();
  table.add("K_u matches reference values (tol 5e-4)", ku_dev < 5e-4,
            "max deviation " + fmt(ku_dev, 4));
  table.add("K_w matches reference values (tol 5e-4)", kw_dev < 5e-4,
            "max deviation " + fmt(kw_dev, 4));
  table.add("K_w equals K_u'K_u (tol 1e-12)",
            (gains.K_w - gains.K_u.transpose() * gains.K_u).cwiseAbs().maxCoeff() < 1e-12);
  const double residual = agpc::riccati_residual(gains.certificate, sc.plant, spec, gains.mode);
  table.add("certificate residual <= 1e-8", residual <= 1e-8, "residual " + fmt(residual, 4));

  const agpc::Trace trace = agpc::simulate(agpc::make_problem(sc, gains));
  const double state_dev =
      max_pairwise_state_difference(trace.samples.back().x, sc.agents);
  table.add("max pairwise state difference < 1e-3 at horizon", state_dev < 1e-3,
            fmt(state_dev, 4) + " at t = " + fmt(trace.samples.back().t, 4));

  bool nondecreasing = true;
  for (std::size_t j = 1; j < trace.samples.size(); ++j) {
    nondecreasing = nondecreasing && trace.samples[j].cumulative_cost >=
                                         trace.samples[j - 1].cumulative_cost - 1e-12;
  }
  table.add("cumulative cost nondecreasing", nondecreasing);

  const agpc::CostReport cost = agpc::guaranteed_cost_bound(trace, gains);
  bool within = true;
  for (const agpc::TraceSample& s : trace.samples) {
    within = within && s.cumulative_cost <= cost.J_star * (1.0 + 1e-12) + 1e-12;
  }
  table.add("cumulative cost within guaranteed bound at every sample", within,
            "final " + fmt(cost.J_x_final) + " vs bound " + fmt(cost.J_star));

  const double oracle =
      kron_projection_quadratic(sc.initial_state, sc.agents, gains.certificate);
  table.add("initial-cost term matches dense quadratic-form oracle (1e-8 rel)",
            std::abs(oracle - cost.J_star_initial) <= 1e-8 * (1.0 + std::abs(oracle)),
            "oracle " + fmt(oracle));

  table.print();
  if (!table.all_pass()) {
    std::cout << "\nnote: the reference gains satisfy the design inequality strictly\n"
                 "(margin below the feasibility boundary), while this toolkit solves the\n"
                 "boundary equality; both certify the same cost bound, but the numeric\n"
                 "values differ. Consensus residual at the 20 s horizon is likewise a\n"
                 "property of this switching realization, not of the gain design.\n";
  }
  return table.all_pass() ? 0 : 1;
}

int reproduce_example2(const std::string& dir) {
  const agpc::Scenario sc =
      agpc::load_scenario((std::filesystem::path(dir) / "example2.json").string());
  agpc::PerformanceSpec spec = sc.performance;

  CheckTable table;
  const agpc::GainSet gains = agpc::synthesize_for(sc, agpc::kInteriorSlack);
  table.add("certificate is symmetric positive definite", agpc::is_spd(gains.certificate));
  const double residual = agpc::riccati_residual(gains.certificate, sc.plant, spec, gains.mode);
  table.add("certificate residual <= 1e-8", residual <= 1e-8, "residual " + fmt(residual, 4));
  const agpc::LmiMargin margin = margin_for(gains, sc.plant, spec.Q, spec.mu);
  table.add("gain-certificate feasibility margin negative",
            margin.feasible && margin.input_norm_ok, "margin " + fmt(margin.value, 4));

  const agpc::Trace trace = agpc::simulate(agpc::make_problem(sc, gains));
  const double final_dis = trace.samples.back().disagreement;
  table.add("disagreement < 1e-3 at horizon", final_dis < 1e-3,
            fmt(final_dis, 4) + " at t = " + fmt(trace.samples.back().t, 4));

  const agpc::CostReport cost = agpc::guaranteed_cost_bound(trace, gains);
  bool within = true;
  for (const agpc::TraceSample& s : trace.samples) {
    within = within && s.cumulative_cost <= cost.J_star * (1.0 + 1e-12) + 1e-12;
  }
  table.add("cumulative cost within guaranteed bound at every sample", within,
            "final " + fmt(cost.J_x_final) + " vs bound " + fmt(cost.J_star));

  // Bounded-gain trend: larger certificate cap -> larger guaranteed cost.
  const agpc::EpsSynthesis eps5 = agpc::synthesize_eps_for(sc, 5.0);
  const agpc::EpsSynthesis eps10 = agpc::synthesize_eps_for(sc, 10.0);
  const agpc::Trace trace5 = agpc::simulate(agpc::make_problem(sc, eps5.gains));
  const agpc::Trace trace10 = agpc::simulate(agpc::make_problem(sc, eps10.gains));
  const double jstar5 = agpc::guaranteed_cost_bound(trace5, eps5.gains).J_star;
  const double jstar10 = agpc::guaranteed_cost_bound(trace10, eps10.gains).J_star;
  const double ku5 = agpc::spectral_norm(eps5.gains.K_u);
  const double ku10 = agpc::spectral_norm(eps10.gains.K_u);
  std::cout << "eps =  5: gamma " << fmt(eps5.gamma, 6) << ", J* " << fmt(jstar5, 6)
            << ", ||K_u|| " << fmt(ku5, 6) << "\n"
            << "eps = 10: gamma " << fmt(eps10.gamma, 6) << ", J* " << fmt(jstar10, 6)
            << ", ||K_u|| " << fmt(ku10, 6) << "\n";
  table.add("guaranteed cost grows with the certificate cap", jstar10 > jstar5,
            fmt(jstar5, 6) + " -> " + fmt(jstar10, 6));

  table.print();
  return table.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive guaranteed-performance consensus toolkit"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_path = "trace.csv";
  std::string out_dir = ".";
  std::string trace_path;
  std::string which;
  std::string scenario_dir = agpc::default_scenario_dir();
  double slack = 0.0;
  std::optional<double> eps;

  CLI::App* synth = app.add_subcommand("synth", "synthesize protocol gains for a scenario");
  synth->add_option("--scenario", scenario_path, "scenario file")->required();
  synth->add_option("--eps", eps, "certificate cap for the bounded-gain search");
  synth->add_option("--slack", slack, "interior slack added to the constant term");
  synth->add_option("--out-dir", out_dir, "directory for the gain/certificate CSVs");

  CLI::App* simulate = app.add_subcommand("simulate", "synthesize, simulate, and export a trace");
  simulate->add_option("--scenario", scenario_path, "scenario file")->required();
  simulate->add_option("--out", out_path, "trace CSV path");
  simulate->add_option("--slack", slack, "interior slack added to the constant term");

  CLI::App* verify = app.add_subcommand("verify", "re-check an exported trace");
  verify->add_option("--trace", trace_path, "trace CSV path (expects a sibling .meta)")
      ->required();

  CLI::App* reproduce =
      app.add_subcommand("reproduce", "run a bundled benchmark scenario end to end");
  reproduce->add_option("which", which, "example1 or example2")
      ->required()
      ->check(CLI::IsMember({"example1", "example2"}));
  reproduce->add_option("--scenario-dir", scenario_dir, "directory with the bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(scenario_path, eps, slack, out_dir);
    if (simulate->parsed()) return run_simulate(scenario_path, out_path, slack);
    if (verify->parsed()) return run_verify(trace_path);
    if (reproduce->parsed()) {
      return which == "example1" ? reproduce_example1(scenario_dir)
                                 : reproduce_example2(scenario_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
