#include "emlq/cli.hpp"

#include "emlq/acceptance.hpp"
#include "emlq/advertising.hpp"
#include "emlq/config.hpp"
#include "emlq/cost.hpp"
#include "emlq/csv.hpp"
#include "emlq/errors.hpp"
#include "emlq/scenarios.hpp"
#include "emlq/simulate.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

namespace emlq {

namespace {

namespace fs = std::filesystem;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Largest Lambda triangle (in doubles) the gamma and simulate subcommands
// will allocate.
constexpr double kTriangleLimit = 6e7;

struct Flags {
  std::string config, out = "out", theta, star;
  std::uint64_t seed = 0;
  int paths = 0, max_iter = 0, threads = 1;
  double dt = 0.0, tol = 0.0, damping = 0.0;
};

struct Context {
  RunConfig cfg;
  fs::path out;
  std::vector<std::pair<std::string, std::string>> info;  // appended to run_info
  bool paths_given = false;
};

void add_run_flags(CLI::App* sub, Flags& f, std::map<std::string, CLI::Option*>& opts) {
  opts["config"] = sub->add_option("--config", f.config, "configuration file")->required();
  opts["out"] = sub->add_option("--out", f.out, "output directory");
  opts["seed"] = sub->add_option("--seed", f.seed, "master seed");
  opts["paths"] = sub->add_option("--paths", f.paths, "Monte Carlo paths");
  opts["dt"] = sub->add_option("--dt", f.dt, "time step");
  opts["tol"] = sub->add_option("--tol", f.tol, "fixed-point tolerance");
  opts["max-iter"] = sub->add_option("--max-iter", f.max_iter, "fixed-point iteration cap");
  opts["damping"] = sub->add_option("--damping", f.damping, "fixed-point damping in (0,1]");
  opts["theta"] = sub->add_option("--theta", f.theta, "window policy: full or const:VALUE");
  opts["star"] = sub->add_option("--star", f.star, "anticipated window: window or adjoint");
  opts["threads"] = sub->add_option("--threads", f.threads, "worker threads for Monte Carlo");
}

// Flags override the file. Re-checks what the parser checks for the file.
void apply_flags(RunConfig& cfg, const Flags& f, const std::map<std::string, CLI::Option*>& o,
                 bool* paths_given) {
  auto given = [&](const char* k) { return o.at(k)->count() > 0; };
  if (given("seed")) cfg.seed = f.seed;
  if (given("paths")) {
    if (f.paths < 1) throw ConfigError("--paths must be >= 1");
    cfg.paths = f.paths;
  }
  *paths_given = given("paths");
  if (given("dt")) {
    if (!(f.dt > 0.0)) throw ConfigError("--dt must be positive");
    cfg.dt = f.dt;
  }
  if (given("tol")) {
    if (!(f.tol > 0.0)) throw ConfigError("--tol must be positive");
    cfg.solver.tol = f.tol;
  }
  if (given("max-iter")) {
    if (f.max_iter < 1) throw ConfigError("--max-iter must be >= 1");
    cfg.solver.max_iter = f.max_iter;
  }
  if (given("damping")) {
    if (!(f.damping > 0.0 && f.damping <= 1.0)) throw ConfigError("--damping must lie in (0, 1]");
    cfg.solver.damping = f.damping;
  }
  if (given("theta")) cfg.solver.theta = parse_theta(f.theta);
  if (given("star")) cfg.adjoint.star = parse_star_variant(f.star);
  if (given("threads")) {
    if (f.threads < 1) throw ConfigError("--threads must be >= 1");
    cfg.threads = f.threads;
  }
}

void write_run_info(const Context& ctx, const std::string& subcommand) {
  CsvTable t({"key", "value"});
  t.add({"subcommand", subcommand});
  for (const auto& [k, v] : describe(ctx.cfg)) t.add({k, v});
  for (const auto& [k, v] : ctx.info) t.add({k, v});
  t.write((ctx.out / "run_info.csv").string());
}

std::vector<std::string> entry_names(const std::string& prefix, int rows, int cols) {
  std::vector<std::string> out;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out.push_back(prefix + "_" + std::to_string(i) + std::to_string(j));
  return out;
}

void push_entries(std::vector<double>& row, const Mat& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
}

Problem game_problem(const RunConfig& cfg, const char* sub) {
  Problem p = build_problem(cfg);
  if (!p.has_game)
    throw ConfigError(std::string(sub) + " needs a game scenario (advertising or raw)");
  return p;
}

void check_triangle_size(const Problem& p) {
  const double N = p.grid.steps();
  const int d = p.blocks.dim();
  const double entries = 0.5 * N * N * d * d;
  if (entries > kTriangleLimit) {
    std::ostringstream msg;
    msg << "the Lambda triangle at dt = " << p.grid.dt() << " on [0, " << p.grid.horizon()
        << "] needs about " << std::setprecision(3) << entries * 8e-9
        << " GB; use a coarser --dt";
    throw ConfigError(msg.str());
  }
}

int run_riccati(Context& ctx, std::ostream& out) {
  const Problem p = game_problem(ctx.cfg, "riccati");
  const int N = p.grid.steps();
  const int n = p.coeffs.n;
  std::vector<std::string> head = {"t"};
  for (auto& s : entry_names("pi1", n, n)) head.push_back(s);
  for (auto& s : entry_names("pi2", n, n)) head.push_back(s);
  head.push_back("xi1_min_eig");
  head.push_back("xi2_min_eig");
  CsvTable ric(head);
  for (int k = 0; k <= N; ++k) {
    std::vector<double> row = {p.grid.node(k)};
    push_entries(row, p.riccati.pi1[k]);
    push_entries(row, p.riccati.pi2[k]);
    row.push_back(p.assumptions.xi1_min_eig[k]);
    row.push_back(p.assumptions.xi2_min_eig[k]);
    ric.add_numbers(row);
  }
  ric.write((ctx.out / "riccati.csv").string());

  CsvTable lines({"id", "formula", "max_residual", "pass"});
  std::vector<std::string> rhead = {"t"};
  for (const auto& l : p.assumptions.lines) {
    lines.add({l.id, l.formula, format_number(l.max_residual), l.pass ? "true" : "false"});
    rhead.push_back(l.id);
  }
  lines.write((ctx.out / "assumptions.csv").string());
  CsvTable res(rhead);
  for (int k = 0; k <= N; ++k) {
    std::vector<double> row = {p.grid.node(k)};
    for (const auto& l : p.assumptions.lines) row.push_back(l.residual[k]);
    res.add_numbers(row);
  }
  res.write((ctx.out / "assumption_residuals.csv").string());

  for (const char* g : {"A1", "A2", "A3"})
    ctx.info.push_back({std::string("assumption_") + g, p.assumptions.group_ok(g) ? "pass" : "fail"});
  out << "Pi1(0) = " << format_number(p.riccati.pi1[0](0, 0))
      << ", Pi2(0) = " << format_number(p.riccati.pi2[0](0, 0)) << "\n";
  for (const auto& l : p.assumptions.lines)
    out << "  " << l.id << " " << (l.pass ? "pass" : "FAIL") << "  max residual "
        << format_number(l.max_residual) << "\n";
  write_run_info(ctx, "riccati");
  return kExitOk;
}

// Writes the trace and run info for a Gamma/Lambda run; true if converged.
bool report_gamma(Context& ctx, const GammaLambdaSolution& gl, std::ostream& err) {
  CsvTable trace({"iteration", "defect"});
  for (std::size_t i = 0; i < gl.trace.size(); ++i)
    trace.add({format_number(static_cast<int>(i + 1)), format_number(gl.trace[i])});
  trace.write((ctx.out / "gamma_trace.csv").string());
  ctx.info.push_back({"gamma_converged", gl.converged ? "true" : "false"});
  ctx.info.push_back({"gamma_iterations", format_number(gl.iterations)});
  ctx.info.push_back({"gamma_residual", format_number(gl.residual)});
  if (!gl.converged) {
    err << "Gamma/Lambda iteration did not converge after " << gl.iterations
        << " iterations (residual " << format_number(gl.residual) << ")\n";
    if (!gl.diagnostics.empty()) err << gl.diagnostics << "\n";
    err << "residual trace:";
    for (double v : gl.trace) err << " " << format_number(v);
    err << "\n";
  }
  return gl.converged;
}

int run_gamma(Context& ctx, std::ostream& out, std::ostream& err) {
  const Problem p = build_problem(ctx.cfg);
  if (!p.has_blocks) throw ConditioningError("leader blocks unavailable: " + p.blocks_error);
  check_triangle_size(p);
  const GammaLambdaSolution gl = solve_gamma_lambda(p.blocks, p.xi3, ctx.cfg.solver);
  const bool ok = report_gamma(ctx, gl, err);
  const int d = p.blocks.dim();
  const int N = p.grid.steps();
  std::vector<std::string> head = {"t"};
  for (auto& s : entry_names("gamma", d, d)) head.push_back(s);
  for (auto& s : entry_names("lambda_diag", d, d)) head.push_back(s);
  for (auto& s : entry_names("window", d, d)) head.push_back(s);
  head.push_back("node_defect");
  CsvTable table(head);
  for (int k = 0; k <= N; ++k) {
    std::vector<double> row = {p.grid.node(k)};
    push_entries(row, gl.gamma[k]);
    push_entries(row, gl.lambda.at(k, k));
    push_entries(row, gl.window[k]);
    row.push_back(k < static_cast<int>(gl.node_defect.size()) ? gl.node_defect[k] : NAN);
    table.add_numbers(row);
  }
  table.write((ctx.out / "gamma.csv").string());
  write_run_info(ctx, "gamma");
  if (!ok) return kExitSolver;
  out << "converged in " << gl.iterations << " iterations, residual "
      << format_number(gl.residual) << "\n";
  return kExitOk;
}

int run_simulate(Context& ctx, std::ostream& out, std::ostream& err) {
  const Problem p = game_problem(ctx.cfg, "simulate");
  if (!p.has_blocks) throw ConditioningError("leader blocks unavailable: " + p.blocks_error);
  check_triangle_size(p);
  const GammaLambdaSolution gl = solve_gamma_lambda(p.blocks, p.xi3, ctx.cfg.solver);
  if (!report_gamma(ctx, gl, err)) {
    write_run_info(ctx, "simulate");
    return kExitSolver;
  }
  const FeedbackGains gains =
      synthesize_gains(p.coeffs, p.riccati, p.blocks, gl, ctx.cfg.solver.cond_cap);
  SimulationOptions so;
  so.n_paths = ctx.cfg.paths;
  so.seed = ctx.cfg.seed;
  so.threads = ctx.cfg.threads;
  so.noise_free = ctx.cfg.noise_free;
  const PathEnsemble ens = simulate_closed_loop(p.coeffs, p.blocks, gl, gains, so);

  std::vector<std::string> head = {"t"};
  for (int i = 0; i < ens.dim; ++i) {
    head.push_back("mean_phi" + std::to_string(i));
    head.push_back("sd_phi" + std::to_string(i));
  }
  for (std::size_t c = 0; c < ens.control_dims.size(); ++c)
    for (int i = 0; i < ens.control_dims[c]; ++i)
      head.push_back("mean_u" + std::to_string(c + 1) + "_" + std::to_string(i));
  CsvTable summary(head);
  const int P = ens.n_paths;
  for (std::size_t cp = 0; cp < ens.checkpoints.size(); ++cp) {
    const int ci = static_cast<int>(cp);
    std::vector<double> row = {p.grid.node(ens.checkpoints[cp])};
    Vec mean = Vec::Zero(ens.dim), sq = Vec::Zero(ens.dim);
    for (int q = 0; q < P; ++q) mean += ens.state(q, ci);
    mean /= P;
    for (int q = 0; q < P; ++q) sq += (ens.state(q, ci) - mean).array().square().matrix();
    for (int i = 0; i < ens.dim; ++i) {
      row.push_back(mean(i));
      row.push_back(P > 1 ? std::sqrt(sq(i) / (P - 1)) : 0.0);
    }
    for (std::size_t c = 0; c < ens.control_dims.size(); ++c) {
      Vec u = Vec::Zero(ens.control_dims[c]);
      for (int q = 0; q < P; ++q) u += ens.control(static_cast<int>(c), q, ci);
      u /= P;
      for (int i = 0; i < u.size(); ++i) row.push_back(u(i));
    }
    summary.add_numbers(row);
  }
  summary.write((ctx.out / "summary.csv").string());

  // Closed form of the leader cost; the follower has none in closed loop.
  std::string leader_closed;
  try {
    const int N = p.grid.steps();
    const std::vector<Vec> zero(N + 1, Vec::Zero(p.coeffs.k2));
    const AdjointSolution eta1 =
        solve_eta1(p.coeffs, p.riccati.pi1, p.riccati.xi1, zero, ctx.cfg.adjoint);
    const AdjointSolution eta2 = solve_eta2(p.coeffs, p.barred, p.riccati.pi2, p.riccati.xi2,
                                            {}, eta1, ctx.cfg.adjoint);
    leader_closed = format_number(leader_closed_form_cost(p.riccati.pi2, eta2, p.coeffs.x0));
  } catch (const std::exception& e) {
    err << "leader closed form unavailable: " << e.what() << "\n";
  }
  CsvTable costs({"player", "mc_value", "std_error", "paths", "closed_form"});
  for (int player : {1, 2}) {
    const CostEstimate est = evaluate_cost(ens, player);
    costs.add({format_number(player), format_number(est.value), format_number(est.std_error),
               format_number(est.n_paths), player == 2 ? leader_closed : ""});
    out << "J" << player << " = " << format_number(est.value) << " +- "
        << format_number(est.std_error) << "\n";
  }
  costs.write((ctx.out / "costs.csv").string());
  write_run_info(ctx, "simulate");
  return kExitOk;
}

int run_export(Context& ctx, std::ostream& out) {
  if (ctx.cfg.scenario != ScenarioKind::Advertising)
    throw ConfigError("export-figures needs the advertising scenario");
  const TimeGrid grid = build_time_grid(ctx.cfg.horizon, ctx.cfg.dt);
  const RiccatiSolution ric = solve_riccati(build_scenario(ctx.cfg.advertising, grid));
  const std::vector<FigureRow> rows = figure_data(ctx.cfg.advertising, ric);
  export_figure_data(rows, (ctx.out / "figures.csv").string());
  out << "wrote " << rows.size() << " rows to " << (ctx.out / "figures.csv").string() << "\n";
  write_run_info(ctx, "export-figures");
  return kExitOk;
}

int run_verify(Context& ctx, std::ostream& out) {
  AcceptanceOptions opt;
  opt.seed = ctx.cfg.seed;
  opt.threads = ctx.cfg.threads;
  if (ctx.paths_given) opt.paths = ctx.cfg.paths;
  opt.work_dir = (ctx.out / "acceptance_work").string();
  const auto results = run_acceptance(opt);
  CsvTable table({"id", "name", "pass"});
  bool all = true;
  for (const auto& r : results) {
    out << format_result(r) << "  (" << std::fixed << std::setprecision(1) << r.seconds
        << " s)\n";
    out.unsetf(std::ios::floatfield);
    table.add({format_number(r.id), r.name, r.pass ? "true" : "false"});
    all = all && r.pass;
  }
  table.write((ctx.out / "acceptance.csv").string());
  ctx.info.push_back({"acceptance_paths", format_number(opt.paths)});
  ctx.info.push_back({"acceptance", all ? "pass" : "fail"});
  write_run_info(ctx, "verify");
  return all ? kExitOk : kExitVerify;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stackelberg games with elephant memory: solvers and checks"};
  app.require_subcommand(1);
  Flags flags;
  std::map<std::string, std::map<std::string, CLI::Option*>> opts;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"riccati", "solve Pi1/Pi2 and check (A1)-(A3)"},
      {"gamma", "solve the Gamma/Lambda system"},
      {"simulate", "closed-loop Monte Carlo under the synthesized strategy"},
      {"verify", "run the acceptance suite"},
      {"export-figures", "value function curves for the advertising model"},
  };
  std::map<std::string, CLI::App*> handles;
  for (const auto& [name, desc] : subs) {
    handles[name] = app.add_subcommand(name, desc);
    add_run_flags(handles[name], flags, opts[name]);
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  std::string name;
  for (const auto& [n, h] : handles)
    if (h->parsed()) name = n;

  Context ctx;
  try {
    ctx.cfg = load_config(flags.config);
    apply_flags(ctx.cfg, flags, opts[name], &ctx.paths_given);
    ctx.out = flags.out;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + flags.out);
    if (name == "riccati") return run_riccati(ctx, out);
    if (name == "gamma") return run_gamma(ctx, out, err);
    if (name == "simulate") return run_simulate(ctx, out, err);
    if (name == "export-figures") return run_export(ctx, out);
    return run_verify(ctx, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    err << "solver did not converge: " << e.what() << "\n";
    return kExitSolver;
  } catch (const ConditioningError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const DivergenceError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace emlq
