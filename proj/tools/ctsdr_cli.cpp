#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctsdr/io.hpp"
#include "ctsdr/refine.hpp"

namespace fs = std::filesystem;
using namespace ctsdr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitNumerical = 3;

struct RunConfig {
  std::string problem_path;
  std::string benchmark;
  double v0 = 0.5;
  std::vector<double> v0_sweep;
  std::vector<double> window;
  std::vector<int> grid;
  std::string backend = "embedded";
  bool with_standard_sdr = false;
  std::string report = "text";
  std::string out_dir;
  double tol = 0.0;
  int seed = 0;  // reserved; the pipeline is deterministic
  bool dump_sdp_file = false;
};

std::string default_out_dir() {
  if (const char* env = std::getenv("CTSDR_OUT_DIR")) return env;
  return ".";
}

OcpProblem load_problem(const RunConfig& cfg) {
  if (!cfg.problem_path.empty() && !cfg.benchmark.empty())
    throw ProblemError("give either --problem or --benchmark, not both");
  OcpProblem p;
  if (!cfg.problem_path.empty()) {
    p = read_problem(cfg.problem_path);
  } else if (cfg.benchmark == "di" || cfg.benchmark.empty()) {
    p = double_integrator_benchmark(cfg.v0);
  } else if (cfg.benchmark == "wp1") {
    p = waypoint_problem(1);
  } else if (cfg.benchmark == "wp2") {
    p = waypoint_problem(2);
  } else {
    throw ProblemError("unknown benchmark '" + cfg.benchmark + "'");
  }
  if (!cfg.window.empty()) {
    if (cfg.window.size() != 2)
      throw ProblemError("--window expects two comma-separated numbers");
    if (p.num_ctcs() != 1)
      throw ProblemError("--window applies to single-window problems only");
    p.ctcs[0].tau_min = cfg.window[0];
    p.ctcs[0].tau_max = cfg.window[1];
    p = validate(p);
  }
  return p;
}

ShootingGrid make_grid(const RunConfig& cfg, const OcpProblem& p) {
  ShootingGrid grid;
  if (cfg.grid.empty())
    grid.segment_counts.assign(p.num_ctcs() + 1, 10);
  else
    grid.segment_counts = cfg.grid;
  if (grid.num_segments() != p.num_ctcs() + 1)
    throw ProblemError("--grid needs " + std::to_string(p.num_ctcs() + 1) +
                       " segment counts for this problem");
  return grid;
}

PipelineOptions make_options(const RunConfig& cfg, const OcpProblem& p) {
  PipelineOptions opt;
  if (cfg.tol > 0.0) {
    opt.solver.eps_primal = cfg.tol;
    opt.solver.eps_dual = cfg.tol;
    opt.solver.eps_gap = cfg.tol;
  }
  // Waypoint-scale instances keep only the vector-level redundant rows.
  if (p.nx() >= 6) opt.assemble.pruned = true;
  return opt;
}

void check_backend(const std::string& name) {
  backend(name);  // throws on unknown adapter names
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::path dir = cfg.out_dir.empty() ? default_out_dir() : cfg.out_dir;
  fs::create_directories(dir);
  return dir;
}

std::string kv_escape(const Eigen::VectorXd& v) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    os << (i ? "," : "") << format_double(v[i]);
  return os.str();
}

std::string summary_record(const std::string& run_id, const OcpProblem& p,
                           const PipelineResult& r, bool with_timings) {
  std::ostringstream os;
  os << "run=" << run_id << '\n';
  os << "sdp_status=" << to_string(r.sdp_status) << '\n';
  os << "refine_status="
     << (r.refine_status == RefineStatus::converged       ? "converged"
         : r.refine_status == RefineStatus::max_iter      ? "max_iter"
                                                          : "restoration_failure")
     << '\n';
  os << "J_cvx=" << format_double(r.J_cvx) << '\n';
  os << "J_rcvx=" << format_double(r.J_rcvx) << '\n';
  os << "sigma_rel=" << format_double(r.report.sigma_rel) << '\n';
  os << "max_rank1_gap=" << format_double(r.report.max_gap) << '\n';
  os << "crossing_times=" << kv_escape(r.refined.crossing_times) << '\n';
  for (int l = 0; l < p.num_ctcs(); ++l)
    os << "window_" << l + 1 << '=' << format_double(p.ctcs[l].tau_min) << ','
       << format_double(p.ctcs[l].tau_max) << '\n';
  os << "sdp_iterations=" << r.sdp_iterations << '\n';
  if (with_timings) {
    os << "assemble_ms=" << format_double(r.assemble_ms) << '\n';
    os << "solve_ms=" << format_double(r.solve_ms) << '\n';
    os << "extract_ms=" << format_double(r.extract_ms) << '\n';
    os << "refine_ms=" << format_double(r.refine_ms) << '\n';
  }
  return os.str();
}

void print_text_summary(const OcpProblem& p, const PipelineResult& r) {
  std::printf("SDP:      %s (%d iterations, %.0f ms)\n",
              to_string(r.sdp_status).c_str(), r.sdp_iterations, r.solve_ms);
  std::printf("J_CVX  = %.6f\n", r.J_cvx);
  std::printf("J_RCVX = %.6f   (sigma_rel %.3f%%)\n", r.J_rcvx,
              100.0 * r.report.sigma_rel);
  for (int l = 0; l < p.num_ctcs(); ++l)
    std::printf("tau_%d  = %.6f   window [%g, %g]\n", l + 1,
                r.refined.crossing_times[l], p.ctcs[l].tau_min,
                p.ctcs[l].tau_max);
  std::printf("stages: assemble %.0f ms, solve %.0f ms, extract %.0f ms, "
              "refine %.0f ms\n",
              r.assemble_ms, r.solve_ms, r.extract_ms, r.refine_ms);
}

int status_exit_code(const PipelineResult& r) {
  if (r.sdp_status == SolveStatus::infeasible) return kExitInfeasible;
  if (r.sdp_status != SolveStatus::optimal &&
      r.sdp_status != SolveStatus::max_iter)
    return kExitNumerical;
  if (r.refine_status == RefineStatus::restoration_failure)
    return kExitNumerical;
  return kExitOk;
}

std::string run_id_of(const RunConfig& cfg) {
  if (!cfg.problem_path.empty())
    return fs::path(cfg.problem_path).stem().string();
  std::string id = cfg.benchmark.empty() ? "di" : cfg.benchmark;
  if (id == "di") {
    std::ostringstream os;
    os << "di_v0_" << format_double(cfg.v0);
    id = os.str();
  }
  return id;
}

void write_run_config(const fs::path& dir, const RunConfig& cfg,
                      const ShootingGrid& grid) {
  std::ofstream out(dir / "run.kv");
  out << "grid=";
  for (size_t i = 0; i < grid.segment_counts.size(); ++i)
    out << (i ? "," : "") << grid.segment_counts[i];
  out << '\n';
  if (cfg.tol > 0.0) out << "tol=" << format_double(cfg.tol) << '\n';
}

int cmd_solve(const RunConfig& cfg) {
  check_backend(cfg.backend);
  const OcpProblem p = load_problem(cfg);
  const ShootingGrid grid = make_grid(cfg, p);
  const fs::path dir = prepare_out(cfg);
  write_problem_file(p, (dir / "problem.ocp").string());
  write_run_config(dir, cfg, grid);

  const PipelineResult r = solve_pipeline(p, grid, make_options(cfg, p));
  const int code = status_exit_code(r);
  const std::string record = summary_record(run_id_of(cfg), p, r, true);
  {
    std::ofstream out(dir / "summary.kv");
    out << record;
    std::ofstream rep(dir / (cfg.report == "kv" ? "report.kv" : "report.txt"));
    if (cfg.report == "kv")
      rep << record << r.report.to_kv();
    else
      rep << record;
  }
  if (code == kExitOk) {
    write_trajectory_csv_file(r.refined, grid,
                              (dir / "trajectory.csv").string());
    if (cfg.report == "kv")
      std::fputs(record.c_str(), stdout);
    else
      print_text_summary(p, r);
  } else {
    std::fprintf(stderr, "pipeline failed: sdp %s\n",
                 to_string(r.sdp_status).c_str());
  }
  return code;
}

int cmd_baseline(const RunConfig& cfg) {
  const OcpProblem p = load_problem(cfg);
  const ShootingGrid grid = make_grid(cfg, p);
  const fs::path dir = prepare_out(cfg);
  TrajectorySolution base = solve_baseline(p, grid);
  write_trajectory_csv_file(base, grid, (dir / "baseline.csv").string());
  std::ostringstream os;
  os << "run=" << run_id_of(cfg) << "_baseline\n";
  os << "J_base=" << format_double(base.cost) << '\n';
  os << "crossing_times=" << kv_escape(base.crossing_times) << '\n';
  std::ofstream(dir / "baseline.kv") << os.str();
  std::fputs(os.str().c_str(), stdout);
  return kExitOk;
}

double wall_ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

int cmd_bench(const RunConfig& cfg) {
  check_backend(cfg.backend);
  std::vector<double> sweep = cfg.v0_sweep;
  if (sweep.empty()) sweep = {0.0, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0};

  struct Row {
    double v0 = 0.0;
    bool ok = false;
    std::string error;
    PipelineResult r;
    double J_base = 0.0;
    bool base_ok = false;
    double delta_opt = 0.0;
    double base_ms = 0.0;
    double std_ms = 0.0;
  };
  std::vector<Row> rows;
  const fs::path dir = prepare_out(cfg);

  for (double v0 : sweep) {
    Row row;
    row.v0 = v0;
    try {
      RunConfig point = cfg;
      point.benchmark = "di";
      point.v0 = v0;
      const OcpProblem p = load_problem(point);
      const ShootingGrid grid = make_grid(point, p);
      row.r = solve_pipeline(p, grid, make_options(point, p));
      row.ok = status_exit_code(row.r) == kExitOk;
      if (!row.ok) row.error = to_string(row.r.sdp_status);
      if (row.ok) {
        auto t0 = std::chrono::steady_clock::now();
        try {
          TrajectorySolution base = solve_baseline(p, grid);
          row.J_base = base.cost;
          row.base_ok = true;
          row.delta_opt = optimality_delta(row.J_base, row.r.J_rcvx);
        } catch (const ProblemError& e) {
          row.error = e.what();
        }
        row.base_ms = wall_ms_since(t0);
      }
      if (row.ok && cfg.with_standard_sdr) {
        TranscribedNlp nlp = transcribe(p, grid);
        StandardSdr monolithic = standard_sdr(nlp);
        SolverSettings settings = make_options(point, p).solver;
        auto t0 = std::chrono::steady_clock::now();
        (void)solve(monolithic.program, settings);
        row.std_ms = wall_ms_since(t0);
      }
    } catch (const ProblemError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }

  std::ostringstream kv;
  for (const Row& row : rows) {
    kv << "run=di_v0_" << format_double(row.v0) << '\n';
    if (!row.ok) {
      kv << "error=" << (row.error.empty() ? "failed" : row.error) << '\n'
         << '\n';
      continue;
    }
    kv << "J_cvx=" << format_double(row.r.J_cvx) << '\n';
    kv << "J_rcvx=" << format_double(row.r.J_rcvx) << '\n';
    if (row.base_ok) kv << "J_base=" << format_double(row.J_base) << '\n';
    kv << "sigma_rel=" << format_double(row.r.report.sigma_rel) << '\n';
    if (row.base_ok)
      kv << "delta_opt=" << format_double(row.delta_opt) << '\n';
    kv << "assemble_ms=" << format_double(row.r.assemble_ms) << '\n';
    kv << "solve_ms=" << format_double(row.r.solve_ms) << '\n';
    kv << "extract_ms=" << format_double(row.r.extract_ms) << '\n';
    kv << "refine_ms=" << format_double(row.r.refine_ms) << '\n';
    kv << "baseline_ms=" << format_double(row.base_ms) << '\n';
    if (cfg.with_standard_sdr)
      kv << "standard_sdr_ms=" << format_double(row.std_ms) << '\n';
    kv << '\n';
  }
  std::ofstream(dir / "bench.kv") << kv.str();

  if (cfg.report == "kv") {
    std::fputs(kv.str().c_str(), stdout);
    return kExitOk;
  }

  auto print_row = [&](const char* name, auto get) {
    std::printf("%-12s", name);
    for (const Row& row : rows) {
      if (row.ok)
        std::printf(" %9.3f", get(row));
      else
        std::printf(" %9s", "-");
    }
    std::printf("\n");
  };
  std::printf("%-12s", "v(0)");
  for (const Row& row : rows) std::printf(" %9.1f", row.v0);
  std::printf("\n");
  print_row("J_CVX", [](const Row& r) { return r.r.J_cvx; });
  print_row("J_RCVX", [](const Row& r) { return r.r.J_rcvx; });
  print_row("J_BASE", [](const Row& r) { return r.J_base; });
  print_row("sigma_rel %", [](const Row& r) { return 100.0 * r.r.report.sigma_rel; });
  print_row("delta_opt %", [](const Row& r) { return 100.0 * r.delta_opt; });
  print_row("t_sdp ms", [](const Row& r) { return r.r.solve_ms; });
  print_row("t_refine ms", [](const Row& r) { return r.r.refine_ms; });
  print_row("t_base ms", [](const Row& r) { return r.base_ms; });
  if (cfg.with_standard_sdr)
    print_row("t_std ms", [](const Row& r) { return r.std_ms; });
  for (const Row& row : rows)
    if (!row.ok)
      std::printf("v(0)=%.1f failed: %s\n", row.v0, row.error.c_str());
  return kExitOk;
}

int cmd_export(const RunConfig& cfg) {
  const fs::path dir = prepare_out(cfg);
  const fs::path problem_file = dir / "problem.ocp";
  const fs::path run_file = dir / "run.kv";
  if (!fs::exists(problem_file) || !fs::exists(run_file))
    throw ProblemError("export: no prior run artifacts in " + dir.string());
  const OcpProblem p = read_problem(problem_file.string());

  RunConfig replay = cfg;
  std::ifstream run(run_file);
  std::string line;
  while (std::getline(run, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "grid") {
      replay.grid.clear();
      std::istringstream vs(value);
      std::string tok;
      while (std::getline(vs, tok, ','))
        replay.grid.push_back(std::atoi(tok.c_str()));
    } else if (key == "tol") {
      replay.tol = std::atof(value.c_str());
    }
  }
  const ShootingGrid grid = make_grid(replay, p);

  // The pipeline is deterministic, so replaying the stored configuration
  // reproduces the original run's trajectory exactly.
  const PipelineResult r = solve_pipeline(p, grid, make_options(replay, p));
  const int code = status_exit_code(r);
  if (code != kExitOk) return code;
  write_trajectory_csv_file(r.refined, grid, (dir / "trajectory.csv").string());
  if (cfg.dump_sdp_file) {
    TranscribedNlp nlp = transcribe(p, grid);
    LiftedSdp sdp = assemble(nlp, make_options(replay, p).assemble);
    std::ofstream out(dir / "sdp.dump");
    dump_sdp(sdp, out);
  }
  std::printf("exported %s\n", (dir / "trajectory.csv").string().c_str());
  return kExitOk;
}

void add_common(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--problem", cfg.problem_path, "Problem definition file");
  cmd->add_option("--benchmark", cfg.benchmark,
                  "Built-in benchmark id: di, wp1 or wp2");
  cmd->add_option("--v0", cfg.v0, "Initial speed of the di benchmark");
  cmd->add_option("--window", cfg.window, "Crossing window a,b")
      ->delimiter(',');
  cmd->add_option("--grid", cfg.grid, "Shooting intervals per segment")
      ->delimiter(',');
  cmd->add_option("--backend", cfg.backend, "Conic solver backend name");
  cmd->add_option("--report", cfg.report, "Report format: text or kv")
      ->check(CLI::IsMember({"text", "kv"}));
  cmd->add_option("--out", cfg.out_dir,
                  "Output directory (default $CTSDR_OUT_DIR or .)");
  cmd->add_option("--tol", cfg.tol, "Solver tolerance override");
  cmd->add_option("--seed", cfg.seed,
                  "Reserved; the pipeline is deterministic");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conic relaxation toolkit for optimal control with "
               "characteristic-time constraints"};
  app.require_subcommand(1);
  RunConfig cfg;

  CLI::App* solve_cmd = app.add_subcommand("solve", "Run the full pipeline");
  add_common(solve_cmd, cfg);
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Sweep the di benchmark over v(0)");
  add_common(bench_cmd, cfg);
  bench_cmd->add_option("--v0-sweep", cfg.v0_sweep, "Sweep values of v(0)")
      ->delimiter(',');
  bench_cmd->add_flag("--with-standard-sdr", cfg.with_standard_sdr,
                      "Also time the monolithic standard SDR");
  CLI::App* baseline_cmd =
      app.add_subcommand("baseline", "Fixed-crossing-time baseline");
  add_common(baseline_cmd, cfg);
  CLI::App* export_cmd =
      app.add_subcommand("export", "Re-emit artifacts of a prior run");
  add_common(export_cmd, cfg);
  export_cmd->add_flag("--dump-sdp", cfg.dump_sdp_file,
                       "Also write the assembled SDP in text form");

  CLI11_PARSE(app, argc, argv);
  try {
    if (solve_cmd->parsed()) return cmd_solve(cfg);
    if (bench_cmd->parsed()) return cmd_bench(cfg);
    if (baseline_cmd->parsed()) return cmd_baseline(cfg);
    if (export_cmd->parsed()) return cmd_export(cfg);
  } catch (const ProblemError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
