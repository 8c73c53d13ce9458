#include "ctsdr/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

namespace ctsdr {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

double parse_number(const std::string& tok, int line_no) {
  if (tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw ProblemError("parse_problem: bad number '" + tok + "' at line " +
                       std::to_string(line_no));
  return v;
}

struct Entry {
  std::vector<double> values;
  int line_no = 0;
};

using Section = std::map<std::string, Entry>;

Eigen::VectorXd as_vector(const Section& sec, const std::string& key,
                          const std::string& where) {
  auto it = sec.find(key);
  if (it == sec.end())
    throw ProblemError("parse_problem: missing '" + key + "' in [" + where +
                       "]");
  return Eigen::Map<const Eigen::VectorXd>(it->second.values.data(),
                                           it->second.values.size());
}

double as_scalar(const Section& sec, const std::string& key,
                 const std::string& where) {
  Eigen::VectorXd v = as_vector(sec, key, where);
  if (v.size() != 1)
    throw ProblemError("parse_problem: '" + key + "' in [" + where +
                       "] must be a single number");
  return v[0];
}

Eigen::MatrixXd as_matrix(const Section& sec, const std::string& key,
                          int rows, int cols, const std::string& where) {
  Eigen::VectorXd flat = as_vector(sec, key, where);
  if (flat.size() != static_cast<Eigen::Index>(rows) * cols)
    throw ProblemError("parse_problem: '" + key + "' in [" + where + "] needs " +
                       std::to_string(rows * cols) + " entries");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = flat[i * cols + j];
  return m;
}

void print_list(std::ostream& out, const std::string& key,
                const Eigen::Ref<const Eigen::VectorXd>& v) {
  out << key << " =";
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out << ' ' << format_double(v[i]);
  out << '\n';
}

void print_matrix(std::ostream& out, const std::string& key,
                  const Eigen::MatrixXd& m) {
  out << key << " =";
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out << ' ' << format_double(m(i, j));
  out << '\n';
}

}  // namespace

OcpProblem parse_problem(std::istream& in) {
  Section dynamics, bounds, cost, boundary;
  std::vector<Section> ctcs;
  Section* current = nullptr;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first.front() == '[') {
      if (first == "[dynamics]")
        current = &dynamics;
      else if (first == "[bounds]")
        current = &bounds;
      else if (first == "[cost]")
        current = &cost;
      else if (first == "[boundary]")
        current = &boundary;
      else if (first == "[ctc]") {
        ctcs.emplace_back();
        current = &ctcs.back();
      } else
        throw ProblemError("parse_problem: unknown section " + first +
                           " at line " + std::to_string(line_no));
      continue;
    }
    if (!current)
      throw ProblemError("parse_problem: entry before any section at line " +
                         std::to_string(line_no));
    std::string eq;
    if (!(ls >> eq) || eq != "=")
      throw ProblemError("parse_problem: expected '=' after '" + first +
                         "' at line " + std::to_string(line_no));
    Entry e;
    e.line_no = line_no;
    std::string tok;
    while (ls >> tok) e.values.push_back(parse_number(tok, line_no));
    (*current)[first] = std::move(e);
  }

  const int nx = static_cast<int>(as_scalar(dynamics, "nx", "dynamics"));
  const int nu = static_cast<int>(as_scalar(dynamics, "nu", "dynamics"));
  if (nx < 1 || nu < 1)
    throw ProblemError("parse_problem: nx and nu must be positive");

  OcpProblem p;
  p.dynamics.A = as_matrix(dynamics, "A", nx, nx, "dynamics");
  p.dynamics.B = as_matrix(dynamics, "B", nx, nu, "dynamics");
  p.bounds.x_min = as_vector(bounds, "x_min", "bounds");
  p.bounds.x_max = as_vector(bounds, "x_max", "bounds");
  p.bounds.u_min = as_vector(bounds, "u_min", "bounds");
  p.bounds.u_max = as_vector(bounds, "u_max", "bounds");
  p.cost.w_t = as_scalar(cost, "w_t", "cost");
  p.cost.Q_x = as_matrix(cost, "Q_x", nx, nx, "cost");
  p.cost.R_u = as_matrix(cost, "R_u", nu, nu, "cost");
  p.x0 = as_vector(boundary, "x0", "boundary");
  p.xf = as_vector(boundary, "xf", "boundary");
  for (size_t l = 0; l < ctcs.size(); ++l) {
    const std::string where = "ctc";
    CharacteristicTimeConstraint ctc;
    Eigen::VectorXd rows = as_vector(ctcs[l], "rows", where);
    ctc.selector = Eigen::MatrixXd::Zero(rows.size(), nx);
    for (Eigen::Index r = 0; r < rows.size(); ++r) {
      const int j = static_cast<int>(rows[r]);
      if (j < 0 || j >= nx || rows[r] != j)
        throw ProblemError("parse_problem: bad selector index in [ctc]");
      ctc.selector(r, j) = 1.0;
    }
    ctc.target = as_vector(ctcs[l], "target", where);
    ctc.tau_min = as_scalar(ctcs[l], "tau_min", where);
    ctc.tau_max = as_scalar(ctcs[l], "tau_max", where);
    p.ctcs.push_back(std::move(ctc));
  }
  return validate(p);
}

OcpProblem read_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProblemError("read_problem: cannot open " + path);
  return parse_problem(in);
}

void write_problem(const OcpProblem& problem, std::ostream& out) {
  const OcpProblem p = validate(problem);
  out << "[dynamics]\n";
  out << "nx = " << p.nx() << "\nnu = " << p.nu() << '\n';
  print_matrix(out, "A", p.dynamics.A);
  print_matrix(out, "B", p.dynamics.B);
  out << "[bounds]\n";
  print_list(out, "x_min", p.bounds.x_min);
  print_list(out, "x_max", p.bounds.x_max);
  print_list(out, "u_min", p.bounds.u_min);
  print_list(out, "u_max", p.bounds.u_max);
  out << "[cost]\n";
  out << "w_t = " << format_double(p.cost.w_t) << '\n';
  print_matrix(out, "Q_x", p.cost.Q_x);
  print_matrix(out, "R_u", p.cost.R_u);
  out << "[boundary]\n";
  print_list(out, "x0", p.x0);
  print_list(out, "xf", p.xf);
  for (const auto& ctc : p.ctcs) {
    out << "[ctc]\n";
    out << "rows =";
    for (Eigen::Index r = 0; r < ctc.selector.rows(); ++r)
      for (Eigen::Index j = 0; j < ctc.selector.cols(); ++j)
        if (ctc.selector(r, j) == 1.0) out << ' ' << j;
    out << '\n';
    print_list(out, "target", ctc.target);
    out << "tau_min = " << format_double(ctc.tau_min) << '\n';
    out << "tau_max = " << format_double(ctc.tau_max) << '\n';
  }
}

void write_problem_file(const OcpProblem& problem, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ProblemError("write_problem_file: cannot open " + path);
  write_problem(problem, out);
}

void write_trajectory_csv(const TrajectorySolution& trajectory,
                          const ShootingGrid& grid, std::ostream& out) {
  const auto& p = trajectory.point;
  const int S = grid.num_segments();
  const int nx = S ? static_cast<int>(p.states[0][0].size()) : 0;
  const int nu = S ? static_cast<int>(p.controls[0][0].size()) : 0;
  out << "t";
  for (int j = 1; j <= nx; ++j) out << ",x" << j;
  for (int j = 1; j <= nu; ++j) out << ",u" << j;
  out << ",segment,theta\n";
  double t = 0.0;
  for (int i = 0; i < S; ++i) {
    const int N = grid.segment_counts[i];
    const bool last_seg = (i == S - 1);
    for (int k = 0; k < N + (last_seg ? 1 : 0); ++k) {
      out << format_double(t + k * p.thetas[i]);
      const Eigen::VectorXd& x = p.states[i][k];
      for (int j = 0; j < nx; ++j) out << ',' << format_double(x[j]);
      const Eigen::VectorXd& u = p.controls[i][std::min(k, N - 1)];
      for (int j = 0; j < nu; ++j) out << ',' << format_double(u[j]);
      out << ',' << i << ',' << format_double(p.thetas[i]) << '\n';
    }
    t += N * p.thetas[i];
  }
}

void write_trajectory_csv_file(const TrajectorySolution& trajectory,
                               const ShootingGrid& grid,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ProblemError("write_trajectory_csv_file: cannot open " + path);
  write_trajectory_csv(trajectory, grid, out);
}

}  // namespace ctsdr
