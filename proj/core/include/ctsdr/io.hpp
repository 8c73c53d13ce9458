#ifndef CTSDR_IO_HPP
#define CTSDR_IO_HPP

#include <iosfwd>
#include <string>

#include "ctsdr/extraction.hpp"

namespace ctsdr {

/// Shortest decimal representation that round-trips to the same double;
/// infinities are written as "inf" / "-inf".
std::string format_double(double v);

/// Problem-definition grammar: line-oriented `key = values` entries in
/// sections [dynamics], [bounds], [cost], [boundary] and one [ctc]
/// section per characteristic time constraint (in crossing order).
/// Matrices are row-major number lists; selector rows are given as the
/// 0-based state indices they pick. '#' starts a comment.
OcpProblem parse_problem(std::istream& in);
OcpProblem read_problem(const std::string& path);
void write_problem(const OcpProblem& problem, std::ostream& out);
void write_problem_file(const OcpProblem& problem, const std::string& path);

/// CSV with columns t, x1..xnx, u1..unu, segment, theta; one row per
/// distinct node (segment-boundary nodes are not duplicated), the last
/// interval's control repeated on the final row.
void write_trajectory_csv(const TrajectorySolution& trajectory,
                          const ShootingGrid& grid, std::ostream& out);
void write_trajectory_csv_file(const TrajectorySolution& trajectory,
                               const ShootingGrid& grid,
                               const std::string& path);

}  // namespace ctsdr

#endif
