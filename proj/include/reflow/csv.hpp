#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reflow/lyapunov.hpp"
#include "reflow/solver.hpp"

namespace reflow::csv {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Header: t,dt,W,lambda,d,l2_deviation[,lyapunov].  One row per level; the dt
/// column holds the step taken from that level (0 on the final row).
void write_trajectory(const std::filesystem::path& file, const Trajectory& trajectory,
                      const std::vector<double>* lyapunov = nullptr);

/// One file per recorded snapshot, named state_<index>.csv, header x,rho.
/// Row 0 is the boundary node at x = 0.
void write_state_snapshots(const std::filesystem::path& directory,
                           const Trajectory& trajectory);

/// Header: beta,a,theta,c1,f_experiment,f_proof,eta,gamma1,gamma2,gamma3,nu,valid,reasons.
void write_certificate(const std::filesystem::path& file, const LyapunovCertificate& cert);

/// Two-column numeric table with a one-line header, e.g. "x,rho" or "t,d".
struct Table2 {
    std::vector<double> first;
    std::vector<double> second;
};
Table2 read_table2(const std::filesystem::path& file);

}  // namespace reflow::csv
