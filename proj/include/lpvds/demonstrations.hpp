#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lpvds/interconnection.hpp"

namespace lpvds {

/// One demonstration: position samples column-wise (n x T), optionally with
/// velocity samples of the same shape, and the sample period.
struct Trajectory {
  Eigen::MatrixXd states;
  std::optional<Eigen::MatrixXd> velocities;
  double dt = 1.0;

  int length() const { return static_cast<int>(states.cols()); }
};

struct DemonstrationSet {
  std::vector<Trajectory> trajectories;
  int n = 0;
  Eigen::VectorXd equilibrium;  // recorded by shift_to_origin
  bool shifted = false;

  int sample_count() const;
  bool has_velocities() const;
};

/// Per-subsystem projected data: states, velocities and internal inputs,
/// one sample per column, identical sample counts.
struct SubsystemData {
  int index = 0;
  Eigen::MatrixXd x;     // n_i x M
  Eigen::MatrixXd xdot;  // n_i x M
  Eigen::MatrixXd w;     // p_i x M
};

enum class DataFormat { Csv, Json };

/// CSV: header `x1,...,xn[,dx1,...,dxn],traj_id`, one row per sample. The CSV
/// format carries no sample period; csv_dt supplies it. JSON:
/// { "dt": float, "trajectories": [ { "states": [[...]],
///   "velocities": [[...]] } ] } with velocities optional.
DemonstrationSet load_demonstrations(const std::string& path, DataFormat format,
                                     double csv_dt = 1.0);

/// Subtracts x_star from every state sample (velocities untouched) and records
/// it as the equilibrium. Without an explicit x_star, uses the mean of the
/// trajectories' final states.
DemonstrationSet shift_to_origin(const DemonstrationSet& set,
                                 const std::optional<Eigen::VectorXd>& x_star);

/// Central differences in the interior, one-sided at the ends. On a shifted
/// set, a final sample at the origin gets velocity exactly zero. Trajectories
/// that already carry velocities are left alone.
DemonstrationSet estimate_velocities(const DemonstrationSet& set);

/// Appends the (0, 0) equilibrium tuple as a one-sample trajectory unless some
/// sample already equals it. Requires a shifted set with velocities.
DemonstrationSet with_equilibrium_sample(const DemonstrationSet& set);

/// Projects every sample onto each subsystem's state coordinates and gathers
/// the internal inputs w_i = (M x) rows belonging to subsystem i.
std::vector<SubsystemData> project_to_subsystems(const DemonstrationSet& set,
                                                 const InterconnectionSpec& spec);

}  // namespace lpvds
