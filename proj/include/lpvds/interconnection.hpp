#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace lpvds {

/// One subsystem: which global coordinates form its state x_i (dimension n_i)
/// and which feed its internal input w_i (dimension p_i). Indices are 0-based
/// internally; the JSON interface is 1-based.
struct SubsystemSpec {
  int index = 0;
  std::vector<int> state_coords;
  std::vector<int> input_coords;

  int n() const { return static_cast<int>(state_coords.size()); }
  int p() const { return static_cast<int>(input_coords.size()); }
};

/// Subsystem decomposition of the global state together with the
/// interconnection matrix M mapping the global state to the stacked internal
/// inputs: [w_1; ...; w_N] = M x. M is a 0/1 selection matrix, one 1 per row.
struct InterconnectionSpec {
  int n = 0;
  std::vector<SubsystemSpec> subsystems;
  Eigen::MatrixXd M;  // (sum p_i) x n, columns in original coordinate order

  int count() const { return static_cast<int>(subsystems.size()); }
  int total_inputs() const { return static_cast<int>(M.rows()); }

  /// Permutation S with [x_1; ...; x_N] = S x.
  Eigen::MatrixXd stack_permutation() const;
  /// M expressed on stacked coordinates: w = (M S^T) [x_1; ...; x_N].
  Eigen::MatrixXd m_stacked() const;

  /// Row range of subsystem i inside the stacked input vector.
  std::pair<int, int> input_rows(int i) const;
  /// Column range of subsystem i inside the stacked state vector.
  std::pair<int, int> state_cols(int i) const;

  Eigen::VectorXd select_state(int i, const Eigen::VectorXd& x) const;
  Eigen::VectorXd select_input(int i, const Eigen::VectorXd& x) const;
};

/// Validates the partition and assembles M row by row.
InterconnectionSpec build_interconnection(int n,
                                          std::vector<SubsystemSpec> subsystems);

/// N = n scalar subsystems; subsystem i reads every other coordinate.
InterconnectionSpec fully_connected_scalar(int n);

/// Topology config: { "n": int, "subsystems": [ { "states": [...],
/// "inputs": [...] } ] } with 1-based coordinate indices.
InterconnectionSpec from_config(const nlohmann::json& desc);

}  // namespace lpvds
