#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lpvds/sym.hpp"

namespace lpvds {

enum class SdpStatus { Optimal, Feasible, Infeasible, MaxIter };

std::string to_string(SdpStatus s);

/// Affine symmetric-matrix map F(z) = constant + sum_j z[var_idx[j]] * coeff[j],
/// required to satisfy F(z) <= -epsilon_strict * I.
struct LmiBlock {
  int dim = 0;
  SymMat constant;
  std::vector<int> var_idx;
  std::vector<SymMat> coeff;

  Eigen::MatrixXd eval(const Eigen::VectorXd& z) const;
};

/// f(z) = 0.5 z'Qz + q'z + c with Q positive semidefinite (Q may be empty,
/// meaning zero).
struct QuadObjective {
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  double c = 0.0;

  double eval(const Eigen::VectorXd& z) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& z) const;
  bool is_zero() const { return Q.size() == 0 && q.size() == 0; }
};

struct SdpProblem {
  int decision_dim = 0;
  QuadObjective objective;
  std::vector<LmiBlock> blocks;
  Eigen::VectorXd lower;  // elementwise bounds; +-inf allowed, empty = unbounded
  Eigen::VectorXd upper;
  double epsilon_strict = 0.0;

  void validate() const;
};

struct SolverOptions {
  int max_iter = 200;        // total Newton-step budget
  double feas_tol = 1e-8;    // accepted constraint violation at the solution
  double gap_tol = 1e-11;    // barrier duality-measure target (per unit scale)
  double tau0 = 1.0;         // initial objective weight on the central path
  double tau_growth = 10.0;
  double newton_tol = 1e-12;  // squared Newton decrement threshold
  Eigen::VectorXd start;      // optional warm start; used when strictly
                              // inside the bounds
};

struct SdpSolution {
  Eigen::VectorXd z;
  double objective_value = 0.0;
  SdpStatus status = SdpStatus::MaxIter;
  double max_block_eig = -std::numeric_limits<double>::infinity();
  int newton_iters = 0;
  std::string message;
};

/// Log-det barrier interior-point method over the constraint blocks, damped
/// Newton steps on the centering problems. Deterministic: identical problem
/// and options give identical output.
SdpSolution solve_sdp(const SdpProblem& p, const SolverOptions& opts = {});

/// Largest eigenvalue over all constraint blocks evaluated at z.
double max_block_eigenvalue(const SdpProblem& p, const Eigen::VectorXd& z);

}  // namespace lpvds
