#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lpvds/demonstrations.hpp"
#include "lpvds/gmm.hpp"
#include "lpvds/report.hpp"
#include "lpvds/sdp.hpp"
#include "lpvds/sym.hpp"

namespace lpvds {

struct SubsystemHyperparams {
  double delta_lo = 0.1;   // lower eigenvalue bound on P
  double delta_hi = 10.0;  // upper eigenvalue bound on P
  double xi = 0.1;         // exponential dissipation rate
  double d_max = 10.0;     // cap on the eigenvalues of the supply matrix D
  double epsilon_strict = 1e-6;
  int max_outer_iter = 20;
  double outer_tol = 1e-4;
  double margin_share = 0.25;  // fraction of the optimal block margin retained
                               // while the supply matrix is shaped
  double ridge = 1e-8;
  SolverOptions sdp{.max_iter = 800};

  void validate() const;
};

struct SubsystemRates {
  double delta_lo = 0.0;
  double delta_hi = 0.0;
  double xi = 0.0;
  double d_max = 0.0;
};

/// Learned LPV subsystem: field sum_k gamma_k(x) (A_k x + B_k w), quadratic
/// storage x'Px, and supply-rate matrix D with blocks D11 (p x p),
/// D12 (p x n), D22 (n x n); D21 = D12'.
struct SubsystemModel {
  int index = 0;
  int K = 0;
  int n = 0;
  int p = 0;
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::MatrixXd> B;
  SymMat P;
  SymMat D11;
  Eigen::MatrixXd D12;
  SymMat D22;
  SubsystemRates rates;
  GmmModel gmm;
  double objective = 0.0;                  // final tracking MSE (mean)
  std::vector<double> objective_history;   // value after each AB stage

  SymMat assembled_supply() const;         // [[D11 D12]; [D21 D22]]
  SymMat small_gain_block(int k) const;    // the (p+n) x (p+n) LMI block
};

Eigen::VectorXd eval_subsystem_field(const SubsystemModel& m,
                                     const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& w);

/// Unconstrained ridge-regularized weighted least squares for (A_k, B_k),
/// linear in all matrix entries. Sets *rank_deficient when the normal
/// equations are badly conditioned (a solution is still returned).
std::pair<std::vector<Eigen::MatrixXd>, std::vector<Eigen::MatrixXd>>
initial_fit(const SubsystemData& data, const GmmModel& gmm, double ridge = 1e-8,
            bool* rank_deficient = nullptr);

/// Alternating convex scheme: Stage P solves for (P, D) at fixed (A, B),
/// Stage AB re-fits (A, B) at fixed (P, D) under the per-component LMI
/// blocks. Returns the best certified iterate.
SubsystemModel learn_subsystem(const SubsystemData& data, const GmmModel& gmm,
                               const SubsystemHyperparams& hp);

/// Replays the eigenvalue and small-gain conditions and samples the scalar
/// dissipation inequality at random (x, w) pairs.
CertificateReport check_subsystem_certificate(const SubsystemModel& m,
                                              double tol, int samples = 1000,
                                              std::uint64_t seed = 42);

/// Tracking residual sum and mean over the data.
std::pair<double, double> tracking_error(const SubsystemModel& m,
                                         const SubsystemData& data);

}  // namespace lpvds
