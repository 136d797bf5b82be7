#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lpvds/interconnection.hpp"
#include "lpvds/sdp.hpp"
#include "lpvds/subsystem.hpp"
#include "lpvds/sym.hpp"

namespace lpvds {

/// Global decrease/bound rates. The paper-style values are the unweighted
/// bounds (valid for unit multipliers); the effective values weight each
/// subsystem by its multiplier and are the ones verified at runtime.
struct GlobalRates {
  double delta_lo = 0.0;        // min_i mu_i * delta_lo_i
  double delta_hi_eff = 0.0;    // N * max_i mu_i * delta_hi_i
  double xi = 0.0;              // min_i mu_i * xi_i
  double paper_delta_lo = 0.0;  // N * min_i delta_lo_i
  double paper_delta_hi = 0.0;  // N * max_i delta_hi_i
};

struct ComposedModel {
  InterconnectionSpec spec;
  std::vector<SubsystemModel> subsystems;
  Eigen::VectorXd mu;
  GlobalRates rates;
  double certificate_eig = 0.0;
  bool certified = false;
};

/// [M; I]' blockdiag-arranged supply matrices [M; I] on stacked coordinates,
/// scaled by the multipliers. M_stacked columns follow the stacked state
/// order [x_1; ...; x_N].
SymMat assemble_certificate_matrix(const std::vector<SubsystemModel>& subsystems,
                                   const Eigen::MatrixXd& M_stacked,
                                   const Eigen::VectorXd& mu);

/// Contribution of one subsystem (the certificate matrix is linear in mu).
SymMat certificate_contribution(const std::vector<SubsystemModel>& subsystems,
                                const Eigen::MatrixXd& M_stacked, int i);

/// Margin-maximizing multipliers in [mu_min, mu_max], rescaled afterwards so
/// that min_i mu_i = mu_min. Throws CompositionInfeasible (with the worst
/// eigenvector as witness) when no multipliers certify the interconnection.
Eigen::VectorXd solve_mu(const std::vector<SubsystemModel>& subsystems,
                         const Eigen::MatrixXd& M_stacked, double mu_min,
                         double tol, double mu_max = 1e3,
                         const SolverOptions& opts = {});

/// Assembles the composed model and re-verifies the certificate at the given
/// multipliers (throws CertificateViolation when it fails).
ComposedModel compose(const InterconnectionSpec& spec,
                      std::vector<SubsystemModel> subsystems,
                      const Eigen::VectorXd& mu, double tol);

/// Same assembly without requiring the certificate to hold; certified = false
/// unless the recomputed eigenvalue passes.
ComposedModel compose_unchecked(const InterconnectionSpec& spec,
                                std::vector<SubsystemModel> subsystems,
                                const Eigen::VectorXd& mu, double tol);

/// f(x) on the original coordinates: w = M x, per-subsystem fields stacked
/// back into place.
Eigen::VectorXd global_field(const ComposedModel& m, const Eigen::VectorXd& x);

/// V(x) = sum_i mu_i x_i' P_i x_i and its gradient.
std::pair<double, Eigen::VectorXd> global_lyapunov(const ComposedModel& m,
                                                   const Eigen::VectorXd& x);

}  // namespace lpvds
