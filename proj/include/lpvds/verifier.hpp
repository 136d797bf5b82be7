#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "lpvds/composer.hpp"
#include "lpvds/report.hpp"
#include "lpvds/sym.hpp"

namespace lpvds {

/// Samples the ball of the given radius and checks the quadratic bounds on V,
/// the dissipation inequality, the exact equilibrium and the composed
/// certificate. Deterministic given the seed.
CertificateReport verify_composed(const ComposedModel& m, int samples,
                                  double radius, double tol,
                                  std::uint64_t seed = 42);

/// Classical Lyapunov-equation oracle: solves A'P + P A = -I by a Kronecker
/// linear solve. Throws NotHurwitz when A has an eigenvalue with nonnegative
/// real part.
SymMat lyapunov_oracle_linear(const Eigen::MatrixXd& a_global);

/// Evaluates both inequality steps of the composed-decrease chain at random
/// points: (i) the true V-derivative, (ii) the per-subsystem dissipation
/// bound plus the stacked supply term, (iii) the bound with the supply term
/// dropped. Passes when (i) <= (ii) <= (iii) within tol throughout, and the
/// supply term matches the certificate quadratic form.
CertificateReport cross_check_composition(const ComposedModel& m, int n_points,
                                          double tol, double radius = 2.0,
                                          std::uint64_t seed = 42);

}  // namespace lpvds
