#include "lpvds/verifier.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "lpvds/errors.hpp"
#include "lpvds/rng.hpp"

namespace lpvds {

CertificateReport verify_composed(const ComposedModel& m, int samples,
                                  double radius, double tol,
                                  std::uint64_t seed) {
  if (samples < 1 || !(radius > 0.0))
    throw ConfigError("verify_composed needs samples >= 1 and radius > 0");
  CertificateReport report;
  Rng rng(seed);

  CheckResult lower{.name = "v_lower_bound", .tolerance = tol};
  CheckResult upper{.name = "v_upper_bound", .tolerance = tol};
  CheckResult decrease{.name = "dissipation", .tolerance = tol};
  lower.worst_margin = upper.worst_margin = decrease.worst_margin =
      -std::numeric_limits<double>::infinity();

  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd x = rng.in_ball(m.spec.n, radius);
    const auto [v, grad] = global_lyapunov(m, x);
    const Eigen::VectorXd f = global_field(m, x);
    const double nx2 = x.squaredNorm();

    const double lo_margin = m.rates.delta_lo * nx2 - v;
    if (lo_margin > lower.worst_margin) {
      lower.worst_margin = lo_margin;
      lower.witness = x;
    }
    const double hi_margin = v - m.rates.delta_hi_eff * nx2;
    if (hi_margin > upper.worst_margin) {
      upper.worst_margin = hi_margin;
      upper.witness = x;
    }
    const double de_margin = grad.dot(f) + m.rates.xi * v;
    if (de_margin > decrease.worst_margin) {
      decrease.worst_margin = de_margin;
      decrease.witness = x;
    }
  }
  lower.pass = lower.worst_margin <= tol;
  upper.pass = upper.worst_margin <= tol;
  decrease.pass = decrease.worst_margin <= tol;

  CheckResult origin{.name = "equilibrium_at_origin", .tolerance = 0.0};
  const Eigen::VectorXd f0 = global_field(m, Eigen::VectorXd::Zero(m.spec.n));
  origin.worst_margin = f0.cwiseAbs().maxCoeff();
  origin.pass = origin.worst_margin == 0.0;
  origin.witness = Eigen::VectorXd::Zero(m.spec.n);

  CheckResult cert{.name = "certificate_nsd", .tolerance = tol};
  const SymMat c =
      assemble_certificate_matrix(m.subsystems, m.spec.m_stacked(), m.mu);
  cert.worst_margin = max_eig(c);
  cert.pass = cert.worst_margin <= tol;
  cert.witness = max_eig_vector(c);

  report.checks = {lower, upper, decrease, origin, cert};
  return report;
}

SymMat lyapunov_oracle_linear(const Eigen::MatrixXd& a_global) {
  const int n = static_cast<int>(a_global.rows());
  if (a_global.cols() != n) throw DimensionMismatch("A must be square");
  const Eigen::EigenSolver<Eigen::MatrixXd> es(a_global);
  if (es.eigenvalues().real().maxCoeff() >= 0.0)
    throw NotHurwitz("A has an eigenvalue with nonnegative real part");

  // vec(A'P + P A) = (I kron A' + A' kron I) vec(P) = -vec(I).
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n * n, n * n);
  const Eigen::MatrixXd at = a_global.transpose();
  for (int i = 0; i < n; ++i)
    k.block(i * n, i * n, n, n) += at;  // I kron A'
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k.block(i * n, j * n, n, n) +=
          at(i, j) * Eigen::MatrixXd::Identity(n, n);  // A' kron I
  Eigen::MatrixXd rhs = -Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd vec_p =
      k.partialPivLu().solve(Eigen::Map<Eigen::VectorXd>(rhs.data(), n * n));
  Eigen::MatrixXd p(n, n);
  for (int j = 0; j < n; ++j) p.col(j) = vec_p.segment(j * n, n);
  const SymMat sym_p(p);
  if (min_eig(sym_p) <= 0.0)
    throw NotHurwitz("Lyapunov solution is not positive definite");
  return sym_p;
}

CertificateReport cross_check_composition(const ComposedModel& m, int n_points,
                                          double tol, double radius,
                                          std::uint64_t seed) {
  CertificateReport report;
  Rng rng(seed);
  const Eigen::MatrixXd s_perm = m.spec.stack_permutation();
  const SymMat cert =
      assemble_certificate_matrix(m.subsystems, m.spec.m_stacked(), m.mu);

  CheckResult step1{.name = "chain_derivative_vs_supply", .tolerance = tol};
  CheckResult step2{.name = "chain_supply_vs_rate", .tolerance = tol};
  CheckResult ident{.name = "supply_identity", .tolerance = 1e-9};
  step1.worst_margin = step2.worst_margin = ident.worst_margin =
      -std::numeric_limits<double>::infinity();

  for (int s = 0; s < n_points; ++s) {
    const Eigen::VectorXd x = rng.in_ball(m.spec.n, radius);
    const Eigen::VectorXd x_st = s_perm * x;

    double vdot = 0.0;         // (i)  sum_i mu_i dV_i/dx_i . f_i
    double rate_term = 0.0;    // sum_i -mu_i xi_i V_i
    double supply_sum = 0.0;   // sum_i mu_i [w;x]' D_i [w;x]
    for (int i = 0; i < m.spec.count(); ++i) {
      const auto& sub = m.subsystems[i];
      const Eigen::VectorXd xi = m.spec.select_state(i, x);
      const Eigen::VectorXd wi = m.spec.select_input(i, x);
      const Eigen::VectorXd fi = eval_subsystem_field(sub, xi, wi);
      vdot += m.mu(i) * 2.0 * xi.dot(sub.P.mat() * fi);
      rate_term -= m.mu(i) * sub.rates.xi * xi.dot(sub.P.mat() * xi);
      Eigen::VectorXd wx(sub.p + sub.n);
      wx << wi, xi;
      supply_sum += m.mu(i) * wx.dot(sub.assembled_supply().mat() * wx);
    }
    const double quad = x_st.dot(cert.mat() * x_st);

    const double m1 = vdot - (rate_term + quad);
    if (m1 > step1.worst_margin) {
      step1.worst_margin = m1;
      step1.witness = x;
    }
    const double m2 = (rate_term + quad) - rate_term;  // = quad <= 0 when NSD
    if (m2 > step2.worst_margin) {
      step2.worst_margin = m2;
      step2.witness = x;
    }
    const double mi = std::abs(supply_sum - quad) / (1.0 + std::abs(quad));
    if (mi > ident.worst_margin) {
      ident.worst_margin = mi;
      ident.witness = x;
    }
  }
  step1.pass = step1.worst_margin <= tol;
  step2.pass = step2.worst_margin <= tol;
  ident.pass = ident.worst_margin <= ident.tolerance;
  report.checks = {step1, step2, ident};
  return report;
}

}  // namespace lpvds
