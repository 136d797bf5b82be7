#include "lpvds/composer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lpvds/errors.hpp"

namespace lpvds {

namespace {

int total_state_dim(const std::vector<SubsystemModel>& subsystems) {
  int n = 0;
  for (const auto& s : subsystems) n += s.n;
  return n;
}

int total_input_dim(const std::vector<SubsystemModel>& subsystems) {
  int p = 0;
  for (const auto& s : subsystems) p += s.p;
  return p;
}

}  // namespace

SymMat certificate_contribution(const std::vector<SubsystemModel>& subsystems,
                                const Eigen::MatrixXd& M_stacked, int i) {
  const int n = total_state_dim(subsystems);
  if (M_stacked.cols() != n || M_stacked.rows() != total_input_dim(subsystems))
    throw DimensionMismatch("interconnection matrix shape mismatch");

  int row0 = 0, col0 = 0;
  for (int j = 0; j < i; ++j) {
    row0 += subsystems[j].p;
    col0 += subsystems[j].n;
  }
  const auto& s = subsystems[i];
  const Eigen::MatrixXd t = M_stacked.middleRows(row0, s.p);  // w_i = t x

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  if (s.p > 0) {
    c += t.transpose() * s.D11.mat() * t;
    Eigen::MatrixXd cross = t.transpose() * s.D12;  // n x n_i
    c.middleCols(col0, s.n) += cross;
    c.middleRows(col0, s.n) += cross.transpose();
  }
  c.block(col0, col0, s.n, s.n) += s.D22.mat();
  return SymMat(c);
}

SymMat assemble_certificate_matrix(const std::vector<SubsystemModel>& subsystems,
                                   const Eigen::MatrixXd& M_stacked,
                                   const Eigen::VectorXd& mu) {
  if (mu.size() != static_cast<int>(subsystems.size()))
    throw DimensionMismatch("one multiplier per subsystem required");
  const int n = total_state_dim(subsystems);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < subsystems.size(); ++i)
    c += mu(static_cast<int>(i)) *
         certificate_contribution(subsystems, M_stacked, static_cast<int>(i)).mat();
  return SymMat(c);
}

Eigen::VectorXd solve_mu(const std::vector<SubsystemModel>& subsystems,
                         const Eigen::MatrixXd& M_stacked, double mu_min,
                         double tol, double mu_max, const SolverOptions& opts) {
  if (!(mu_min > 0.0)) throw ConfigError("mu_min must be positive");
  if (!(mu_max > mu_min)) throw ConfigError("mu_max must exceed mu_min");
  const int nsub = static_cast<int>(subsystems.size());
  const int n = total_state_dim(subsystems);

  std::vector<SymMat> contrib;
  double norm_sum = 0.0;
  for (int i = 0; i < nsub; ++i) {
    contrib.push_back(certificate_contribution(subsystems, M_stacked, i));
    norm_sum += contrib.back().mat().norm();
  }
  const double t_cap = 1.0 + mu_max * norm_sum;

  // min t + tiny ||mu||^2  s.t.  sum_i mu_i C_i <= t I, mu in [mu_min, mu_max].
  SdpProblem prob;
  prob.decision_dim = nsub + 1;
  prob.objective.q = Eigen::VectorXd::Zero(nsub + 1);
  prob.objective.q(nsub) = 1.0;
  prob.objective.Q = Eigen::MatrixXd::Zero(nsub + 1, nsub + 1);
  prob.objective.Q.topLeftCorner(nsub, nsub) =
      2e-9 * Eigen::MatrixXd::Identity(nsub, nsub);
  LmiBlock blk;
  blk.dim = n;
  blk.constant = SymMat(n);
  for (int i = 0; i < nsub; ++i) {
    blk.var_idx.push_back(i);
    blk.coeff.push_back(contrib[i]);
  }
  blk.var_idx.push_back(nsub);
  blk.coeff.push_back(SymMat((-Eigen::MatrixXd::Identity(n, n)).eval()));
  prob.blocks.push_back(std::move(blk));
  prob.lower = Eigen::VectorXd::Constant(nsub + 1, mu_min);
  prob.upper = Eigen::VectorXd::Constant(nsub + 1, mu_max);
  prob.lower(nsub) = -t_cap;
  prob.upper(nsub) = t_cap;

  Eigen::VectorXd z0(nsub + 1);
  z0.head(nsub).setConstant(std::min(10.0 * mu_min, 0.5 * (mu_min + mu_max)));
  z0(nsub) = std::min(
      max_eig(assemble_certificate_matrix(subsystems, M_stacked,
                                          z0.head(nsub))) +
          1.0,
      t_cap - 1.0);
  SolverOptions o = opts;
  o.start = z0;
  const SdpSolution sol = solve_sdp(prob, o);

  Eigen::VectorXd mu = sol.z.head(nsub);
  mu *= mu_min / mu.minCoeff();  // uniform rescale preserves the NSD status
  const SymMat cert = assemble_certificate_matrix(subsystems, M_stacked, mu);
  const double worst = max_eig(cert);
  if ((sol.status != SdpStatus::Optimal && sol.status != SdpStatus::Feasible) ||
      worst > tol) {
    const Eigen::VectorXd witness = max_eig_vector(cert);
    throw CompositionInfeasible(
        "no multipliers certify the interconnection (worst eigenvalue " +
            std::to_string(worst) + ")",
        std::vector<double>(witness.data(), witness.data() + witness.size()));
  }
  return mu;
}

ComposedModel compose_unchecked(const InterconnectionSpec& spec,
                                std::vector<SubsystemModel> subsystems,
                                const Eigen::VectorXd& mu, double tol) {
  if (static_cast<int>(subsystems.size()) != spec.count())
    throw DimensionMismatch("subsystem count differs from the interconnection");
  for (int i = 0; i < spec.count(); ++i) {
    if (subsystems[i].n != spec.subsystems[i].n() ||
        subsystems[i].p != spec.subsystems[i].p())
      throw DimensionMismatch("subsystem " + std::to_string(i) +
                              " dimensions differ from the interconnection");
  }
  if (mu.size() != spec.count())
    throw DimensionMismatch("one multiplier per subsystem required");

  ComposedModel m;
  m.certificate_eig =
      max_eig(assemble_certificate_matrix(subsystems, spec.m_stacked(), mu));
  m.certified = m.certificate_eig <= tol;
  m.spec = spec;
  m.subsystems = std::move(subsystems);
  m.mu = mu;

  const int nsub = spec.count();
  double dlo = std::numeric_limits<double>::infinity();
  double dhi = 0.0, xi = std::numeric_limits<double>::infinity();
  double pdlo = std::numeric_limits<double>::infinity(), pdhi = 0.0;
  for (int i = 0; i < nsub; ++i) {
    const auto& r = m.subsystems[i].rates;
    dlo = std::min(dlo, mu(i) * r.delta_lo);
    dhi = std::max(dhi, mu(i) * r.delta_hi);
    xi = std::min(xi, mu(i) * r.xi);
    pdlo = std::min(pdlo, r.delta_lo);
    pdhi = std::max(pdhi, r.delta_hi);
  }
  m.rates.delta_lo = dlo;
  m.rates.delta_hi_eff = nsub * dhi;
  m.rates.xi = xi;
  m.rates.paper_delta_lo = nsub * pdlo;
  m.rates.paper_delta_hi = nsub * pdhi;
  return m;
}

ComposedModel compose(const InterconnectionSpec& spec,
                      std::vector<SubsystemModel> subsystems,
                      const Eigen::VectorXd& mu, double tol) {
  ComposedModel m = compose_unchecked(spec, std::move(subsystems), mu, tol);
  if (!m.certified)
    throw CertificateViolation("certificate eigenvalue " +
                               std::to_string(m.certificate_eig) +
                               " exceeds tolerance");
  return m;
}

Eigen::VectorXd global_field(const ComposedModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.spec.n) throw DimensionMismatch("state dimension mismatch");
  if (!x.allFinite()) throw InvalidMatrix("state must be finite");
  Eigen::VectorXd out(m.spec.n);
  for (int i = 0; i < m.spec.count(); ++i) {
    const Eigen::VectorXd xi = m.spec.select_state(i, x);
    const Eigen::VectorXd wi = m.spec.select_input(i, x);
    const Eigen::VectorXd fi = eval_subsystem_field(m.subsystems[i], xi, wi);
    const auto& coords = m.spec.subsystems[i].state_coords;
    for (int j = 0; j < m.subsystems[i].n; ++j) out(coords[j]) = fi(j);
  }
  return out;
}

std::pair<double, Eigen::VectorXd> global_lyapunov(const ComposedModel& m,
                                                   const Eigen::VectorXd& x) {
  if (x.size() != m.spec.n) throw DimensionMismatch("state dimension mismatch");
  double value = 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.spec.n);
  for (int i = 0; i < m.spec.count(); ++i) {
    const Eigen::VectorXd xi = m.spec.select_state(i, x);
    const Eigen::VectorXd pxi = m.subsystems[i].P.mat() * xi;
    value += m.mu(i) * xi.dot(pxi);
    const auto& coords = m.spec.subsystems[i].state_coords;
    for (int j = 0; j < m.subsystems[i].n; ++j)
      grad(coords[j]) += 2.0 * m.mu(i) * pxi(j);
  }
  return {value, grad};
}

}  // namespace lpvds
