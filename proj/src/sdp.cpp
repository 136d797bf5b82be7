#include "lpvds/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "lpvds/errors.hpp"

namespace lpvds {

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Feasible: return "feasible";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::MaxIter: return "max_iter";
  }
  return "unknown";
}

Eigen::MatrixXd LmiBlock::eval(const Eigen::VectorXd& z) const {
  Eigen::MatrixXd f = constant.mat();
  for (std::size_t j = 0; j < var_idx.size(); ++j)
    f += z(var_idx[j]) * coeff[j].mat();
  return f;
}

double QuadObjective::eval(const Eigen::VectorXd& z) const {
  double v = c;
  if (q.size() > 0) v += q.dot(z);
  if (Q.size() > 0) v += 0.5 * z.dot(Q * z);
  return v;
}

Eigen::VectorXd QuadObjective::gradient(const Eigen::VectorXd& z) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(z.size());
  if (q.size() > 0) g += q;
  if (Q.size() > 0) g += Q * z;
  return g;
}

void SdpProblem::validate() const {
  if (decision_dim < 1) throw InvalidMatrix("decision_dim must be >= 1");
  if (epsilon_strict < 0.0)
    throw InvalidMatrix("epsilon_strict must be >= 0");
  if (objective.Q.size() > 0) {
    if (objective.Q.rows() != decision_dim || objective.Q.cols() != decision_dim)
      throw DimensionMismatch("objective Hessian dimension mismatch");
    const SymMat q(objective.Q);
    const double scale = std::max(1.0, objective.Q.cwiseAbs().maxCoeff());
    if (min_eig(q) < -1e-10 * scale)
      throw InvalidMatrix("objective Hessian is not PSD");
  }
  if (objective.q.size() > 0 && objective.q.size() != decision_dim)
    throw DimensionMismatch("objective linear term dimension mismatch");
  for (const auto& b : blocks) {
    if (b.constant.dim() != b.dim)
      throw DimensionMismatch("block constant dimension mismatch");
    if (b.var_idx.size() != b.coeff.size())
      throw DimensionMismatch("block var/coeff count mismatch");
    for (std::size_t j = 0; j < b.coeff.size(); ++j) {
      if (b.coeff[j].dim() != b.dim)
        throw DimensionMismatch("block coefficient dimension mismatch");
      if (b.var_idx[j] < 0 || b.var_idx[j] >= decision_dim)
        throw IndexOutOfRange("block variable index out of range");
      if (!b.coeff[j].mat().allFinite())
        throw InvalidMatrix("block coefficient has non-finite entries");
    }
    if (!b.constant.mat().allFinite())
      throw InvalidMatrix("block constant has non-finite entries");
  }
  if (lower.size() > 0 && lower.size() != decision_dim)
    throw DimensionMismatch("lower bound dimension mismatch");
  if (upper.size() > 0 && upper.size() != decision_dim)
    throw DimensionMismatch("upper bound dimension mismatch");
}

double max_block_eigenvalue(const SdpProblem& p, const Eigen::VectorXd& z) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : p.blocks)
    worst = std::max(worst, max_eig(SymMat(b.eval(z))));
  return worst;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInteriorMargin = 1e-6;

double bound_lo(const Eigen::VectorXd& lo, int i) {
  return lo.size() > 0 ? lo(i) : -kInf;
}
double bound_hi(const Eigen::VectorXd& hi, int i) {
  return hi.size() > 0 ? hi(i) : kInf;
}

// G_b(z) = -(F_b(z) + eps I). Interior iff every G_b is PD and bounds strict.
struct BarrierEval {
  bool interior = false;
  double phi = 0.0;                      // barrier value
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
};

class BarrierProblem {
 public:
  BarrierProblem(const SdpProblem& p, const SolverOptions& opts)
      : p_(p), opts_(opts) {
    degree_ = 0;
    for (const auto& b : p.blocks) degree_ += b.dim;
    for (int i = 0; i < p.decision_dim; ++i) {
      if (std::isfinite(bound_lo(p.lower, i))) ++degree_;
      if (std::isfinite(bound_hi(p.upper, i))) ++degree_;
    }
  }

  int degree() const { return degree_; }

  BarrierEval evaluate(const Eigen::VectorXd& z) const {
    BarrierEval ev;
    for (int i = 0; i < p_.decision_dim; ++i) {
      const double lo = bound_lo(p_.lower, i), hi = bound_hi(p_.upper, i);
      if (std::isfinite(lo)) {
        if (z(i) <= lo) return ev;
        ev.phi -= std::log(z(i) - lo);
      }
      if (std::isfinite(hi)) {
        if (z(i) >= hi) return ev;
        ev.phi -= std::log(hi - z(i));
      }
    }
    ev.llts.reserve(p_.blocks.size());
    for (const auto& b : p_.blocks) {
      Eigen::MatrixXd g = -(b.eval(z) + p_.epsilon_strict *
                                            Eigen::MatrixXd::Identity(b.dim, b.dim));
      Eigen::LLT<Eigen::MatrixXd> llt(g);
      if (llt.info() != Eigen::Success) return ev;
      double logdet = 0.0;
      const auto& l = llt.matrixLLT();
      for (int i = 0; i < b.dim; ++i) {
        if (l(i, i) <= 0.0) return ev;
        logdet += std::log(l(i, i));
      }
      ev.phi -= 2.0 * logdet;
      ev.llts.push_back(std::move(llt));
    }
    ev.interior = true;
    return ev;
  }

  // Gradient and Hessian of the barrier at an interior point; llts from
  // evaluate() at the same z.
  void derivatives(const Eigen::VectorXd& z, const BarrierEval& ev,
                   Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
    const int n = p_.decision_dim;
    grad = Eigen::VectorXd::Zero(n);
    hess = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      const double lo = bound_lo(p_.lower, i), hi = bound_hi(p_.upper, i);
      if (std::isfinite(lo)) {
        const double d = z(i) - lo;
        grad(i) -= 1.0 / d;
        hess(i, i) += 1.0 / (d * d);
      }
      if (std::isfinite(hi)) {
        const double d = hi - z(i);
        grad(i) += 1.0 / d;
        hess(i, i) += 1.0 / (d * d);
      }
    }
    for (std::size_t bi = 0; bi < p_.blocks.size(); ++bi) {
      const auto& b = p_.blocks[bi];
      const auto& llt = ev.llts[bi];
      const int nv = static_cast<int>(b.var_idx.size());
      std::vector<Eigen::MatrixXd> w(nv);
      for (int j = 0; j < nv; ++j) {
        w[j] = llt.solve(b.coeff[j].mat());
        grad(b.var_idx[j]) += w[j].trace();
      }
      for (int l = 0; l < nv; ++l) {
        for (int m = l; m < nv; ++m) {
          const double h = w[l].cwiseProduct(w[m].transpose()).sum();
          hess(b.var_idx[l], b.var_idx[m]) += h;
          if (m != l) hess(b.var_idx[m], b.var_idx[l]) += h;
        }
      }
    }
  }

  // Damped Newton on tau * f + phi from a strictly interior z. Stops early
  // when `stop` returns true for an accepted iterate.
  // Returns false when the iteration budget ran out.
  bool center(double tau, Eigen::VectorXd& z, int& iters_left,
              const std::function<bool(const Eigen::VectorXd&)>& stop = {}) const {
    BarrierEval ev = evaluate(z);
    int stalls = 0;
    while (iters_left > 0) {
      --iters_left;
      Eigen::VectorXd bgrad;
      Eigen::MatrixXd bhess;
      derivatives(z, ev, bgrad, bhess);
      Eigen::VectorXd g = tau * p_.objective.gradient(z) + bgrad;
      Eigen::MatrixXd h = bhess;
      if (p_.objective.Q.size() > 0) h += tau * p_.objective.Q;
      const double hscale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
      double reg = 1e-13 * hscale;
      Eigen::VectorXd step;
      for (;;) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(
            h + reg * Eigen::MatrixXd::Identity(h.rows(), h.cols()));
        step = ldlt.solve(-g);
        if (ldlt.info() == Eigen::Success && step.allFinite()) break;
        reg *= 100.0;
        if (reg > 1e-2 * hscale)
          throw InvalidMatrix("Newton system could not be factored");
      }
      const double decrement2 = -g.dot(step);
      if (!(decrement2 > opts_.newton_tol)) return true;

      const double psi0 = tau * p_.objective.eval(z) + ev.phi;
      const double slope = g.dot(step);
      double alpha = 1.0;
      bool moved = false;
      double achieved = 0.0;
      for (int ls = 0; ls < 70; ++ls) {
        const Eigen::VectorXd zt = z + alpha * step;
        if ((zt.array() == z.array()).all()) break;  // below float resolution
        const BarrierEval evt = evaluate(zt);
        if (evt.interior) {
          const double psit = tau * p_.objective.eval(zt) + evt.phi;
          if (psit <= psi0 + 0.25 * alpha * slope) {
            achieved = psi0 - psit;
            z = zt;
            ev = evt;
            moved = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!moved) return true;  // stalled; current point is the best we get
      if (achieved <= 1e-15 * (1.0 + std::abs(psi0))) {
        if (++stalls >= 2) return true;  // progress at floating-point noise level
      } else {
        stalls = 0;
      }
      if (stop && stop(z)) return true;
    }
    return false;
  }

 private:
  const SdpProblem& p_;
  const SolverOptions& opts_;
  int degree_ = 0;
};

Eigen::VectorXd initial_interior_of_bounds(const SdpProblem& p) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(p.decision_dim);
  for (int i = 0; i < p.decision_dim; ++i) {
    const double lo = bound_lo(p.lower, i), hi = bound_hi(p.upper, i);
    if (std::isfinite(lo) && std::isfinite(hi)) z(i) = 0.5 * (lo + hi);
    else if (std::isfinite(lo)) z(i) = lo + 1.0;
    else if (std::isfinite(hi)) z(i) = hi - 1.0;
    else z(i) = 0.0;
  }
  return z;
}

// Phase I: minimize slack s with blocks F(z) - s I <= -eps I. Returns the
// final (z, s).
struct PhaseOneResult {
  Eigen::VectorXd z;
  double s = kInf;
  bool budget_exhausted = false;
};

PhaseOneResult run_phase_one(const SdpProblem& p, const SolverOptions& opts,
                             const Eigen::VectorXd& z0, int& iters_left) {
  SdpProblem aux;
  const int n = p.decision_dim;
  aux.decision_dim = n + 1;
  aux.epsilon_strict = p.epsilon_strict;
  // Small quadratic anchor on z - z0 keeps the slack minimization bounded
  // when the feasible set is unbounded in some decision direction.
  const double anchor = 1e-6;
  aux.objective.Q = Eigen::MatrixXd::Zero(n + 1, n + 1);
  aux.objective.Q.topLeftCorner(n, n) = 2.0 * anchor *
                                        Eigen::MatrixXd::Identity(n, n);
  aux.objective.q = Eigen::VectorXd::Zero(n + 1);
  aux.objective.q.head(n) = -2.0 * anchor * z0;
  aux.objective.q(n) = 1.0;
  aux.blocks.reserve(p.blocks.size());
  for (const auto& b : p.blocks) {
    LmiBlock nb = b;
    nb.var_idx.push_back(n);
    nb.coeff.push_back(SymMat((-Eigen::MatrixXd::Identity(b.dim, b.dim)).eval()));
    aux.blocks.push_back(std::move(nb));
  }
  aux.lower = Eigen::VectorXd::Constant(n + 1, -kInf);
  aux.upper = Eigen::VectorXd::Constant(n + 1, kInf);
  if (p.lower.size() > 0) aux.lower.head(n) = p.lower;
  if (p.upper.size() > 0) aux.upper.head(n) = p.upper;

  double s0 = 0.0;
  for (const auto& b : p.blocks)
    s0 = std::max(s0, max_eig(SymMat(b.eval(z0))) + p.epsilon_strict);
  s0 += 1.0;
  aux.upper(n) = s0 + 1.0;

  Eigen::VectorXd za(n + 1);
  za.head(n) = z0;
  za(n) = s0;

  const BarrierProblem barrier(aux, opts);
  PhaseOneResult res;
  const auto interior_found = [n](const Eigen::VectorXd& zz) {
    return zz(n) < -10.0 * kInteriorMargin;
  };
  double tau = std::max(1.0, static_cast<double>(barrier.degree()) / (1.0 + s0));
  for (int stage = 0; stage < 64; ++stage) {
    if (!barrier.center(tau, za, iters_left, interior_found)) {
      res.budget_exhausted = true;
      break;
    }
    if (za(n) < -kInteriorMargin) break;  // strictly feasible point found
    if (static_cast<double>(barrier.degree()) / tau <
        0.1 * std::min(opts.feas_tol, 1e-9) * (1.0 + std::abs(za(n))))
      break;
    tau *= opts.tau_growth;
  }
  res.z = za.head(n);
  res.s = za(n);
  return res;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& p, const SolverOptions& opts) {
  p.validate();
  SdpSolution sol;
  int iters_left = opts.max_iter;

  const BarrierProblem barrier(p, opts);
  Eigen::VectorXd z = initial_interior_of_bounds(p);
  if (opts.start.size() == p.decision_dim) {
    bool inside = opts.start.allFinite();
    for (int i = 0; inside && i < p.decision_dim; ++i)
      inside = opts.start(i) > bound_lo(p.lower, i) &&
               opts.start(i) < bound_hi(p.upper, i);
    if (inside) z = opts.start;
  }
  BarrierEval ev = barrier.evaluate(z);

  bool interior = ev.interior;
  if (interior) {
    // Interior w.r.t. the barrier is not enough for phase II stability when a
    // block sits at the boundary; require a margin.
    for (const auto& b : p.blocks)
      interior = interior &&
                 max_eig(SymMat(b.eval(z))) < -p.epsilon_strict - kInteriorMargin;
  }

  if (!interior) {
    const PhaseOneResult ph1 = run_phase_one(p, opts, z, iters_left);
    z = ph1.z;
    sol.newton_iters = opts.max_iter - iters_left;
    if (ph1.s > opts.feas_tol) {
      sol.z = z;
      sol.status = ph1.budget_exhausted ? SdpStatus::MaxIter : SdpStatus::Infeasible;
      sol.message = "phase I slack " + std::to_string(ph1.s);
      sol.max_block_eig = max_block_eigenvalue(p, z);
      sol.objective_value = p.objective.eval(z);
      return sol;
    }
    if (ph1.s >= -kInteriorMargin) {
      // Feasible up to tolerance but with no usable interior; return as is.
      sol.z = z;
      sol.status = SdpStatus::Feasible;
      sol.message = "boundary-feasible point (no strict interior)";
      sol.max_block_eig = max_block_eigenvalue(p, z);
      sol.objective_value = p.objective.eval(z);
      return sol;
    }
  }

  bool converged = false;
  if (p.objective.is_zero()) {
    converged = true;  // any strictly feasible point will do
  } else {
    double tau = opts.tau0;
    for (int stage = 0; stage < 96; ++stage) {
      if (!barrier.center(tau, z, iters_left)) break;
      const double f = p.objective.eval(z);
      if (static_cast<double>(barrier.degree()) / tau <=
          opts.gap_tol * (1.0 + std::abs(f))) {
        converged = true;
        break;
      }
      tau *= opts.tau_growth;
    }
  }

  sol.z = z;
  sol.newton_iters = opts.max_iter - iters_left;
  sol.objective_value = p.objective.eval(z);
  sol.max_block_eig = max_block_eigenvalue(p, z);
  if (!converged) {
    sol.status = SdpStatus::MaxIter;
    sol.message = "Newton budget exhausted";
    return sol;
  }
  if (sol.max_block_eig > -p.epsilon_strict + opts.feas_tol) {
    sol.status = SdpStatus::MaxIter;
    sol.message = "converged point violates feasibility tolerance";
    return sol;
  }
  sol.status = p.objective.is_zero() ? SdpStatus::Feasible : SdpStatus::Optimal;
  return sol;
}

}  // namespace lpvds
