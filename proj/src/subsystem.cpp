#include "lpvds/subsystem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "lpvds/errors.hpp"
#include "lpvds/rng.hpp"

namespace lpvds {

void SubsystemHyperparams::validate() const {
  if (!(delta_lo > 0.0) || !(delta_hi > 0.0) || !(xi > 0.0) || !(d_max > 0.0))
    throw ConfigError("delta_lo, delta_hi, xi and d_max must be positive");
  if (delta_lo > delta_hi)
    throw ConfigError("delta_lo must not exceed delta_hi");
  if (epsilon_strict < 0.0) throw ConfigError("epsilon_strict must be >= 0");
  if (max_outer_iter < 1) throw ConfigError("max_outer_iter must be >= 1");
  if (!(outer_tol > 0.0)) throw ConfigError("outer_tol must be positive");
  if (!(margin_share > 0.0) || margin_share >= 1.0)
    throw ConfigError("margin_share must lie in (0, 1)");
}

SymMat SubsystemModel::assembled_supply() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p + n, p + n);
  d.topLeftCorner(p, p) = D11.mat();
  d.topRightCorner(p, n) = D12;
  d.bottomLeftCorner(n, p) = D12.transpose();
  d.bottomRightCorner(n, n) = D22.mat();
  return SymMat(d);
}

SymMat SubsystemModel::small_gain_block(int k) const {
  Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(p + n, p + n);
  const Eigen::MatrixXd& pm = P.mat();
  blk.topLeftCorner(p, p) = -D11.mat();
  blk.topRightCorner(p, n) = B[k].transpose() * pm - D12;
  blk.bottomLeftCorner(n, p) = blk.topRightCorner(p, n).transpose();
  blk.bottomRightCorner(n, n) = rates.xi * pm + A[k].transpose() * pm +
                                pm * A[k] - D22.mat();
  return SymMat(blk);
}

Eigen::VectorXd eval_subsystem_field(const SubsystemModel& m,
                                     const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& w) {
  if (x.size() != m.n || w.size() != m.p)
    throw DimensionMismatch("field input dimension mismatch");
  const Eigen::VectorXd g = gamma(m.gmm, x);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.n);
  for (int k = 0; k < m.K; ++k) {
    out += g(k) * (m.A[k] * x);
    if (m.p > 0) out += g(k) * (m.B[k] * w);
  }
  return out;
}

std::pair<double, double> tracking_error(const SubsystemModel& m,
                                         const SubsystemData& data) {
  const int samples = static_cast<int>(data.x.cols());
  double sum = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd f =
        eval_subsystem_field(m, data.x.col(s), data.w.col(s));
    sum += (data.xdot.col(s) - f).squaredNorm();
  }
  return {sum, sum / samples};
}

namespace {

// Regressor u_s = [gamma_1 x; gamma_1 w; ...; gamma_K x; gamma_K w], shared by
// the unconstrained fit and the Stage-AB objective.
struct Regression {
  Eigen::MatrixXd gammas;  // K x M
  Eigen::MatrixXd u;       // K(n+p) x M
  int n = 0, p = 0, K = 0, samples = 0;
};

Regression build_regression(const SubsystemData& data, const GmmModel& gmm) {
  Regression reg;
  reg.n = static_cast<int>(data.x.rows());
  reg.p = static_cast<int>(data.w.rows());
  reg.K = gmm.K;
  reg.samples = static_cast<int>(data.x.cols());
  if (data.xdot.rows() != reg.n || data.xdot.cols() != data.x.cols() ||
      data.w.cols() != data.x.cols())
    throw DimensionMismatch("subsystem data shapes disagree");
  if (gmm.dim != reg.n)
    throw DimensionMismatch("GMM dimension differs from subsystem state");
  reg.gammas.resize(reg.K, reg.samples);
  reg.u.resize(reg.K * (reg.n + reg.p), reg.samples);
  for (int s = 0; s < reg.samples; ++s) {
    const Eigen::VectorXd g = gamma(gmm, data.x.col(s));
    reg.gammas.col(s) = g;
    for (int k = 0; k < reg.K; ++k) {
      const int off = k * (reg.n + reg.p);
      reg.u.block(off, s, reg.n, 1) = g(k) * data.x.col(s);
      if (reg.p > 0) reg.u.block(off + reg.n, s, reg.p, 1) = g(k) * data.w.col(s);
    }
  }
  return reg;
}

// Symmetric unit matrix for entry (i, j) of a symmetric variable.
Eigen::MatrixXd sym_unit(int dim, int i, int j) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dim, dim);
  e(i, j) = 1.0;
  e(j, i) = 1.0;
  return e;
}

// Decision-variable layout for the Stage-P SDP.
struct StagePLayout {
  int n = 0, p = 0;
  int p_off = 0, d11_off = 0, d12_off = 0, d22_off = 0, t_off = 0;
  int dim = 0;

  StagePLayout(int n_, int p_, bool with_margin) : n(n_), p(p_) {
    p_off = 0;
    d11_off = p_off + n * (n + 1) / 2;
    d12_off = d11_off + p * (p + 1) / 2;
    d22_off = d12_off + p * n;
    t_off = d22_off + n * (n + 1) / 2;
    dim = t_off + (with_margin ? 1 : 0);
  }

  static int tri(int i, int j) {  // index into upper-triangular order, i <= j
    return j * (j + 1) / 2 + i;
  }
  int pvar(int i, int j) const { return p_off + tri(std::min(i, j), std::max(i, j)); }
  int d11var(int i, int j) const {
    return d11_off + tri(std::min(i, j), std::max(i, j));
  }
  int d12var(int r, int c) const { return d12_off + r * n + c; }
  int d22var(int i, int j) const {
    return d22_off + tri(std::min(i, j), std::max(i, j));
  }

  Eigen::MatrixXd unpack_p(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd m(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i) m(i, j) = m(j, i) = z(pvar(i, j));
    return m;
  }
  Eigen::MatrixXd unpack_d11(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd m(p, p);
    for (int j = 0; j < p; ++j)
      for (int i = 0; i <= j; ++i) m(i, j) = m(j, i) = z(d11var(i, j));
    return m;
  }
  Eigen::MatrixXd unpack_d12(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd m(p, n);
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = z(d12var(r, c));
    return m;
  }
  Eigen::MatrixXd unpack_d22(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd m(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i) m(i, j) = m(j, i) = z(d22var(i, j));
    return m;
  }
};

// Small-gain block for component k as an affine function of the Stage-P
// variables, at fixed (A_k, B_k). Margin variable subtracts t*I when present.
LmiBlock stage_p_block(const StagePLayout& ly, const Eigen::MatrixXd& a,
                       const Eigen::MatrixXd& b, double xi, bool with_margin) {
  const int n = ly.n, p = ly.p, d = p + n;
  LmiBlock blk;
  blk.dim = d;
  blk.constant = SymMat(d);

  // P entries enter the top-right (B'P) and bottom-right (xi P + A'P + P A).
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      const Eigen::MatrixXd e = sym_unit(n, i, j);
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
      if (p > 0) {
        c.topRightCorner(p, n) = b.transpose() * e;
        c.bottomLeftCorner(n, p) = c.topRightCorner(p, n).transpose();
      }
      c.bottomRightCorner(n, n) = xi * e + a.transpose() * e + e * a;
      blk.var_idx.push_back(ly.pvar(i, j));
      blk.coeff.push_back(SymMat(c));
    }
  }
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i <= j; ++i) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
      c.topLeftCorner(p, p) = -sym_unit(p, i, j);
      blk.var_idx.push_back(ly.d11var(i, j));
      blk.coeff.push_back(SymMat(c));
    }
  }
  for (int r = 0; r < p; ++r) {
    for (int cidx = 0; cidx < n; ++cidx) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
      c(r, p + cidx) = -1.0;
      c(p + cidx, r) = -1.0;
      blk.var_idx.push_back(ly.d12var(r, cidx));
      blk.coeff.push_back(SymMat(c));
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
      c.bottomRightCorner(n, n) = -sym_unit(n, i, j);
      blk.var_idx.push_back(ly.d22var(i, j));
      blk.coeff.push_back(SymMat(c));
    }
  }
  if (with_margin) {
    blk.var_idx.push_back(ly.t_off);
    blk.coeff.push_back(SymMat((-Eigen::MatrixXd::Identity(d, d)).eval()));
  }
  return blk;
}

// P eigenvalue bounds, supply cap and D22 <= 0, none of which carry the
// margin variable.
void append_stage_p_hard_blocks(const StagePLayout& ly,
                                const SubsystemHyperparams& hp,
                                std::vector<LmiBlock>& blocks) {
  const int n = ly.n, p = ly.p;

  LmiBlock lo;  // delta_lo I - P <= 0
  lo.dim = n;
  lo.constant = SymMat((hp.delta_lo * Eigen::MatrixXd::Identity(n, n)).eval());
  LmiBlock hi;  // P - delta_hi I <= 0
  hi.dim = n;
  hi.constant = SymMat((-hp.delta_hi * Eigen::MatrixXd::Identity(n, n)).eval());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      lo.var_idx.push_back(ly.pvar(i, j));
      lo.coeff.push_back(SymMat((-sym_unit(n, i, j)).eval()));
      hi.var_idx.push_back(ly.pvar(i, j));
      hi.coeff.push_back(SymMat(sym_unit(n, i, j)));
    }
  }
  blocks.push_back(std::move(lo));
  blocks.push_back(std::move(hi));

  // D - d_max I <= 0 on the assembled supply matrix.
  const int d = p + n;
  LmiBlock cap;
  cap.dim = d;
  cap.constant = SymMat((-hp.d_max * Eigen::MatrixXd::Identity(d, d)).eval());
  for (int j = 0; j < p; ++j)
    for (int i = 0; i <= j; ++i) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
      c.topLeftCorner(p, p) = sym_unit(p, i, j);
      cap.var_idx.push_back(ly.d11var(i, j));
      cap.coeff.push_back(SymMat(c));
    }
  for (int r = 0; r < p; ++r)
    for (int cidx = 0; cidx < n; ++cidx) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
      c(r, p + cidx) = 1.0;
      c(p + cidx, r) = 1.0;
      cap.var_idx.push_back(ly.d12var(r, cidx));
      cap.coeff.push_back(SymMat(c));
    }
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
      c.bottomRightCorner(n, n) = sym_unit(n, i, j);
      cap.var_idx.push_back(ly.d22var(i, j));
      cap.coeff.push_back(SymMat(c));
    }
  blocks.push_back(std::move(cap));

  // D22 <= 0: necessary for the composed certificate, since the composed
  // matrix restricted to subsystem i's coordinates is (M' D11 M)_ii + D22_i
  // with the cross terms vanishing (a subsystem never reads its own state).
  LmiBlock d22;
  d22.dim = n;
  d22.constant = SymMat(n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      d22.var_idx.push_back(ly.d22var(i, j));
      d22.coeff.push_back(SymMat(sym_unit(n, i, j)));
    }
  blocks.push_back(std::move(d22));
}

struct StagePResult {
  SymMat P;
  SymMat D11;
  Eigen::MatrixXd D12;
  SymMat D22;
  double margin = 0.0;  // certified upper bound on the small-gain blocks
};

std::optional<StagePResult> solve_stage_p(
    const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b,
    const SubsystemHyperparams& hp, int* failing_block) {
  const int n = static_cast<int>(a[0].rows());
  const int p = static_cast<int>(b[0].cols());
  const int kcount = static_cast<int>(a.size());

  // Phase 1: maximize the feasibility margin (minimize t with blocks <= t I).
  StagePLayout ly(n, p, true);
  SdpProblem ph1;
  ph1.decision_dim = ly.dim;
  ph1.epsilon_strict = 0.0;
  ph1.objective.q = Eigen::VectorXd::Zero(ly.dim);
  ph1.objective.q(ly.t_off) = 1.0;
  for (int k = 0; k < kcount; ++k)
    ph1.blocks.push_back(stage_p_block(ly, a[k], b[k], hp.xi, true));
  append_stage_p_hard_blocks(ly, hp, ph1.blocks);

  double a_scale = 0.0;
  for (int k = 0; k < kcount; ++k)
    a_scale = std::max(a_scale, a[k].norm() + b[k].norm());
  const double t_cap =
      10.0 * (hp.d_max + hp.xi * hp.delta_hi + 2.0 * hp.delta_hi * a_scale + 1.0);
  const double var_cap = 1e4 * std::max(1.0, hp.d_max + hp.delta_hi);
  ph1.lower = Eigen::VectorXd::Constant(ly.dim, -var_cap);
  ph1.upper = Eigen::VectorXd::Constant(ly.dim, var_cap);
  ph1.lower(ly.t_off) = -t_cap;
  ph1.upper(ly.t_off) = t_cap;

  // Interior start: P at the midpoint, D11 = I, D22 = -I, t above all blocks.
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(ly.dim);
  const double pmid = 0.5 * (hp.delta_lo + hp.delta_hi);
  for (int i = 0; i < n; ++i) z0(ly.pvar(i, i)) = pmid;
  for (int i = 0; i < p; ++i) z0(ly.d11var(i, i)) = std::min(1.0, 0.5 * hp.d_max);
  for (int i = 0; i < n; ++i) z0(ly.d22var(i, i)) = -1.0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kcount; ++k)
    worst = std::max(
        worst, max_eig(SymMat(stage_p_block(ly, a[k], b[k], hp.xi, false).eval(z0))));
  z0(ly.t_off) = std::min(worst + 1.0, t_cap - 1.0);

  SolverOptions opts = hp.sdp;
  opts.start = z0;
  const SdpSolution ph1_sol = solve_sdp(ph1, opts);
  if (ph1_sol.status != SdpStatus::Optimal &&
      ph1_sol.status != SdpStatus::Feasible) {
    if (failing_block) *failing_block = -1;
    return std::nullopt;
  }
  const double t_star = ph1_sol.z(ly.t_off);
  if (t_star > -hp.epsilon_strict) {
    if (failing_block) {
      *failing_block = 0;
      double w2 = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < kcount; ++k) {
        const double e = max_eig(SymMat(ph1.blocks[k].eval(ph1_sol.z)));
        if (e > w2) {
          w2 = e;
          *failing_block = k;
        }
      }
    }
    return std::nullopt;
  }

  // Phase 2: shape the supply matrix at a retained share of the margin:
  // minimize tr(D11) + tr(D22) subject to blocks <= rhs I.
  const double rhs = std::min(-hp.epsilon_strict, hp.margin_share * t_star);
  StagePLayout ly2(n, p, false);
  SdpProblem ph2;
  ph2.decision_dim = ly2.dim;
  ph2.epsilon_strict = 0.0;
  ph2.objective.q = Eigen::VectorXd::Zero(ly2.dim);
  for (int i = 0; i < p; ++i) ph2.objective.q(ly2.d11var(i, i)) = 1.0;
  for (int i = 0; i < n; ++i) ph2.objective.q(ly2.d22var(i, i)) = 1.0;
  ph2.objective.Q = 2e-6 * Eigen::MatrixXd::Identity(ly2.dim, ly2.dim);
  for (int k = 0; k < kcount; ++k) {
    LmiBlock blk = stage_p_block(ly2, a[k], b[k], hp.xi, false);
    blk.constant = SymMat(
        (blk.constant.mat() - rhs * Eigen::MatrixXd::Identity(p + n, p + n)).eval());
    ph2.blocks.push_back(std::move(blk));
  }
  append_stage_p_hard_blocks(ly2, hp, ph2.blocks);
  ph2.lower = Eigen::VectorXd::Constant(ly2.dim, -var_cap);
  ph2.upper = Eigen::VectorXd::Constant(ly2.dim, var_cap);

  SolverOptions opts2 = hp.sdp;
  opts2.start = ph1_sol.z.head(ly2.dim);
  const SdpSolution ph2_sol = solve_sdp(ph2, opts2);
  const bool ok = ph2_sol.status == SdpStatus::Optimal ||
                  ph2_sol.status == SdpStatus::Feasible;
  const Eigen::VectorXd& z = ok ? ph2_sol.z : ph1_sol.z;
  const StagePLayout& lyz = ok ? ly2 : ly;

  StagePResult res;
  res.P = SymMat(lyz.unpack_p(z));
  res.D11 = p > 0 ? SymMat(lyz.unpack_d11(z)) : SymMat(0);
  res.D12 = lyz.unpack_d12(z);
  res.D22 = SymMat(lyz.unpack_d22(z));
  res.margin = ok ? rhs : t_star;
  return res;
}

// Decision layout for Stage AB: per component, A_k row-major then B_k
// row-major.
struct StageABLayout {
  int n = 0, p = 0, K = 0;
  StageABLayout(int n_, int p_, int k_) : n(n_), p(p_), K(k_) {}
  int stride() const { return n * n + n * p; }
  int avar(int k, int r, int c) const { return k * stride() + r * n + c; }
  int bvar(int k, int r, int c) const { return k * stride() + n * n + r * p + c; }
  int dim() const { return K * stride(); }
};

LmiBlock stage_ab_block(const StageABLayout& ly, int k, const Eigen::MatrixXd& pm,
                        const SymMat& d11, const Eigen::MatrixXd& d12,
                        const SymMat& d22, double xi) {
  const int n = ly.n, p = ly.p, d = p + n;
  LmiBlock blk;
  blk.dim = d;
  Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(d, d);
  if (p > 0) {
    c0.topLeftCorner(p, p) = -d11.mat();
    c0.topRightCorner(p, n) = -d12;
    c0.bottomLeftCorner(n, p) = -d12.transpose();
  }
  c0.bottomRightCorner(n, n) = xi * pm - d22.mat();
  blk.constant = SymMat(c0);

  for (int r = 0; r < n; ++r)
    for (int cidx = 0; cidx < n; ++cidx) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
      Eigen::MatrixXd da = Eigen::MatrixXd::Zero(n, n);
      da.row(cidx) += pm.row(r);        // d(A'P)/dA(r,c)
      da.col(cidx) += pm.col(r);        // d(PA)/dA(r,c)
      c.bottomRightCorner(n, n) = da;
      blk.var_idx.push_back(ly.avar(k, r, cidx));
      blk.coeff.push_back(SymMat(c));
    }
  for (int r = 0; r < n; ++r)
    for (int cidx = 0; cidx < p; ++cidx) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
      c.block(cidx, p, 1, n) = pm.row(r);  // d(B'P)/dB(r,c)
      c.block(p, cidx, n, 1) = pm.col(r);
      blk.var_idx.push_back(ly.bvar(k, r, cidx));
      blk.coeff.push_back(SymMat(c));
    }
  return blk;
}

// Tracking objective over the stacked (A, B) variables. The residual row for
// output coordinate r touches only row r of every A_k and B_k, with the same
// per-sample regressor u_s.
QuadObjective stage_ab_objective(const Regression& reg,
                                 const Eigen::MatrixXd& xdot,
                                 const StageABLayout& ly, double ridge) {
  const int q = reg.K * (reg.n + reg.p);
  const Eigen::MatrixXd uu = reg.u * reg.u.transpose();
  QuadObjective obj;
  obj.Q = 2.0 * ridge * Eigen::MatrixXd::Identity(ly.dim(), ly.dim());
  obj.q = Eigen::VectorXd::Zero(ly.dim());
  obj.c = xdot.squaredNorm();

  std::vector<int> scatter(q);
  for (int r = 0; r < reg.n; ++r) {
    for (int k = 0; k < reg.K; ++k) {
      const int off = k * (reg.n + reg.p);
      for (int cdx = 0; cdx < reg.n; ++cdx)
        scatter[off + cdx] = ly.avar(k, r, cdx);
      for (int cdx = 0; cdx < reg.p; ++cdx)
        scatter[off + reg.n + cdx] = ly.bvar(k, r, cdx);
    }
    const Eigen::VectorXd rhs = reg.u * xdot.row(r).transpose();
    for (int i = 0; i < q; ++i) {
      obj.q(scatter[i]) += -2.0 * rhs(i);
      for (int j = 0; j < q; ++j) obj.Q(scatter[i], scatter[j]) += 2.0 * uu(i, j);
    }
  }
  return obj;
}

std::pair<std::vector<Eigen::MatrixXd>, std::vector<Eigen::MatrixXd>>
unpack_ab(const StageABLayout& ly, const Eigen::VectorXd& z) {
  std::vector<Eigen::MatrixXd> a(ly.K), b(ly.K);
  for (int k = 0; k < ly.K; ++k) {
    a[k].resize(ly.n, ly.n);
    b[k].resize(ly.n, ly.p);
    for (int r = 0; r < ly.n; ++r) {
      for (int c = 0; c < ly.n; ++c) a[k](r, c) = z(ly.avar(k, r, c));
      for (int c = 0; c < ly.p; ++c) b[k](r, c) = z(ly.bvar(k, r, c));
    }
  }
  return {std::move(a), std::move(b)};
}

Eigen::VectorXd pack_ab(const StageABLayout& ly,
                        const std::vector<Eigen::MatrixXd>& a,
                        const std::vector<Eigen::MatrixXd>& b) {
  Eigen::VectorXd z(ly.dim());
  for (int k = 0; k < ly.K; ++k)
    for (int r = 0; r < ly.n; ++r) {
      for (int c = 0; c < ly.n; ++c) z(ly.avar(k, r, c)) = a[k](r, c);
      for (int c = 0; c < ly.p; ++c) z(ly.bvar(k, r, c)) = b[k](r, c);
    }
  return z;
}

double tracking_sum(const Regression& reg, const Eigen::MatrixXd& xdot,
                    const std::vector<Eigen::MatrixXd>& a,
                    const std::vector<Eigen::MatrixXd>& b) {
  double sum = 0.0;
  for (int s = 0; s < reg.samples; ++s) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(reg.n);
    for (int k = 0; k < reg.K; ++k) {
      const int off = k * (reg.n + reg.p);
      f += a[k] * reg.u.block(off, s, reg.n, 1);
      if (reg.p > 0) f += b[k] * reg.u.block(off + reg.n, s, reg.p, 1);
    }
    sum += (xdot.col(s) - f).squaredNorm();
  }
  return sum;
}

}  // namespace

std::pair<std::vector<Eigen::MatrixXd>, std::vector<Eigen::MatrixXd>>
initial_fit(const SubsystemData& data, const GmmModel& gmm, double ridge,
            bool* rank_deficient) {
  const Regression reg = build_regression(data, gmm);
  const int q = reg.K * (reg.n + reg.p);
  if (reg.samples < q + 1)
    throw TooFewSamples("need at least K*(n+p)+1 samples for the initial fit");

  const Eigen::MatrixXd uu = reg.u * reg.u.transpose();
  if (rank_deficient) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(uu);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(q - 1);
    *rank_deficient = !(lo > 0.0) || hi / lo > 1e12;
  }
  const Eigen::MatrixXd normal =
      uu + ridge * Eigen::MatrixXd::Identity(q, q);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);

  std::vector<Eigen::MatrixXd> a(reg.K, Eigen::MatrixXd::Zero(reg.n, reg.n));
  std::vector<Eigen::MatrixXd> b(reg.K, Eigen::MatrixXd::Zero(reg.n, reg.p));
  for (int r = 0; r < reg.n; ++r) {
    const Eigen::VectorXd rhs = reg.u * data.xdot.row(r).transpose();
    const Eigen::VectorXd beta = ldlt.solve(rhs);
    for (int k = 0; k < reg.K; ++k) {
      const int off = k * (reg.n + reg.p);
      a[k].row(r) = beta.segment(off, reg.n).transpose();
      if (reg.p > 0) b[k].row(r) = beta.segment(off + reg.n, reg.p).transpose();
    }
  }
  return {std::move(a), std::move(b)};
}

SubsystemModel learn_subsystem(const SubsystemData& data, const GmmModel& gmm,
                               const SubsystemHyperparams& hp) {
  hp.validate();
  const Regression reg = build_regression(data, gmm);
  const int n = reg.n, p = reg.p, kcount = reg.K;

  auto [a, b] = initial_fit(data, gmm, hp.ridge);

  // Stage P with the trust-region pullback toward a known-certifiable field.
  const double rho = std::max(1.0, hp.xi);
  std::optional<StagePResult> stage_p;
  int failing_block = -1;
  const std::vector<Eigen::MatrixXd> a0 = a, b0 = b;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    const double mix = attempt / 5.0;
    for (int k = 0; k < kcount; ++k) {
      a[k] = (1.0 - mix) * a0[k] - mix * rho * Eigen::MatrixXd::Identity(n, n);
      b[k] = (1.0 - mix) * b0[k];
    }
    stage_p = solve_stage_p(a, b, hp, &failing_block);
    if (stage_p) break;
  }
  if (!stage_p)
    throw InfeasibleAtStageP(
        "no storage/supply pair exists even at the pullback field",
        failing_block);

  SubsystemModel model;
  model.index = data.index;
  model.K = kcount;
  model.n = n;
  model.p = p;
  model.A = a;
  model.B = b;
  model.P = stage_p->P;
  model.D11 = stage_p->D11;
  model.D12 = stage_p->D12;
  model.D22 = stage_p->D22;
  model.rates = {hp.delta_lo, hp.delta_hi, hp.xi, hp.d_max};
  model.gmm = gmm;

  double obj_sum = tracking_sum(reg, data.xdot, a, b);
  model.objective_history.push_back(obj_sum / reg.samples);

  // Alternation. Every iterate stays certified: Stage AB only moves (A, B)
  // inside the blocks of the current (P, D), and Stage P only replaces (P, D)
  // by a pair that certifies the current (A, B). The objective never
  // increases, so the final iterate is the best feasible one.
  const StageABLayout ly(n, p, kcount);
  for (int outer = 0; outer < hp.max_outer_iter; ++outer) {
    SdpProblem ab;
    ab.decision_dim = ly.dim();
    ab.epsilon_strict = hp.epsilon_strict;
    ab.objective = stage_ab_objective(reg, data.xdot, ly, hp.ridge);
    for (int k = 0; k < kcount; ++k)
      ab.blocks.push_back(stage_ab_block(ly, k, model.P.mat(), model.D11,
                                         model.D12, model.D22, hp.xi));
    const double ab_cap = 1e4 * std::max(1.0, a[0].norm() + 1.0);
    ab.lower = Eigen::VectorXd::Constant(ly.dim(), -ab_cap);
    ab.upper = Eigen::VectorXd::Constant(ly.dim(), ab_cap);

    SolverOptions opts = hp.sdp;
    opts.start = pack_ab(ly, a, b);
    const SdpSolution sol = solve_sdp(ab, opts);
    if (sol.status != SdpStatus::Optimal && sol.status != SdpStatus::Feasible)
      break;  // keep the last certified iterate
    auto [a_new, b_new] = unpack_ab(ly, sol.z);
    const double new_sum = tracking_sum(reg, data.xdot, a_new, b_new);
    if (new_sum <= obj_sum) {
      a = std::move(a_new);
      b = std::move(b_new);
      model.A = a;
      model.B = b;
    }
    const double rel_drop = (obj_sum - std::min(new_sum, obj_sum)) /
                            std::max(1e-12, obj_sum);
    obj_sum = std::min(new_sum, obj_sum);
    model.objective_history.push_back(obj_sum / reg.samples);
    if (rel_drop < hp.outer_tol) break;

    const auto refreshed = solve_stage_p(a, b, hp, &failing_block);
    if (!refreshed) break;  // previous (P, D) still certifies the field
    model.P = refreshed->P;
    model.D11 = refreshed->D11;
    model.D12 = refreshed->D12;
    model.D22 = refreshed->D22;
  }

  model.objective = obj_sum / reg.samples;
  return model;
}

CertificateReport check_subsystem_certificate(const SubsystemModel& m,
                                              double tol, int samples,
                                              std::uint64_t seed) {
  CertificateReport report;
  const double eps = 0.0;  // strictness is folded into the margins below

  for (int k = 0; k < m.K; ++k) {
    CheckResult c;
    c.name = "small_gain[" + std::to_string(k) + "]";
    c.worst_margin = max_eig(m.small_gain_block(k)) + eps;
    c.tolerance = tol;
    c.pass = c.worst_margin <= tol;
    c.witness = max_eig_vector(m.small_gain_block(k));
    report.checks.push_back(std::move(c));
  }
  {
    CheckResult c;
    c.name = "p_lower";
    c.worst_margin = m.rates.delta_lo - min_eig(m.P);
    c.tolerance = tol;
    c.pass = c.worst_margin <= tol;
    report.checks.push_back(std::move(c));
  }
  {
    CheckResult c;
    c.name = "p_upper";
    c.worst_margin = max_eig(m.P) - m.rates.delta_hi;
    c.tolerance = tol;
    c.pass = c.worst_margin <= tol;
    report.checks.push_back(std::move(c));
  }
  {
    CheckResult c;
    c.name = "d_cap";
    c.worst_margin = max_eig(m.assembled_supply()) - m.rates.d_max;
    c.tolerance = tol;
    c.pass = c.worst_margin <= tol;
    report.checks.push_back(std::move(c));
  }
  {
    CheckResult c;
    c.name = "d22_nsd";
    c.worst_margin = max_eig(m.D22);
    c.tolerance = tol;
    c.pass = c.worst_margin <= tol;
    report.checks.push_back(std::move(c));
  }

  // Sampled dissipation: dV/dx f <= -xi V + [w; x]' D [w; x] + tol.
  Rng rng(seed);
  CheckResult c;
  c.name = "sampled_dissipation";
  c.tolerance = tol;
  c.worst_margin = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd x = rng.normal_vec(m.n);
    const Eigen::VectorXd w = rng.normal_vec(m.p);
    const Eigen::VectorXd f = eval_subsystem_field(m, x, w);
    const double lhs = 2.0 * x.dot(m.P.mat() * f);
    Eigen::VectorXd wx(m.p + m.n);
    wx << w, x;
    const double rhs = -m.rates.xi * x.dot(m.P.mat() * x) +
                       wx.dot(m.assembled_supply().mat() * wx);
    const double margin = lhs - rhs;
    if (margin > c.worst_margin) {
      c.worst_margin = margin;
      c.witness = wx;
    }
  }
  c.pass = c.worst_margin <= tol;
  report.checks.push_back(std::move(c));
  return report;
}

}  // namespace lpvds
