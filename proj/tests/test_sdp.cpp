#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "lpvds/errors.hpp"
#include "lpvds/rng.hpp"
#include "lpvds/sdp.hpp"
#include "lpvds/sym.hpp"

using namespace lpvds;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

// Roots of the characteristic polynomial of a symmetric 2x2 matrix, by the
// quadratic formula. Independent of the library eigensolver.
std::pair<double, double> eig2_oracle(double a, double b, double d) {
  const double tr = a + d;
  const double det = a * d - b * b;
  const double disc = std::sqrt(tr * tr - 4.0 * det);
  return {0.5 * (tr - disc), 0.5 * (tr + disc)};
}

}  // namespace

TEST_CASE("min_eig on identity and diagonal matrices") {
  CHECK(min_eig(SymMat::identity(2)) == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::VectorXd d(2);
  d << 3.0, -2.0;
  CHECK(min_eig(SymMat::diagonal(d)) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("min_eig matches the quadratic-formula oracle") {
  const auto [lo, hi] = eig2_oracle(2.0, 1.0, 2.0);
  CHECK(lo == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(hi == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(min_eig(SymMat(mat2(2, 1, 1, 2))) == doctest::Approx(lo).epsilon(1e-10));
}

TEST_CASE("min_eig rejects non-finite entries") {
  Eigen::MatrixXd m = mat2(1, 0, 0, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(min_eig(SymMat(m)), InvalidMatrix);
}

TEST_CASE("is_nsd tolerance behaviour") {
  CHECK(is_nsd(SymMat(3), 0.0));
  Eigen::VectorXd d(2);
  d << 1e-9, -1.0;
  CHECK(is_nsd(SymMat::diagonal(d), 1e-8));
  d << 0.1, -1.0;
  CHECK_FALSE(is_nsd(SymMat::diagonal(d), 1e-8));
}

TEST_CASE("Rayleigh quotient upper-bounds min_eig") {
  Rng rng(7);
  Eigen::MatrixXd raw(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) raw(i, j) = rng.normal();
  const SymMat m(raw);
  const double lo = min_eig(m);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd v = rng.normal_vec(4).normalized();
    CHECK(lo <= v.dot(m.mat() * v) + 1e-10);
  }
}

TEST_CASE("SymMat symmetrizes exactly") {
  Eigen::MatrixXd m = mat2(1.0, 0.3, -0.7, 2.0);
  const SymMat s(m);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(s(i, j) == s(j, i));
}

TEST_CASE("solve_sdp: active scalar constraint") {
  // minimize z^2 subject to z >= 1 (block [1 - z] <= 0).
  SdpProblem p;
  p.decision_dim = 1;
  p.objective.Q = Eigen::MatrixXd::Constant(1, 1, 2.0);
  p.objective.q = Eigen::VectorXd::Zero(1);
  LmiBlock b;
  b.dim = 1;
  b.constant = SymMat(Eigen::MatrixXd::Constant(1, 1, 1.0));
  b.var_idx = {0};
  b.coeff = {SymMat(Eigen::MatrixXd::Constant(1, 1, -1.0))};
  p.blocks.push_back(b);

  const SdpSolution sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::Optimal);
  CHECK(sol.z(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective_value ==
        doctest::Approx(sol.z(0) * sol.z(0)).epsilon(1e-9));
}

TEST_CASE("solve_sdp: feasibility with a single feasible point") {
  // diag(z, -z) <= 0 together with z >= 0 forces z = 0.
  SdpProblem p;
  p.decision_dim = 1;
  LmiBlock b;
  b.dim = 2;
  b.constant = SymMat(2);
  Eigen::VectorXd d(2);
  d << 1.0, -1.0;
  b.var_idx = {0};
  b.coeff = {SymMat::diagonal(d)};
  p.blocks.push_back(b);
  p.lower = Eigen::VectorXd::Zero(1);
  p.upper = Eigen::VectorXd::Constant(1, std::numeric_limits<double>::infinity());

  const SdpSolution sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::Feasible);
  CHECK(std::abs(sol.z(0)) <= 1e-6);
  CHECK(sol.max_block_eig <= 1e-8);
}

TEST_CASE("solve_sdp: inactive PSD constraint, grid-search oracle") {
  // minimize (z1-3)^2 + (z2-3)^2 subject to [[z1,1],[1,z2]] >= 0.
  SdpProblem p;
  p.decision_dim = 2;
  p.objective.Q = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  p.objective.q = Eigen::VectorXd::Constant(2, -6.0);
  p.objective.c = 18.0;
  LmiBlock b;
  b.dim = 2;
  b.constant = SymMat(mat2(0, -1, -1, 0));
  b.var_idx = {0, 1};
  b.coeff = {SymMat(mat2(-1, 0, 0, 0)), SymMat(mat2(0, 0, 0, -1))};
  p.blocks.push_back(b);

  const SdpSolution sol = solve_sdp(p);
  REQUIRE(sol.status == SdpStatus::Optimal);

  // Brute-force oracle over [0,5]^2 with 1e-3 resolution.
  double best = std::numeric_limits<double>::infinity();
  double bz1 = 0, bz2 = 0;
  for (int i = 0; i <= 5000; ++i) {
    const double z1 = i * 1e-3;
    for (int j = 0; j <= 5000; ++j) {
      const double z2 = j * 1e-3;
      if (z1 * z2 - 1.0 < 0.0) continue;  // det of the PSD block
      const double f = (z1 - 3) * (z1 - 3) + (z2 - 3) * (z2 - 3);
      if (f < best) {
        best = f;
        bz1 = z1;
        bz2 = z2;
      }
    }
  }
  CHECK(bz1 == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(bz2 == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(sol.z(0) == doctest::Approx(bz1).epsilon(1e-4));
  CHECK(sol.z(1) == doctest::Approx(bz2).epsilon(1e-4));
  CHECK(sol.objective_value == doctest::Approx(best).epsilon(1e-4));
}

TEST_CASE("solve_sdp: infeasible problem is reported") {
  // [z] <= -eps and [-z + 1] <= 0 (z >= 1) cannot both hold.
  SdpProblem p;
  p.decision_dim = 1;
  LmiBlock b1;
  b1.dim = 1;
  b1.constant = SymMat(1);
  b1.var_idx = {0};
  b1.coeff = {SymMat(Eigen::MatrixXd::Constant(1, 1, 1.0))};
  LmiBlock b2;
  b2.dim = 1;
  b2.constant = SymMat(Eigen::MatrixXd::Constant(1, 1, 1.0));
  b2.var_idx = {0};
  b2.coeff = {SymMat(Eigen::MatrixXd::Constant(1, 1, -1.0))};
  p.blocks = {b1, b2};
  p.epsilon_strict = 1e-6;

  const SdpSolution sol = solve_sdp(p);
  CHECK(sol.status == SdpStatus::Infeasible);
}

TEST_CASE("solve_sdp solutions satisfy recomputed block feasibility") {
  SdpProblem p;
  p.decision_dim = 2;
  p.objective.Q = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  p.objective.q = Eigen::VectorXd::Constant(2, -6.0);
  LmiBlock b;
  b.dim = 2;
  b.constant = SymMat(mat2(-2, 0.3, 0.3, -2));
  b.var_idx = {0, 1};
  b.coeff = {SymMat(mat2(1, 0, 0, 0)), SymMat(mat2(0, 0.2, 0.2, 1))};
  p.blocks.push_back(b);
  p.epsilon_strict = 1e-6;

  const SdpSolution sol = solve_sdp(p);
  REQUIRE((sol.status == SdpStatus::Optimal || sol.status == SdpStatus::Feasible));
  const double recomputed = max_block_eigenvalue(p, sol.z);
  CHECK(recomputed <= -p.epsilon_strict + 1e-8);
  CHECK(recomputed == doctest::Approx(sol.max_block_eig).epsilon(1e-12));
}

TEST_CASE("solve_sdp is deterministic") {
  SdpProblem p;
  p.decision_dim = 2;
  p.objective.Q = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  p.objective.q = Eigen::VectorXd::Constant(2, -6.0);
  LmiBlock b;
  b.dim = 2;
  b.constant = SymMat(mat2(0, -1, -1, 0));
  b.var_idx = {0, 1};
  b.coeff = {SymMat(mat2(-1, 0, 0, 0)), SymMat(mat2(0, 0, 0, -1))};
  p.blocks.push_back(b);

  const SdpSolution a = solve_sdp(p);
  const SdpSolution b2 = solve_sdp(p);
  CHECK(a.status == b2.status);
  REQUIRE(a.z.size() == b2.z.size());
  for (int i = 0; i < a.z.size(); ++i) {
    CHECK(std::memcmp(&a.z(i), &b2.z(i), sizeof(double)) == 0);
  }
}

TEST_CASE("SdpProblem validation rejects a non-PSD Hessian") {
  SdpProblem p;
  p.decision_dim = 2;
  p.objective.Q = mat2(1, 0, 0, -1);
  p.objective.q = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(solve_sdp(p), InvalidMatrix);
}
