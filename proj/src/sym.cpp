#include "lpvds/sym.hpp"

#include <Eigen/Eigenvalues>

#include "lpvds/errors.hpp"

namespace lpvds {

namespace {

void require_finite(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw InvalidMatrix("matrix has non-finite entries");
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solve_eig(const SymMat& m,
                                                         bool vectors) {
  require_finite(m.mat());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.compute(m.mat(), vectors ? Eigen::ComputeEigenvectors
                              : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw InvalidMatrix("symmetric eigensolver failed to converge");
  return es;
}

}  // namespace

SymMat::SymMat(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    throw InvalidMatrix("symmetric matrix must be square");
  m_ = 0.5 * (m + m.transpose());
}

Eigen::VectorXd eigenvalues(const SymMat& m) {
  return solve_eig(m, false).eigenvalues();
}

double min_eig(const SymMat& m) {
  return solve_eig(m, false).eigenvalues()(0);
}

double max_eig(const SymMat& m) {
  const auto ev = solve_eig(m, false).eigenvalues();
  return ev(ev.size() - 1);
}

bool is_nsd(const SymMat& m, double tol) { return max_eig(m) <= tol; }

bool is_psd(const SymMat& m, double tol) { return min_eig(m) >= -tol; }

Eigen::VectorXd max_eig_vector(const SymMat& m) {
  const auto es = solve_eig(m, true);
  return es.eigenvectors().col(m.dim() - 1);
}

}  // namespace lpvds
