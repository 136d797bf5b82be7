#pragma once

#include <Eigen/Core>

namespace lpvds {

/// Dense real symmetric matrix. Symmetry is enforced on every construction
/// path, so entries(i, j) == entries(j, i) holds exactly.
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(int n) : m_(Eigen::MatrixXd::Zero(n, n)) {}
  explicit SymMat(const Eigen::MatrixXd& m);

  static SymMat identity(int n) {
    return SymMat(Eigen::MatrixXd::Identity(n, n).eval());
  }
  static SymMat diagonal(const Eigen::VectorXd& d) {
    return SymMat(Eigen::MatrixXd(d.asDiagonal()));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  void set(int i, int j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Eigen::MatrixXd& mat() const { return m_; }

  SymMat operator+(const SymMat& o) const { return SymMat(m_ + o.m_); }
  SymMat operator-(const SymMat& o) const { return SymMat(m_ - o.m_); }
  SymMat operator*(double s) const { return SymMat((m_ * s).eval()); }

 private:
  Eigen::MatrixXd m_;
};

/// Eigenvalues in ascending order. Throws InvalidMatrix on non-finite input.
Eigen::VectorXd eigenvalues(const SymMat& m);

double min_eig(const SymMat& m);
double max_eig(const SymMat& m);

/// True iff the largest eigenvalue is <= tol.
bool is_nsd(const SymMat& m, double tol);

/// True iff the smallest eigenvalue is >= -tol.
bool is_psd(const SymMat& m, double tol);

/// Unit eigenvector for the largest eigenvalue (witness direction).
Eigen::VectorXd max_eig_vector(const SymMat& m);

}  // namespace lpvds
