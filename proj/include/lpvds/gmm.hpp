#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "lpvds/sym.hpp"

namespace lpvds {

/// K-component Gaussian mixture over R^d. The mixing function gamma(x) is the
/// posterior responsibility vector, evaluated in log space.
struct GmmModel {
  int K = 0;
  int dim = 0;
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<SymMat> covariances;

  /// Rebuilds the cached Cholesky factors. Must be called after any direct
  /// mutation of weights/means/covariances (fit and deserialization do it).
  void finalize();
  bool finalized() const { return !chol_.empty(); }

  /// Per-component log(pi_k) + log N(x; mean_k, cov_k).
  Eigen::VectorXd component_log_densities(const Eigen::VectorXd& x) const;

 private:
  friend Eigen::VectorXd gamma(const GmmModel&, const Eigen::VectorXd&);
  std::vector<Eigen::MatrixXd> chol_;   // lower Cholesky factors
  std::vector<double> log_norm_;        // -0.5 logdet - d/2 log(2 pi) + log pi_k
};

struct GmmFitOptions {
  int max_iter = 500;
  double loglik_tol = 1e-8;
  double cov_floor_rel = 1e-6;   // floor = rel * trace(sample cov) / d
  double weight_floor = 1e-6;    // components below this are removed
};

struct GmmFitInfo {
  int requested_k = 0;
  int final_k = 0;
  bool degenerate_removed = false;
  double loglik = 0.0;
  double bic = 0.0;
  int iterations = 0;
};

/// EM with seeded k-means++ initialisation; deterministic given the seed.
/// points holds one sample per column (d x M).
GmmModel fit_gmm(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                 const GmmFitOptions& opts = {}, GmmFitInfo* info = nullptr);

/// Mixing weights gamma_k(x): positive, summing to one.
Eigen::VectorXd gamma(const GmmModel& model, const Eigen::VectorXd& x);

double log_likelihood(const GmmModel& model, const Eigen::MatrixXd& points);

/// BIC model selection over the candidate component counts; ties and
/// equal-BIC candidates resolve to the smaller K.
int select_k(const Eigen::MatrixXd& points, const std::vector<int>& k_range,
             std::uint64_t seed, const GmmFitOptions& opts = {});

}  // namespace lpvds
