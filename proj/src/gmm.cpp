#include "lpvds/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "lpvds/errors.hpp"
#include "lpvds/rng.hpp"

namespace lpvds {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::MatrixXd floor_spd(const Eigen::MatrixXd& cov, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Indices of bitwise-distinct columns.
std::vector<int> distinct_columns(const Eigen::MatrixXd& pts) {
  std::vector<int> idx;
  for (int j = 0; j < pts.cols(); ++j) {
    bool dup = false;
    for (int seen : idx) {
      if ((pts.col(j).array() == pts.col(seen).array()).all()) {
        dup = true;
        break;
      }
    }
    if (!dup) idx.push_back(j);
  }
  return idx;
}

std::vector<int> kmeanspp_centers(const Eigen::MatrixXd& pts,
                                  const std::vector<int>& candidates, int k,
                                  Rng& rng) {
  std::vector<int> centers;
  centers.push_back(candidates[static_cast<int>(rng.next_u64() %
                                                candidates.size())]);
  Eigen::VectorXd d2(candidates.size());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (int c : centers)
        best = std::min(best,
                        (pts.col(candidates[j]) - pts.col(c)).squaredNorm());
      d2(j) = best;
      total += best;
    }
    if (total <= 0.0) break;  // no more distinct mass
    double r = rng.uniform() * total;
    std::size_t pick = 0;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      r -= d2(j);
      if (r <= 0.0) {
        pick = j;
        break;
      }
    }
    centers.push_back(candidates[pick]);
  }
  return centers;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

void GmmModel::finalize() {
  if (K < 1 || dim < 1) throw InvalidMatrix("GMM has no components");
  if (static_cast<int>(weights.size()) != K ||
      static_cast<int>(means.size()) != K ||
      static_cast<int>(covariances.size()) != K)
    throw DimensionMismatch("GMM field sizes disagree with K");
  chol_.clear();
  log_norm_.clear();
  for (int k = 0; k < K; ++k) {
    if (weights[k] <= 0.0)
      throw InvalidMatrix("GMM weights must be positive");
    Eigen::LLT<Eigen::MatrixXd> llt(covariances[k].mat());
    if (llt.info() != Eigen::Success)
      throw InvalidMatrix("GMM covariance is not positive definite");
    Eigen::MatrixXd l = llt.matrixL();
    double logdet_half = 0.0;
    for (int i = 0; i < dim; ++i) logdet_half += std::log(l(i, i));
    log_norm_.push_back(std::log(weights[k]) - logdet_half -
                        0.5 * dim * kLog2Pi);
    chol_.push_back(std::move(l));
  }
}

Eigen::VectorXd GmmModel::component_log_densities(
    const Eigen::VectorXd& x) const {
  if (chol_.empty()) throw InvalidMatrix("GMM not finalized");
  if (x.size() != dim) throw DimensionMismatch("GMM input dimension mismatch");
  Eigen::VectorXd out(K);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd v =
        chol_[k].triangularView<Eigen::Lower>().solve(x - means[k]);
    out(k) = log_norm_[k] - 0.5 * v.squaredNorm();
  }
  return out;
}

Eigen::VectorXd gamma(const GmmModel& model, const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw InvalidMatrix("gamma input must be finite");
  const Eigen::VectorXd logs = model.component_log_densities(x);
  const Eigen::ArrayXd u = (logs.array() - logs.maxCoeff()).exp();
  return (u / u.sum()).matrix();
}

double log_likelihood(const GmmModel& model, const Eigen::MatrixXd& points) {
  double ll = 0.0;
  for (int j = 0; j < points.cols(); ++j)
    ll += log_sum_exp(model.component_log_densities(points.col(j)));
  return ll;
}

GmmModel fit_gmm(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                 const GmmFitOptions& opts, GmmFitInfo* info) {
  const int d = static_cast<int>(points.rows());
  const int m = static_cast<int>(points.cols());
  if (k < 1) throw InvalidMatrix("K must be >= 1");
  if (m < k * (d + 1))
    throw TooFewSamples("need at least K*(d+1) points to fit a GMM");
  if (!points.allFinite()) throw InvalidMatrix("points must be finite");

  GmmFitInfo local_info;
  local_info.requested_k = k;

  const Eigen::VectorXd mean = points.rowwise().mean();
  const Eigen::MatrixXd centered = points.colwise() - mean;
  const Eigen::MatrixXd sample_cov =
      (centered * centered.transpose()) / std::max(1, m - 1);
  double scale = sample_cov.trace() / d;
  if (!(scale > 0.0)) scale = 1.0;
  const double cov_floor = opts.cov_floor_rel * scale;

  const std::vector<int> distinct = distinct_columns(points);
  int k_eff = std::min<int>(k, static_cast<int>(distinct.size()));
  if (k_eff < k) local_info.degenerate_removed = true;

  Rng rng(seed);
  const std::vector<int> centers = kmeanspp_centers(points, distinct, k_eff, rng);
  k_eff = static_cast<int>(centers.size());

  GmmModel model;
  model.K = k_eff;
  model.dim = d;
  const Eigen::MatrixXd init_cov = floor_spd(sample_cov, cov_floor);
  for (int c : centers) {
    model.weights.push_back(1.0 / k_eff);
    model.means.push_back(points.col(c));
    model.covariances.push_back(SymMat(init_cov));
  }
  model.finalize();

  double prev_ll = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd resp(model.K, m);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // E-step in log space.
    double ll = 0.0;
    for (int j = 0; j < m; ++j) {
      const Eigen::VectorXd logs = model.component_log_densities(points.col(j));
      const double lse = log_sum_exp(logs);
      ll += lse;
      resp.col(j) = (logs.array() - lse).exp();
    }
    if (std::isfinite(prev_ll) && ll < prev_ll - 1e-7 * (1.0 + std::abs(ll)))
      throw InvalidMatrix("EM log-likelihood decreased");
    local_info.iterations = iter + 1;
    const bool converged = std::isfinite(prev_ll) &&
                           (ll - prev_ll) < opts.loglik_tol;
    prev_ll = ll;

    // M-step with covariance floor.
    const Eigen::VectorXd counts = resp.rowwise().sum();
    bool removed = false;
    for (int kk = 0; kk < model.K; ++kk) {
      if (counts(kk) / m < opts.weight_floor) {
        model.weights.erase(model.weights.begin() + kk);
        model.means.erase(model.means.begin() + kk);
        model.covariances.erase(model.covariances.begin() + kk);
        model.K -= 1;
        local_info.degenerate_removed = true;
        removed = true;
        break;
      }
    }
    if (removed) {
      if (model.K < 1)
        throw DegenerateComponent("all GMM components degenerated");
      double wsum = 0.0;
      for (double w : model.weights) wsum += w;
      for (double& w : model.weights) w /= wsum;
      model.finalize();
      resp.resize(model.K, m);
      prev_ll = -std::numeric_limits<double>::infinity();
      continue;
    }
    for (int kk = 0; kk < model.K; ++kk) {
      model.weights[kk] = counts(kk) / m;
      model.means[kk] = (points * resp.row(kk).transpose()) / counts(kk);
      const Eigen::MatrixXd diff = points.colwise() - model.means[kk];
      const Eigen::MatrixXd cov =
          (diff * resp.row(kk).asDiagonal() * diff.transpose()) / counts(kk);
      model.covariances[kk] = SymMat(floor_spd(cov, cov_floor));
    }
    // Renormalize to kill accumulated rounding in the weight sum.
    double wsum = 0.0;
    for (double w : model.weights) wsum += w;
    for (double& w : model.weights) w /= wsum;
    model.finalize();
    if (converged) break;
  }

  local_info.final_k = model.K;
  local_info.loglik = log_likelihood(model, points);
  const int params = (model.K - 1) + model.K * d + model.K * d * (d + 1) / 2;
  local_info.bic = -2.0 * local_info.loglik + params * std::log(double(m));
  if (info) *info = local_info;
  return model;
}

int select_k(const Eigen::MatrixXd& points, const std::vector<int>& k_range,
             std::uint64_t seed, const GmmFitOptions& opts) {
  if (k_range.empty()) throw InvalidMatrix("k_range must be nonempty");
  const int d = static_cast<int>(points.rows());
  const int m = static_cast<int>(points.cols());
  std::vector<int> ks = k_range;
  std::sort(ks.begin(), ks.end());
  double best_bic = std::numeric_limits<double>::infinity();
  int best_k = -1;
  for (int k : ks) {
    if (k < 1 || m < k * (d + 1)) continue;  // cannot be fit non-degenerately
    GmmFitInfo info;
    try {
      fit_gmm(points, k, seed, opts, &info);
    } catch (const Error&) {
      continue;
    }
    if (info.final_k != k) continue;  // degenerate; covered by a smaller K
    if (info.bic < best_bic) {
      best_bic = info.bic;
      best_k = k;
    }
  }
  if (best_k < 0) throw DegenerateComponent("no candidate K could be fit");
  return best_k;
}

}  // namespace lpvds
