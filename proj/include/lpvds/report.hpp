#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace lpvds {

/// One certificate check: worst margin must be <= tolerance to pass; the
/// witness is an input achieving the worst margin.
struct CheckResult {
  std::string name;
  bool pass = false;
  double worst_margin = 0.0;
  double tolerance = 0.0;
  Eigen::VectorXd witness;
};

struct CertificateReport {
  std::vector<CheckResult> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

}  // namespace lpvds
