#include "lpvds/interconnection.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "lpvds/errors.hpp"

namespace lpvds {

Eigen::MatrixXd InterconnectionSpec::stack_permutation() const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  int row = 0;
  for (const auto& sub : subsystems)
    for (int c : sub.state_coords) s(row++, c) = 1.0;
  return s;
}

Eigen::MatrixXd InterconnectionSpec::m_stacked() const {
  return M * stack_permutation().transpose();
}

std::pair<int, int> InterconnectionSpec::input_rows(int i) const {
  int start = 0;
  for (int j = 0; j < i; ++j) start += subsystems[j].p();
  return {start, subsystems[i].p()};
}

std::pair<int, int> InterconnectionSpec::state_cols(int i) const {
  int start = 0;
  for (int j = 0; j < i; ++j) start += subsystems[j].n();
  return {start, subsystems[i].n()};
}

Eigen::VectorXd InterconnectionSpec::select_state(int i,
                                                  const Eigen::VectorXd& x) const {
  if (x.size() != n) throw DimensionMismatch("state dimension mismatch");
  const auto& sub = subsystems[i];
  Eigen::VectorXd out(sub.n());
  for (int j = 0; j < sub.n(); ++j) out(j) = x(sub.state_coords[j]);
  return out;
}

Eigen::VectorXd InterconnectionSpec::select_input(int i,
                                                  const Eigen::VectorXd& x) const {
  if (x.size() != n) throw DimensionMismatch("state dimension mismatch");
  const auto& sub = subsystems[i];
  Eigen::VectorXd out(sub.p());
  for (int j = 0; j < sub.p(); ++j) out(j) = x(sub.input_coords[j]);
  return out;
}

InterconnectionSpec build_interconnection(int n,
                                          std::vector<SubsystemSpec> subsystems) {
  if (n < 1) throw SpecMismatch("global dimension must be >= 1");
  if (subsystems.empty()) throw SpecMismatch("need at least one subsystem");

  for (const auto& sub : subsystems) {
    if (sub.state_coords.empty())
      throw SpecMismatch("subsystem state set must be nonempty");
    for (int c : sub.state_coords)
      if (c < 0 || c >= n) throw IndexOutOfRange("state coordinate out of range");
    for (int c : sub.input_coords) {
      if (c < 0 || c >= n) throw IndexOutOfRange("input coordinate out of range");
      if (std::find(sub.state_coords.begin(), sub.state_coords.end(), c) !=
          sub.state_coords.end())
        throw SpecMismatch("input coordinates must be disjoint from states");
    }
  }

  // Deterministic ordering: ascending smallest state coordinate.
  std::sort(subsystems.begin(), subsystems.end(),
            [](const SubsystemSpec& a, const SubsystemSpec& b) {
              return *std::min_element(a.state_coords.begin(),
                                       a.state_coords.end()) <
                     *std::min_element(b.state_coords.begin(),
                                       b.state_coords.end());
            });

  std::set<int> covered;
  int total = 0;
  for (auto& sub : subsystems) {
    for (int c : sub.state_coords) {
      if (!covered.insert(c).second)
        throw NotAPartition("state coordinate assigned to two subsystems");
      ++total;
    }
  }
  if (total != n || static_cast<int>(covered.size()) != n)
    throw NotAPartition("state coordinates do not cover 1..n");

  InterconnectionSpec spec;
  spec.n = n;
  int rows = 0;
  for (std::size_t i = 0; i < subsystems.size(); ++i) {
    subsystems[i].index = static_cast<int>(i);
    rows += subsystems[i].p();
  }
  spec.subsystems = std::move(subsystems);
  spec.M = Eigen::MatrixXd::Zero(rows, n);
  int row = 0;
  for (const auto& sub : spec.subsystems)
    for (int c : sub.input_coords) spec.M(row++, c) = 1.0;
  return spec;
}

InterconnectionSpec fully_connected_scalar(int n) {
  if (n < 2) throw SpecMismatch("fully connected topology needs n >= 2");
  std::vector<SubsystemSpec> subs(n);
  for (int i = 0; i < n; ++i) {
    subs[i].state_coords = {i};
    for (int j = 0; j < n; ++j)
      if (j != i) subs[i].input_coords.push_back(j);
  }
  return build_interconnection(n, std::move(subs));
}

InterconnectionSpec from_config(const nlohmann::json& desc) {
  if (!desc.is_object() || !desc.contains("n") || !desc.contains("subsystems"))
    throw SpecMismatch("topology config needs 'n' and 'subsystems'");
  const int n = desc.at("n").get<int>();
  std::vector<SubsystemSpec> subs;
  for (const auto& js : desc.at("subsystems")) {
    SubsystemSpec sub;
    for (const auto& c : js.at("states")) {
      const int idx = c.get<int>();
      if (idx < 1 || idx > n)
        throw IndexOutOfRange("state coordinate " + std::to_string(idx) +
                              " out of 1.." + std::to_string(n));
      sub.state_coords.push_back(idx - 1);
    }
    if (js.contains("inputs")) {
      for (const auto& c : js.at("inputs")) {
        const int idx = c.get<int>();
        if (idx < 1 || idx > n)
          throw IndexOutOfRange("input coordinate " + std::to_string(idx) +
                                " out of 1.." + std::to_string(n));
        sub.input_coords.push_back(idx - 1);
      }
    }
    subs.push_back(std::move(sub));
  }
  return build_interconnection(n, std::move(subs));
}

}  // namespace lpvds
