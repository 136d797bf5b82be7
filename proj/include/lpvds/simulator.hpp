#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "lpvds/composer.hpp"
#include "lpvds/demonstrations.hpp"

namespace lpvds {

enum class Termination { Converged, TimeLimit, Diverged };

std::string to_string(Termination t);

struct Rollout {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<double> lyapunov_values;
  Termination terminated = Termination::TimeLimit;
};

/// Fixed-step RK4 integration of the composed field. Stops as Converged when
/// ||x|| <= conv_radius, Diverged when ||x|| > 1e6 or the state goes
/// non-finite, otherwise runs to t_max.
Rollout rollout(const ComposedModel& m, const Eigen::VectorXd& x0, double t_max,
                double dt, double conv_radius);

/// Mean squared velocity-prediction residual over all samples.
double mse(const ComposedModel& m, const DemonstrationSet& set);

/// Per-subsystem residual sums; their total equals the global residual sum.
std::vector<double> per_subsystem_residual_sums(const ComposedModel& m,
                                                const DemonstrationSet& set);

/// Plot-ready CSV: `time,x1,...,xn,V` header, one `# rollout i` section per
/// rollout and one `# demo j` section per demonstration (demo rows leave the
/// V column empty).
void export_plot_data(const std::vector<Rollout>& rollouts,
                      const DemonstrationSet& set, const std::string& path);

}  // namespace lpvds
