#include "lpvds/simulator.hpp"

#include <cmath>
#include <fstream>

#include "lpvds/errors.hpp"

namespace lpvds {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::TimeLimit: return "time_limit";
    case Termination::Diverged: return "diverged";
  }
  return "unknown";
}

namespace {

constexpr double kDivergenceNorm = 1e6;

Eigen::VectorXd rk4_step(const ComposedModel& m, const Eigen::VectorXd& x,
                         double dt) {
  const Eigen::VectorXd k1 = global_field(m, x);
  const Eigen::VectorXd k2 = global_field(m, x + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = global_field(m, x + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = global_field(m, x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Rollout rollout(const ComposedModel& m, const Eigen::VectorXd& x0, double t_max,
                double dt, double conv_radius) {
  if (!(dt > 0.0) || t_max < dt)
    throw ConfigError("rollout needs dt > 0 and t_max >= dt");
  if (x0.size() != m.spec.n)
    throw DimensionMismatch("start state dimension mismatch");

  Rollout r;
  Eigen::VectorXd x = x0;
  double t = 0.0;
  r.times.push_back(t);
  r.states.push_back(x);
  r.lyapunov_values.push_back(global_lyapunov(m, x).first);
  if (x.norm() <= conv_radius) {
    r.terminated = Termination::Converged;
    return r;
  }

  const int steps = static_cast<int>(std::ceil(t_max / dt - 1e-12));
  for (int j = 0; j < steps; ++j) {
    x = rk4_step(m, x, dt);
    t += dt;
    if (!x.allFinite()) {
      r.terminated = Termination::Diverged;
      return r;
    }
    r.times.push_back(t);
    r.states.push_back(x);
    r.lyapunov_values.push_back(global_lyapunov(m, x).first);
    const double norm = x.norm();
    if (norm > kDivergenceNorm) {
      r.terminated = Termination::Diverged;
      return r;
    }
    if (norm <= conv_radius) {
      r.terminated = Termination::Converged;
      return r;
    }
  }
  r.terminated = Termination::TimeLimit;
  return r;
}

double mse(const ComposedModel& m, const DemonstrationSet& set) {
  if (!set.shifted) throw SpecMismatch("mse requires a shifted set");
  if (set.n != m.spec.n) throw DimensionMismatch("data/model dimension mismatch");
  if (!set.has_velocities()) throw SpecMismatch("mse requires velocities");
  double sum = 0.0;
  int count = 0;
  for (const auto& traj : set.trajectories) {
    for (int j = 0; j < traj.length(); ++j) {
      const Eigen::VectorXd f = global_field(m, traj.states.col(j));
      sum += (traj.velocities->col(j) - f).squaredNorm();
      ++count;
    }
  }
  return sum / count;
}

std::vector<double> per_subsystem_residual_sums(const ComposedModel& m,
                                                const DemonstrationSet& set) {
  const auto data = project_to_subsystems(set, m.spec);
  std::vector<double> sums(m.spec.count(), 0.0);
  for (int i = 0; i < m.spec.count(); ++i) {
    for (int s = 0; s < data[i].x.cols(); ++s) {
      const Eigen::VectorXd f = eval_subsystem_field(
          m.subsystems[i], data[i].x.col(s), data[i].w.col(s));
      sums[i] += (data[i].xdot.col(s) - f).squaredNorm();
    }
  }
  return sums;
}

void export_plot_data(const std::vector<Rollout>& rollouts,
                      const DemonstrationSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(12);
  out << "time";
  for (int i = 1; i <= set.n; ++i) out << ",x" << i;
  out << ",V\n";
  for (std::size_t r = 0; r < rollouts.size(); ++r) {
    out << "# rollout " << r << "\n";
    const auto& ro = rollouts[r];
    for (std::size_t j = 0; j < ro.times.size(); ++j) {
      out << ro.times[j];
      for (int i = 0; i < set.n; ++i) out << "," << ro.states[j](i);
      out << "," << ro.lyapunov_values[j] << "\n";
    }
  }
  for (std::size_t d = 0; d < set.trajectories.size(); ++d) {
    out << "# demo " << d << "\n";
    const auto& traj = set.trajectories[d];
    for (int j = 0; j < traj.length(); ++j) {
      out << j * traj.dt;
      for (int i = 0; i < set.n; ++i) out << "," << traj.states(i, j);
      out << ",\n";
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace lpvds
