#include "lpvds/demonstrations.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lpvds/errors.hpp"

namespace lpvds {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("cannot parse number '" + s + "'", line_no);
  }
}

DemonstrationSet load_csv(const std::string& path, double dt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  const auto header = split_csv(trim(line));

  int n = 0;
  while (n < static_cast<int>(header.size()) &&
         trim(header[n]) == "x" + std::to_string(n + 1))
    ++n;
  if (n == 0) throw ParseError("header must start with x1", 1);
  bool with_vel = false;
  std::size_t col = n;
  if (col < header.size() && trim(header[col]) == "dx1") {
    for (int i = 0; i < n; ++i, ++col) {
      if (col >= header.size() || trim(header[col]) != "dx" + std::to_string(i + 1))
        throw ParseError("velocity columns must be dx1..dxn", 1);
    }
    with_vel = true;
  }
  if (col + 1 != header.size() || trim(header[col]) != "traj_id")
    throw ParseError("last header column must be traj_id", 1);

  std::vector<std::string> order;
  std::vector<std::vector<Eigen::VectorXd>> states, vels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cells = split_csv(t);
    const std::size_t expect = static_cast<std::size_t>(n) * (with_vel ? 2 : 1) + 1;
    if (cells.size() != expect)
      throw ParseError("expected " + std::to_string(expect) + " values, got " +
                           std::to_string(cells.size()),
                       line_no);
    Eigen::VectorXd x(n), v(n);
    for (int i = 0; i < n; ++i) x(i) = parse_double(trim(cells[i]), line_no);
    if (with_vel)
      for (int i = 0; i < n; ++i)
        v(i) = parse_double(trim(cells[n + i]), line_no);
    const std::string id = trim(cells.back());
    auto it = std::find(order.begin(), order.end(), id);
    std::size_t ti;
    if (it == order.end()) {
      ti = order.size();
      order.push_back(id);
      states.emplace_back();
      vels.emplace_back();
    } else {
      ti = static_cast<std::size_t>(it - order.begin());
    }
    states[ti].push_back(x);
    if (with_vel) vels[ti].push_back(v);
  }
  if (order.empty()) throw ParseError("no data rows", line_no);

  DemonstrationSet set;
  set.n = n;
  for (std::size_t t = 0; t < order.size(); ++t) {
    Trajectory traj;
    traj.dt = dt;
    traj.states.resize(n, static_cast<int>(states[t].size()));
    for (std::size_t j = 0; j < states[t].size(); ++j)
      traj.states.col(static_cast<int>(j)) = states[t][j];
    if (with_vel) {
      Eigen::MatrixXd vm(n, static_cast<int>(vels[t].size()));
      for (std::size_t j = 0; j < vels[t].size(); ++j)
        vm.col(static_cast<int>(j)) = vels[t][j];
      traj.velocities = vm;
    }
    set.trajectories.push_back(std::move(traj));
  }
  return set;
}

DemonstrationSet load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  if (!doc.contains("dt") || !doc.contains("trajectories"))
    throw ParseError("document needs 'dt' and 'trajectories'", 0);
  const double dt = doc.at("dt").get<double>();

  DemonstrationSet set;
  for (const auto& jt : doc.at("trajectories")) {
    const auto& js = jt.at("states");
    if (js.empty()) throw ParseError("trajectory with no states", 0);
    const int len = static_cast<int>(js.size());
    const int n = static_cast<int>(js.at(0).size());
    if (set.n == 0) set.n = n;
    if (n != set.n)
      throw DimensionMismatch("trajectories disagree on state dimension");
    Trajectory traj;
    traj.dt = dt;
    traj.states.resize(n, len);
    for (int j = 0; j < len; ++j) {
      if (static_cast<int>(js.at(j).size()) != n)
        throw DimensionMismatch("ragged state sample");
      for (int i = 0; i < n; ++i) traj.states(i, j) = js.at(j).at(i).get<double>();
    }
    if (jt.contains("velocities")) {
      const auto& jv = jt.at("velocities");
      if (static_cast<int>(jv.size()) != len)
        throw DimensionMismatch("velocity count differs from state count");
      Eigen::MatrixXd vm(n, len);
      for (int j = 0; j < len; ++j) {
        if (static_cast<int>(jv.at(j).size()) != n)
          throw DimensionMismatch("ragged velocity sample");
        for (int i = 0; i < n; ++i) vm(i, j) = jv.at(j).at(i).get<double>();
      }
      traj.velocities = vm;
    }
    set.trajectories.push_back(std::move(traj));
  }
  if (set.trajectories.empty()) throw ParseError("no trajectories", 0);
  return set;
}

}  // namespace

int DemonstrationSet::sample_count() const {
  int m = 0;
  for (const auto& t : trajectories) m += t.length();
  return m;
}

bool DemonstrationSet::has_velocities() const {
  for (const auto& t : trajectories)
    if (!t.velocities) return false;
  return !trajectories.empty();
}

DemonstrationSet load_demonstrations(const std::string& path, DataFormat format,
                                     double csv_dt) {
  return format == DataFormat::Csv ? load_csv(path, csv_dt) : load_json(path);
}

DemonstrationSet shift_to_origin(const DemonstrationSet& set,
                                 const std::optional<Eigen::VectorXd>& x_star) {
  Eigen::VectorXd eq;
  if (x_star) {
    if (x_star->size() != set.n)
      throw DimensionMismatch("equilibrium dimension mismatch");
    eq = *x_star;
  } else {
    eq = Eigen::VectorXd::Zero(set.n);
    for (const auto& t : set.trajectories) eq += t.states.col(t.length() - 1);
    eq /= static_cast<double>(set.trajectories.size());
  }
  DemonstrationSet out = set;
  for (auto& t : out.trajectories) t.states.colwise() -= eq;
  out.equilibrium = set.shifted && set.equilibrium.size() == set.n
                        ? Eigen::VectorXd(set.equilibrium + eq)
                        : eq;
  out.shifted = true;
  return out;
}

DemonstrationSet estimate_velocities(const DemonstrationSet& set) {
  DemonstrationSet out = set;
  for (auto& t : out.trajectories) {
    if (t.velocities) continue;
    if (t.dt <= 0.0) throw SpecMismatch("sample period must be > 0");
    const int len = t.length();
    if (len < 3) throw TooFewSamples("velocity estimation needs >= 3 samples");
    Eigen::MatrixXd v(set.n, len);
    v.col(0) = (t.states.col(1) - t.states.col(0)) / t.dt;
    for (int j = 1; j < len - 1; ++j)
      v.col(j) = (t.states.col(j + 1) - t.states.col(j - 1)) / (2.0 * t.dt);
    v.col(len - 1) = (t.states.col(len - 1) - t.states.col(len - 2)) / t.dt;
    if (out.shifted && (t.states.col(len - 1).array() == 0.0).all())
      v.col(len - 1).setZero();
    t.velocities = v;
  }
  return out;
}

DemonstrationSet with_equilibrium_sample(const DemonstrationSet& set) {
  if (!set.shifted)
    throw SpecMismatch("equilibrium sample requires a shifted set");
  if (!set.has_velocities())
    throw SpecMismatch("equilibrium sample requires velocities");
  int duplicates = 0;
  bool have_equilibrium = false;
  for (const auto& t : set.trajectories) {
    for (int j = 0; j < t.length(); ++j) {
      if ((t.states.col(j).array() == 0.0).all() &&
          (t.velocities->col(j).array() == 0.0).all())
        have_equilibrium = true;
      for (int j2 = j + 1; j2 < t.length(); ++j2)
        if ((t.states.col(j).array() == t.states.col(j2).array()).all())
          ++duplicates;
    }
  }
  if (duplicates > 0)
    std::fprintf(stderr,
                 "lpvds: warning: %d duplicate state samples after shifting\n",
                 duplicates);
  if (have_equilibrium) return set;
  DemonstrationSet out = set;
  Trajectory eq;
  eq.dt = set.trajectories.empty() ? 1.0 : set.trajectories.front().dt;
  eq.states = Eigen::MatrixXd::Zero(set.n, 1);
  eq.velocities = Eigen::MatrixXd::Zero(set.n, 1);
  out.trajectories.push_back(std::move(eq));
  return out;
}

std::vector<SubsystemData> project_to_subsystems(const DemonstrationSet& set,
                                                 const InterconnectionSpec& spec) {
  if (!set.shifted) throw SpecMismatch("projection requires a shifted set");
  if (spec.n != set.n)
    throw SpecMismatch("interconnection dimension differs from data dimension");
  if (!set.has_velocities())
    throw SpecMismatch("projection requires velocities");

  const int m = set.sample_count();
  std::vector<SubsystemData> out(spec.count());
  for (int i = 0; i < spec.count(); ++i) {
    out[i].index = i;
    out[i].x.resize(spec.subsystems[i].n(), m);
    out[i].xdot.resize(spec.subsystems[i].n(), m);
    out[i].w.resize(spec.subsystems[i].p(), m);
  }
  int col = 0;
  for (const auto& t : set.trajectories) {
    for (int j = 0; j < t.length(); ++j, ++col) {
      const Eigen::VectorXd x = t.states.col(j);
      const Eigen::VectorXd xd = t.velocities->col(j);
      for (int i = 0; i < spec.count(); ++i) {
        out[i].x.col(col) = spec.select_state(i, x);
        out[i].xdot.col(col) = spec.select_state(i, xd);
        out[i].w.col(col) = spec.select_input(i, x);
      }
    }
  }
  return out;
}

}  // namespace lpvds
