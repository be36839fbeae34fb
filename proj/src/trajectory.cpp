#include "lljump/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lljump {

using model::Control;
using model::State;
using model::Vec3;

std::string to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::Takeoff: return "takeoff";
    case PhaseKind::Flight: return "flight";
    case PhaseKind::PostLanding: return "post_landing";
  }
  return "?";
}

PhaseKind phase_kind_from_string(const std::string& s) {
  if (s == "takeoff") return PhaseKind::Takeoff;
  if (s == "flight") return PhaseKind::Flight;
  if (s == "post_landing") return PhaseKind::PostLanding;
  throw SchemaError("unknown phase '" + s + "'");
}

void Trajectory::validate() const {
  const std::size_t n = states.size();
  if (n < 2) throw LengthMismatch("trajectory needs at least two knots");
  if (t.size() != n || controls.size() != n || phase.size() != n || contact.size() != n || dt.size() != n - 1) {
    throw LengthMismatch("trajectory field lengths disagree");
  }
  const std::size_t points = legs * points_per_foot;
  for (std::size_t k = 0; k < n; ++k) {
    if (controls[k].forces.size() != points || controls[k].feet.size() != legs || contact[k].size() != legs) {
      throw LengthMismatch("knot " + std::to_string(k) + " has the wrong control size");
    }
  }
}

int Trajectory::first_knot_of(PhaseKind k) const {
  const auto it = std::find(phase.begin(), phase.end(), k);
  return it == phase.end() ? -1 : static_cast<int>(it - phase.begin());
}

double Trajectory::phase_start(PhaseKind k) const {
  const int i = first_knot_of(k);
  return i < 0 ? duration() : t[i];
}

Trajectory::Sample Trajectory::sample(double time, const model::RobotModel& model) const {
  Sample s;
  const std::size_t n = states.size();
  std::size_t k = 0;
  double a = 0.0;
  if (time <= t.front()) {
    k = 0;
  } else if (time >= t.back()) {
    k = n - 2;
    a = 1.0;
  } else {
    k = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), time) - t.begin()) - 1;
    k = std::min(k, n - 2);
    a = (time - t[k]) / (t[k + 1] - t[k]);
  }
  const State& x0 = states[k];
  const State& x1 = states[k + 1];
  s.x.r = (1 - a) * x0.r + a * x1.r;
  s.x.q = model::slerp(x0.q, x1.q, a);
  s.x.H = (1 - a) * x0.H + a * x1.H;
  s.x.L = (1 - a) * x0.L + a * x1.L;

  // Forces hold from the left knot; past the end the last knot applies.
  const std::size_t kf = a >= 1.0 ? k + 1 : k;
  s.u.forces = controls[kf].forces;
  s.u.feet.resize(legs);
  for (std::size_t i = 0; i < legs; ++i) s.u.feet[i] = (1 - a) * controls[k].feet[i] + a * controls[k + 1].feet[i];
  s.phase = phase[kf];
  s.contact = contact[kf];

  const double m = model.total_mass();
  s.com_vel = s.x.H / m;
  Vec3 f_sum = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
  const auto pts = model::contact_points(s.x.q.normalized(), s.u.feet, model);
  for (std::size_t j = 0; j < s.u.forces.size(); ++j) {
    f_sum += s.u.forces[j];
    torque += (pts[j] - s.x.r).cross(s.u.forces[j]);
  }
  s.com_acc = f_sum / m + model.gravity.g;
  s.L_dot = torque;
  return s;
}

bool Trajectory::operator==(const Trajectory& o) const {
  if (legs != o.legs || points_per_foot != o.points_per_foot || t != o.t || dt != o.dt || phase != o.phase ||
      contact != o.contact || states.size() != o.states.size()) {
    return false;
  }
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (states[k].to_vector() != o.states[k].to_vector()) return false;
    if (controls[k].forces != o.controls[k].forces || controls[k].feet != o.controls[k].feet) return false;
  }
  return true;
}

namespace {

void put(std::ostream& os, double v) { os << ',' << v; }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw SchemaError("malformed number '" + s + "'");
  }
  if (used != s.size()) throw SchemaError("malformed number '" + s + "'");
  return v;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  traj.validate();
  os << "knot,t,dt,phase,r_x,r_y,r_z,q_x,q_y,q_z,q_w,H_x,H_y,H_z,L_x,L_y,L_z";
  const std::size_t points = traj.legs * traj.points_per_foot;
  for (std::size_t j = 0; j < points; ++j) os << ",f" << j << "_x,f" << j << "_y,f" << j << "_z";
  for (std::size_t i = 0; i < traj.legs; ++i) os << ",p" << i << "_x,p" << i << "_y,p" << i << "_z";
  for (std::size_t i = 0; i < traj.legs; ++i) os << ",c" << i;
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < traj.knot_count(); ++k) {
    os << k;
    put(os, traj.t[k]);
    put(os, k + 1 < traj.knot_count() ? traj.dt[k] : 0.0);
    os << ',' << to_string(traj.phase[k]);
    const auto v = traj.states[k].to_vector();
    for (int i = 0; i < v.size(); ++i) put(os, v[i]);
    for (const auto& f : traj.controls[k].forces)
      for (int i = 0; i < 3; ++i) put(os, f[i]);
    for (const auto& p : traj.controls[k].feet)
      for (int i = 0; i < 3; ++i) put(os, p[i]);
    for (bool c : traj.contact[k]) os << ',' << (c ? 1 : 0);
    os << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& is, std::size_t legs, std::size_t points_per_foot) {
  Trajectory traj;
  traj.legs = legs;
  traj.points_per_foot = points_per_foot;
  const std::size_t points = legs * points_per_foot;
  const std::size_t cols = 4 + 13 + 3 * points + 3 * legs + legs;
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("empty trajectory file");
  if (split(line).size() != cols) throw SchemaError("trajectory header has the wrong column count");
  std::vector<double> dts;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != cols) throw SchemaError("trajectory row has the wrong column count");
    std::size_t c = 1;
    traj.t.push_back(parse_double(cells[c++]));
    dts.push_back(parse_double(cells[c++]));
    traj.phase.push_back(phase_kind_from_string(cells[c++]));
    Eigen::VectorXd v(13);
    for (int i = 0; i < 13; ++i) v[i] = parse_double(cells[c++]);
    traj.states.push_back(State::from_vector(v));
    Control u;
    for (std::size_t j = 0; j < points; ++j, c += 3)
      u.forces.emplace_back(parse_double(cells[c]), parse_double(cells[c + 1]), parse_double(cells[c + 2]));
    for (std::size_t i = 0; i < legs; ++i, c += 3)
      u.feet.emplace_back(parse_double(cells[c]), parse_double(cells[c + 1]), parse_double(cells[c + 2]));
    traj.controls.push_back(std::move(u));
    std::vector<bool> contact;
    for (std::size_t i = 0; i < legs; ++i) contact.push_back(cells[c++] == "1");
    traj.contact.push_back(std::move(contact));
  }
  if (dts.size() < 2) throw SchemaError("trajectory needs at least two knots");
  traj.dt.assign(dts.begin(), dts.end() - 1);
  traj.validate();
  return traj;
}

std::string trajectory_base(const std::string& path) {
  for (const char* ext : {".csv", ".json"}) {
    const std::string e(ext);
    if (path.size() > e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0) {
      return path.substr(0, path.size() - e.size());
    }
  }
  return path;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f << content;
    if (!f) throw IoError("write to " + tmp + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename " + tmp + " to " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void save_trajectory(const Trajectory& traj, const std::string& base, const nlohmann::json& meta) {
  std::ostringstream csv;
  write_trajectory_csv(traj, csv);
  nlohmann::json side = meta;
  side["schema_version"] = 1;
  side["kind"] = "trajectory";
  side["legs"] = traj.legs;
  side["points_per_foot"] = traj.points_per_foot;
  side["knots"] = traj.knot_count();
  write_file_atomic(base + ".csv", csv.str());
  write_file_atomic(base + ".json", side.dump(2) + "\n");
}

Trajectory load_trajectory(const std::string& base_in, nlohmann::json* meta) {
  const std::string base = trajectory_base(base_in);
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_file(base + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("trajectory sidecar: ") + e.what());
  }
  if (side.value("kind", "") != "trajectory") throw SchemaError(base + ".json is not a trajectory sidecar");
  std::istringstream csv(read_file(base + ".csv"));
  Trajectory traj = read_trajectory_csv(csv, side.at("legs").get<std::size_t>(),
                                        side.at("points_per_foot").get<std::size_t>());
  if (meta) *meta = side;
  return traj;
}

}  // namespace lljump
