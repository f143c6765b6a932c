#include "df/reward/reward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "df/error.hpp"
#include "df/rng.hpp"

namespace df::reward {

namespace {

double dist(const Vec3d& a, const Vec3d& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool finite(double v) { return std::isfinite(v); }

void check_quat(const Quatd& q, const char* what) {
  const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
  if (!finite(n) || std::abs(n - 1.0) > 1e-6)
    throw ValidationError(std::string(what) + " quaternion is not unit-norm");
}

// summed hand-to-object distance under the configured interpretation
double hand_distance(const EpisodeState& s, const RewardConfig& cfg) {
  if (cfg.hand_distance == HandDistanceMode::GripperCenter)
    return dist(s.ee.position, s.object.position);
  return dist(s.fingertips[0], s.object.position) + dist(s.fingertips[1], s.object.position);
}

bool grasped(const EpisodeState& s, const RewardConfig& cfg) {
  const double d = std::min(dist(s.fingertips[0], s.object.position),
                            dist(s.fingertips[1], s.object.position));
  return s.gripper_closed && d < cfg.grasp_radius;
}

}  // namespace

void EpisodeState::validate() const {
  for (double v : q)
    if (!finite(v)) throw ValidationError("joint position not finite");
  for (double v : qd)
    if (!finite(v)) throw ValidationError("joint velocity not finite");
  for (double v : qdd_arm)
    if (!finite(v)) throw ValidationError("joint acceleration not finite");
  for (const auto& f : fingertips)
    if (!finite(f.x) || !finite(f.y) || !finite(f.z))
      throw ValidationError("fingertip position not finite");
  if (!finite(ee.position.x) || !finite(object.position.x) || !finite(target_position.x))
    throw ValidationError("pose not finite");
  check_quat(ee.orientation, "hand");
  check_quat(object.orientation, "object");
  check_quat(target_orientation, "target");
}

void RewardConfig::validate() const {
  if (w1 <= 0 || w2 <= 0 || w3 <= 0 || w4 <= 0)
    throw ValidationError("reward weights must be positive");
  if (c1 <= 1.0 || c2 <= 1.0) throw ValidationError("bonus constants must exceed 1");
  if (action_scale <= 0 || grasp_radius <= 0 || lift_height <= 0)
    throw ValidationError("kinematic thresholds must be positive");
  if (success_pos_tol <= 0 || success_ang_tol <= 0)
    throw ValidationError("success tolerances must be positive");
  if (gripper_open <= gripper_closed)
    throw ValidationError("open gripper position must exceed closed");
}

double quat_dot(const Quatd& a, const Quatd& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

double geodesic_angle(const Quatd& a, const Quatd& b) {
  return 2.0 * std::acos(std::min(1.0, std::abs(quat_dot(a, b))));
}

ActionResult apply_action(const std::array<double, 9>& q, const std::array<double, 8>& a,
                          const RewardConfig& cfg) {
  cfg.validate();
  ActionResult r;
  r.q_target = q;
  for (int i = 0; i < 7; ++i) {
    double ai = a[static_cast<std::size_t>(i)];
    if (ai < -1.0 || ai > 1.0) {
      ai = std::clamp(ai, -1.0, 1.0);
      r.clamped = true;
    }
    r.q_target[static_cast<std::size_t>(i)] = q[static_cast<std::size_t>(i)] + cfg.action_scale * ai;
  }
  const double grip = a[7] >= 0.0 ? cfg.gripper_closed : cfg.gripper_open;
  r.q_target[7] = grip;
  r.q_target[8] = grip;
  return r;
}

double r_reach(const EpisodeState& prev, const EpisodeState& cur, const RewardConfig& cfg) {
  return hand_distance(prev, cfg) - hand_distance(cur, cfg);
}

LiftResult r_lift(const EpisodeState& prev, const EpisodeState& cur, const RewardConfig& cfg) {
  LiftResult r;
  r.is_grasped = grasped(cur, cfg);
  if (r.is_grasped)
    r.value = dist(prev.object.position, prev.target_position) -
              dist(cur.object.position, cur.target_position);
  return r;
}

OrientResult r_orient(const EpisodeState& prev, const EpisodeState& cur,
                      const RewardConfig& cfg) {
  OrientResult r;
  r.is_lifted = grasped(cur, cfg) &&
                cur.object.position.z - cfg.table_height > cfg.lift_height;
  if (r.is_lifted)
    r.value = geodesic_angle(prev.ee.orientation, prev.target_orientation) -
              geodesic_angle(cur.ee.orientation, cur.target_orientation);
  return r;
}

BonusResult r_bonus(const EpisodeState& cur, const RewardConfig& cfg, int n_success_prev) {
  if (n_success_prev < 0) throw ValidationError("success streak cannot be negative");
  BonusResult r;
  r.is_success =
      dist(cur.object.position, cur.target_position) < cfg.success_pos_tol &&
      geodesic_angle(cur.object.orientation, cur.target_orientation) < cfg.success_ang_tol;
  if (r.is_success) {
    // pays on the streak length before this step, so a first success earns c1
    r.value = cfg.c1 * std::pow(cfg.c2, n_success_prev);
    r.n_success = n_success_prev + 1;
  }
  return r;
}

double p_accel(const EpisodeState& cur) {
  double s = 0.0;
  for (double v : cur.qdd_arm) s += v * v;
  return s;
}

RewardBreakdown total_reward(const EpisodeState& prev, const EpisodeState& cur,
                             const RewardConfig& cfg, int n_success_prev) {
  cfg.validate();
  RewardBreakdown b;
  b.reach = r_reach(prev, cur, cfg);
  const auto lift = r_lift(prev, cur, cfg);
  b.lift = lift.value;
  b.is_grasped = lift.is_grasped;
  const auto orient = r_orient(prev, cur, cfg);
  b.orient = orient.value;
  b.is_lifted = orient.is_lifted;
  const auto bonus = r_bonus(cur, cfg, n_success_prev);
  b.bonus = bonus.value;
  b.is_success = bonus.is_success;
  b.n_success = bonus.n_success;
  b.accel_penalty = p_accel(cur);
  b.total = cfg.w1 * b.reach + cfg.w2 * b.lift + cfg.w3 * b.orient + b.bonus -
            cfg.w4 * b.accel_penalty;
  return b;
}

std::vector<RewardBreakdown> score_episode(const std::vector<EpisodeState>& episode,
                                           const RewardConfig& cfg) {
  if (episode.size() < 2) throw ValidationError("an episode needs at least two states");
  for (const auto& s : episode) s.validate();
  std::vector<RewardBreakdown> rows;
  rows.reserve(episode.size() - 1);
  int streak = 0;
  for (std::size_t t = 1; t < episode.size(); ++t) {
    rows.push_back(total_reward(episode[t - 1], episode[t], cfg, streak));
    streak = rows.back().n_success;
  }
  return rows;
}

ScriptKind script_kind_from_string(const std::string& s) {
  if (s == "approach") return ScriptKind::Approach;
  if (s == "grasp-lift" || s == "grasp_lift") return ScriptKind::GraspLift;
  if (s == "jerky") return ScriptKind::Jerky;
  throw ValidationError("unknown episode script: " + s);
}

namespace {

constexpr std::uint64_t kEpisodeStream = 0x45706973ULL;

double ease(double u) { return 0.5 * (1.0 - std::cos(u * 3.14159265358979323846)); }

Quatd rot_x(double angle) { return {std::cos(angle / 2), std::sin(angle / 2), 0.0, 0.0}; }
Quatd rot_z(double angle) { return {std::cos(angle / 2), 0.0, 0.0, std::sin(angle / 2)}; }

void place_fingers(EpisodeState& s, double half_gap) {
  s.fingertips[0] = {s.ee.position.x, s.ee.position.y + half_gap, s.ee.position.z - 0.05};
  s.fingertips[1] = {s.ee.position.x, s.ee.position.y - half_gap, s.ee.position.z - 0.05};
}

void fill_joints(std::vector<EpisodeState>& ep, double accel_amp) {
  const double dt = 0.05;
  for (std::size_t t = 0; t < ep.size(); ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(ep.size() - 1);
    for (int j = 0; j < 7; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      ep[t].q[ju] = 0.1 * (j + 1) * ease(u);
      ep[t].qdd_arm[ju] = accel_amp * std::sin(0.3 * static_cast<double>(t) + j);
    }
    ep[t].q[7] = ep[t].gripper_closed ? 0.0 : 0.04;
    ep[t].q[8] = ep[t].q[7];
    if (t > 0)
      for (int j = 0; j < 9; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        ep[t].qd[ju] = (ep[t].q[ju] - ep[t - 1].q[ju]) / dt;
      }
    ep[t].t = static_cast<int>(t);
  }
}

std::vector<EpisodeState> make_approach(Prng& rng) {
  const int T = 50;
  std::vector<EpisodeState> ep(static_cast<std::size_t>(T));
  const Vec3d obj = {0.5, 0.05, 0.025};
  const Vec3d start = {0.15 + rng.uniform(-0.02, 0.02), -0.1 + rng.uniform(-0.02, 0.02), 0.35};
  const Vec3d end = {obj.x, obj.y, obj.z + 0.09};  // hover just above, never touch
  for (int t = 0; t < T; ++t) {
    auto& s = ep[static_cast<std::size_t>(t)];
    const double a = ease(static_cast<double>(t) / (T - 1));
    s.ee.position = {start.x + (end.x - start.x) * a, start.y + (end.y - start.y) * a,
                     start.z + (end.z - start.z) * a};
    s.ee.orientation = rot_x(0.3);
    place_fingers(s, 0.015);
    s.object.position = obj;
    s.object.orientation = rot_z(0.4);
    s.target_position = {0.45, -0.05, 0.30};
    s.target_orientation = {1.0, 0.0, 0.0, 0.0};
    s.gripper_closed = false;
  }
  fill_joints(ep, 0.05);
  return ep;
}

std::vector<EpisodeState> make_grasp_lift(Prng& rng, double accel_amp, bool alternating) {
  const int T = 85, t_close = 25, t_hold = 60;
  std::vector<EpisodeState> ep(static_cast<std::size_t>(T));
  const Vec3d obj0 = {0.5, 0.05, 0.025};
  const Vec3d target = {0.45, -0.05, 0.30};
  const Vec3d start = {0.2 + rng.uniform(-0.02, 0.02), -0.05 + rng.uniform(-0.02, 0.02), 0.3};
  const Vec3d grasp_ee = {obj0.x, obj0.y, obj0.z + 0.045};  // fingertips land 0.02 away
  for (int t = 0; t < T; ++t) {
    auto& s = ep[static_cast<std::size_t>(t)];
    s.target_position = target;
    s.target_orientation = {1.0, 0.0, 0.0, 0.0};
    s.gripper_closed = t >= t_close;
    double tilt = 0.8, obj_spin = 0.4;
    if (t < t_close) {
      const double a = ease(static_cast<double>(t) / (t_close - 1));
      s.ee.position = {start.x + (grasp_ee.x - start.x) * a,
                       start.y + (grasp_ee.y - start.y) * a,
                       start.z + (grasp_ee.z - start.z) * a};
      s.object.position = obj0;
    } else if (t < t_hold) {
      const double a = ease(static_cast<double>(t - t_close) / (t_hold - 1 - t_close));
      s.object.position = {obj0.x + (target.x - obj0.x) * a, obj0.y + (target.y - obj0.y) * a,
                           obj0.z + (target.z - obj0.z) * a};
      s.ee.position = {s.object.position.x, s.object.position.y, s.object.position.z + 0.045};
      tilt = 0.8 * (1.0 - a);
      obj_spin = 0.4 * (1.0 - a);
    } else {
      s.object.position = target;
      s.ee.position = {target.x, target.y, target.z + 0.045};
      tilt = 0.0;
      obj_spin = 0.0;
    }
    s.ee.orientation = rot_x(tilt);
    s.object.orientation = rot_z(obj_spin);
    place_fingers(s, t >= t_close ? 0.008 : 0.015);
  }
  fill_joints(ep, accel_amp);
  if (alternating)
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < 7; ++j)
        ep[static_cast<std::size_t>(t)].qdd_arm[static_cast<std::size_t>(j)] =
            (t % 2 == 0 ? 1.5 : -1.5) * (1.0 + 0.1 * j);
  return ep;
}

}  // namespace

std::vector<EpisodeState> scripted_episode(ScriptKind kind, std::uint64_t seed,
                                           const RewardConfig& cfg) {
  cfg.validate();
  Prng rng(mix_seed(seed, kEpisodeStream));
  std::vector<EpisodeState> ep;
  switch (kind) {
    case ScriptKind::Approach: ep = make_approach(rng); break;
    case ScriptKind::GraspLift: ep = make_grasp_lift(rng, 0.05, false); break;
    case ScriptKind::Jerky: ep = make_grasp_lift(rng, 0.05, true); break;
  }
  for (const auto& s : ep) s.validate();
  return ep;
}

std::vector<double> build_observation(const EpisodeState& s, int category_id) {
  if (category_id < 0) throw ValidationError("category id must be >= 0");
  std::vector<double> o;
  o.reserve(kObservationDim);
  for (double v : s.q) o.push_back(v);
  for (double v : s.qd) o.push_back(v);
  const auto push_pose = [&o](const Pose& p) {
    o.push_back(p.position.x);
    o.push_back(p.position.y);
    o.push_back(p.position.z);
    o.push_back(p.orientation.w);
    o.push_back(p.orientation.x);
    o.push_back(p.orientation.y);
    o.push_back(p.orientation.z);
  };
  push_pose(s.ee);
  push_pose(s.object);
  o.push_back(s.target_position.x);
  o.push_back(s.target_position.y);
  o.push_back(s.target_position.z);
  o.push_back(std::log(static_cast<double>(category_id) + 1.0));
  return o;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string episode_csv_header() {
  std::string h = "t";
  for (int i = 0; i < 9; ++i) h += ",q" + std::to_string(i);
  for (int i = 0; i < 9; ++i) h += ",qd" + std::to_string(i);
  for (int i = 0; i < 7; ++i) h += ",qdd" + std::to_string(i);
  h += ",ee_px,ee_py,ee_pz,ee_qw,ee_qx,ee_qy,ee_qz";
  h += ",obj_px,obj_py,obj_pz,obj_qw,obj_qx,obj_qy,obj_qz";
  h += ",f0_x,f0_y,f0_z,f1_x,f1_y,f1_z";
  h += ",target_x,target_y,target_z,target_qw,target_qx,target_qy,target_qz";
  h += ",gripper_closed";
  return h;
}

void write_episode_csv(const std::string& path, const std::vector<EpisodeState>& episode) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path);
  f << episode_csv_header() << '\n';
  for (const auto& s : episode) {
    f << s.t;
    for (double v : s.q) f << ',' << fmt(v);
    for (double v : s.qd) f << ',' << fmt(v);
    for (double v : s.qdd_arm) f << ',' << fmt(v);
    const auto put_pose = [&f](const Pose& p) {
      f << ',' << fmt(p.position.x) << ',' << fmt(p.position.y) << ',' << fmt(p.position.z)
        << ',' << fmt(p.orientation.w) << ',' << fmt(p.orientation.x) << ','
        << fmt(p.orientation.y) << ',' << fmt(p.orientation.z);
    };
    put_pose(s.ee);
    put_pose(s.object);
    for (const auto& fp : s.fingertips)
      f << ',' << fmt(fp.x) << ',' << fmt(fp.y) << ',' << fmt(fp.z);
    f << ',' << fmt(s.target_position.x) << ',' << fmt(s.target_position.y) << ','
      << fmt(s.target_position.z);
    f << ',' << fmt(s.target_orientation.w) << ',' << fmt(s.target_orientation.x) << ','
      << fmt(s.target_orientation.y) << ',' << fmt(s.target_orientation.z);
    f << ',' << (s.gripper_closed ? 1 : 0) << '\n';
  }
}

std::vector<EpisodeState> read_episode_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line) || line != episode_csv_header())
    throw ValidationError(path + ": unexpected episode header");
  std::vector<EpisodeState> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double d;
      try {
        d = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ValidationError(path + ": bad number '" + cell + "'");
      }
      if (used != cell.size()) throw ValidationError(path + ": bad number '" + cell + "'");
      v.push_back(d);
    }
    if (v.size() != 54) throw ValidationError(path + ": expected 54 columns");
    EpisodeState s;
    std::size_t i = 0;
    s.t = static_cast<int>(v[i++]);
    for (auto& q : s.q) q = v[i++];
    for (auto& q : s.qd) q = v[i++];
    for (auto& q : s.qdd_arm) q = v[i++];
    const auto get_pose = [&v, &i] {
      Pose p;
      p.position = {v[i], v[i + 1], v[i + 2]};
      p.orientation = {v[i + 3], v[i + 4], v[i + 5], v[i + 6]};
      i += 7;
      return p;
    };
    s.ee = get_pose();
    s.object = get_pose();
    for (auto& fp : s.fingertips) {
      fp = {v[i], v[i + 1], v[i + 2]};
      i += 3;
    }
    s.target_position = {v[i], v[i + 1], v[i + 2]};
    i += 3;
    s.target_orientation = {v[i], v[i + 1], v[i + 2], v[i + 3]};
    i += 4;
    s.gripper_closed = v[i++] != 0.0;
    s.validate();
    out.push_back(s);
  }
  return out;
}

void write_breakdown_csv(const std::string& path, const std::vector<RewardBreakdown>& rows) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path);
  f << "step,reach,lift,orient,bonus,accel_penalty,total,is_grasped,is_lifted,is_success,"
       "n_success\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    f << i + 1 << ',' << fmt(r.reach) << ',' << fmt(r.lift) << ',' << fmt(r.orient) << ','
      << fmt(r.bonus) << ',' << fmt(r.accel_penalty) << ',' << fmt(r.total) << ','
      << (r.is_grasped ? 1 : 0) << ',' << (r.is_lifted ? 1 : 0) << ',' << (r.is_success ? 1 : 0)
      << ',' << r.n_success << '\n';
  }
}

}  // namespace df::reward
