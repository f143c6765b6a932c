#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace df::reward {

// Reward math runs in double so telescoping-sum identities hold to 1e-9.
struct Vec3d {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct Quatd {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

struct Pose {
  Vec3d position;
  Quatd orientation;
};

// Kinematic snapshot of one control step: 7 arm joints + 2 gripper joints.
struct EpisodeState {
  std::array<double, 9> q{};
  std::array<double, 9> qd{};
  std::array<double, 7> qdd_arm{};
  Pose ee;
  Pose object;
  std::array<Vec3d, 2> fingertips;
  Vec3d target_position;
  Quatd target_orientation;
  bool gripper_closed = false;
  int t = 0;

  // unit quaternions within 1e-6, everything finite
  void validate() const;
};

enum class HandDistanceMode { TwoFingertips, GripperCenter };

struct RewardConfig {
  double w1 = 1.0;   // approach shaping
  double w2 = 2.0;   // lift shaping
  double w3 = 1.0;   // orientation shaping
  double w4 = 0.1;   // acceleration penalty
  double c1 = 2.0;   // success bonus base, > 1
  double c2 = 1.1;   // success bonus growth, > 1
  double action_scale = 0.05;     // rad of joint motion per unit action
  double grasp_radius = 0.06;     // m, fingertip-to-object gate
  double lift_height = 0.05;      // m above the table
  double success_pos_tol = 0.03;  // m
  double success_ang_tol = 0.2;   // rad
  double table_height = 0.0;      // m
  double gripper_open = 0.04;     // finger joint target positions
  double gripper_closed = 0.0;
  HandDistanceMode hand_distance = HandDistanceMode::TwoFingertips;

  void validate() const;
};

struct RewardBreakdown {
  double reach = 0.0;
  double lift = 0.0;
  double orient = 0.0;
  double bonus = 0.0;
  double accel_penalty = 0.0;
  double total = 0.0;
  bool is_grasped = false;
  bool is_lifted = false;
  bool is_success = false;
  int n_success = 0;
};

double quat_dot(const Quatd& a, const Quatd& b);
// 2*acos(min(1,|<a,b>|)), the rotation angle between two unit quaternions
double geodesic_angle(const Quatd& a, const Quatd& b);

struct ActionResult {
  std::array<double, 9> q_target{};
  bool clamped = false;  // some arm component fell outside [-1,1]
};

// Arm joints move by scale * a[0..6] (clamped to [-1,1]); a[7] >= 0 closes
// the gripper, < 0 opens it, by setting both finger joints to the configured
// positions.
ActionResult apply_action(const std::array<double, 9>& q, const std::array<double, 8>& a,
                          const RewardConfig& cfg);

// Decrease in summed hand-to-object distance between consecutive states.
double r_reach(const EpisodeState& prev, const EpisodeState& cur, const RewardConfig& cfg);

struct LiftResult {
  double value = 0.0;
  bool is_grasped = false;
};
// Decrease in object-to-target distance, gated on the object being grasped
// (gripper closed and a fingertip within grasp_radius).
LiftResult r_lift(const EpisodeState& prev, const EpisodeState& cur, const RewardConfig& cfg);

struct OrientResult {
  double value = 0.0;
  bool is_lifted = false;
};
// Decrease in hand-orientation error, gated on the object being grasped and
// held above lift_height.
OrientResult r_orient(const EpisodeState& prev, const EpisodeState& cur,
                      const RewardConfig& cfg);

struct BonusResult {
  double value = 0.0;
  bool is_success = false;
  int n_success = 0;
};
// On success (object within both tolerances of the target pose) pays
// c1 * c2^n_success_prev and increments the streak; failure resets it.
BonusResult r_bonus(const EpisodeState& cur, const RewardConfig& cfg, int n_success_prev);

// Squared norm of the arm joint accelerations.
double p_accel(const EpisodeState& cur);

// w1*reach + w2*lift + w3*orient + bonus - w4*accel, with the full breakdown.
RewardBreakdown total_reward(const EpisodeState& prev, const EpisodeState& cur,
                             const RewardConfig& cfg, int n_success_prev);

// Scores consecutive state pairs, threading the success streak; length T-1.
std::vector<RewardBreakdown> score_episode(const std::vector<EpisodeState>& episode,
                                           const RewardConfig& cfg);

enum class ScriptKind { Approach, GraspLift, Jerky };
ScriptKind script_kind_from_string(const std::string& s);

// Deterministic kinematic fixture trajectories:
//   Approach: open hand closes distance to a resting object, never grasps.
//   GraspLift: approach, close the gripper, carry the object to the target
//              pose and hold it there so the success streak accumulates.
//   Jerky: the GraspLift path driven with large alternating accelerations.
std::vector<EpisodeState> scripted_episode(ScriptKind kind, std::uint64_t seed,
                                           const RewardConfig& cfg);

// Flat diagnostic observation: q(9), qd(9), ee pose(7), object pose(7),
// target position(3), ln(category_id+1) — 36 values.
inline constexpr int kObservationDim = 36;
std::vector<double> build_observation(const EpisodeState& s, int category_id);

// Episode CSV: header then one row per state; numbers at full precision so a
// round trip is bit-exact. Column order matches episode_csv_header().
std::string episode_csv_header();
void write_episode_csv(const std::string& path, const std::vector<EpisodeState>& episode);
std::vector<EpisodeState> read_episode_csv(const std::string& path);

void write_breakdown_csv(const std::string& path, const std::vector<RewardBreakdown>& rows);

}  // namespace df::reward
