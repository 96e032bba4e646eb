#ifndef MMRL_SIM_H_
#define MMRL_SIM_H_

#include <array>
#include <cstdint>
#include <span>

#include "mmrl/core.h"
#include "mmrl/trajectory.h"

namespace mmrl {

// Kinematic convention
// --------------------
// The base is a prismatic joint along world x. The shoulder sits at
// (base_x, 0, shoulder_height). Joint q[0] pans about +z, q[1] pitches the
// upper arm up from horizontal, q[2] is the elbow angle relative to the
// upper arm. With q = 0 the arm points straight along +x, so
//   fk(0, 0) = (link1 + link2, 0, shoulder_height).
// The elbow-down branch has q[2] >= 0 (elbow below the shoulder-target
// line).
struct RobotParams {
  double link1_length = 0.425;
  double link2_length = 0.392;
  double shoulder_height = 0.70;
  std::array<Interval, 3> joint_limits = {
      Interval{-kPi, kPi}, Interval{-kPi, kPi}, Interval{0.0, kPi}};
  double reach_min = 0.30;
  double reach_max = 0.80;
  double base_step_max = 0.05;
  double ee_step_max = 0.05;
  double gripper_grasp_radius = 0.05;
  // Home gripper offset from the shoulder.
  Vec3 home_offset{0.50, 0.0, 0.0};

  // Throws std::invalid_argument on inconsistent values.
  void validate() const;
};

Vec3 shoulder_position(double base_x, const RobotParams& params);

// True when every point of `box` is reachable for some base position, i.e.
// the box lies in the tube of radius reach_max around the shoulder axis.
bool inside_reachable_tube(const Box& box, const RobotParams& params);

Vec3 fk(const Vec3& q, double base_x, const RobotParams& params);

struct IkResult {
  bool reachable = false;
  Vec3 q = Vec3::Zero();
  // Equal to the requested target when reachable; otherwise the radial
  // projection onto the reachable shell, which `q` reaches.
  Vec3 target = Vec3::Zero();
};

IkResult ik(const Vec3& target, double base_x, const RobotParams& params);

struct DynamicsParams {
  double actuation_gain = 1.0;
  double lag_alpha = 1.0;
  double base_speed_scale = 1.0;
  double arm_speed_scale = 1.0;
};

struct DynamicsRanges {
  Interval actuation_gain{0.8, 1.2};
  Interval lag_alpha{0.6, 1.0};
  Interval base_speed_scale{0.8, 1.2};
  Interval arm_speed_scale{0.8, 1.2};

  // Ranges widened about their centers by `factor` (1.5 = 50% wider);
  // lag_alpha stays inside (0, 1].
  DynamicsRanges widened(double factor) const;
};

DynamicsParams randomize_dynamics(std::uint64_t rng_seed,
                                  const DynamicsRanges& ranges);

struct SimState {
  double base_x = 0.0;
  Vec3 q = Vec3::Zero();
  double qd_base = 0.0;
  Vec3 qd = Vec3::Zero();
  bool gripper_closed = false;
  bool gripper_just_closed = false;  // open -> closed on the last step
  Vec3 gripper_pos = Vec3::Zero();
  Vec3 gripper_vel = Vec3::Zero();  // finite difference over the last step
  Vec3 object_pos = Vec3::Zero();
  Vec3 object_vel = Vec3::Zero();
  bool object_grasped = false;
  Eigen::Vector4d prev_command = Eigen::Vector4d::Zero();
  int step_index = 0;
  bool clamped = false;  // IK clamped the last arm target
  DynamicsParams dynamics;
};

// Robot at the home pose: base at 0, gripper at shoulder + home_offset,
// object at the trajectory start.
SimState home_state(const RobotParams& params, const DynamicsParams& dynamics,
                    const GoalSample& goal);

// One control step. `action` holds (dx, dy, dz, dbase[, gripper]) in
// [-1, 1]; components are clamped. The gripper component, when present,
// closes the gripper if > 0.
SimState apply_action(const SimState& state, std::span<const double> action,
                      const RobotParams& params, double dt = kDefaultDt);

// Moves the object to the goal for the current step index, or keeps it in
// the gripper once grasped.
SimState step_object(const SimState& state, const GoalSample& goal,
                     double dt = kDefaultDt);
SimState step_object(const SimState& state, const TrajectorySpec& spec,
                     double dt = kDefaultDt);

// Grasp succeeds when the gripper closed on this step within the grasp
// radius of the object.
bool check_grasp(const SimState& state, const RobotParams& params);

}  // namespace mmrl

#endif  // MMRL_SIM_H_
