#include "mmrl/sim.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mmrl {

void RobotParams::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(what); };
  if (!(link1_length > 0 && link2_length > 0)) fail("link lengths must be > 0");
  if (!(reach_min < reach_max)) fail("reach_min must be < reach_max");
  if (reach_max > link1_length + link2_length)
    fail("reach_max exceeds link1 + link2");
  if (reach_min < std::abs(link1_length - link2_length))
    fail("reach_min below |link1 - link2|");
  if (!(base_step_max > 0 && ee_step_max > 0)) fail("step maxima must be > 0");
  if (!(gripper_grasp_radius > 0)) fail("grasp radius must be > 0");
  for (const Interval& lim : joint_limits) {
    if (!std::isfinite(lim.lo) || !std::isfinite(lim.hi) || lim.lo > lim.hi)
      fail("joint limits must be finite and ordered");
  }
  double home = home_offset.norm();
  if (home < reach_min || home > reach_max) fail("home pose outside reach");
}

Vec3 shoulder_position(double base_x, const RobotParams& params) {
  return {base_x, 0.0, params.shoulder_height};
}

bool inside_reachable_tube(const Box& box, const RobotParams& params) {
  for (double y : {box.lo.y(), box.hi.y()}) {
    for (double z : {box.lo.z(), box.hi.z()}) {
      if (std::hypot(y, z - params.shoulder_height) > params.reach_max)
        return false;
    }
  }
  return true;
}

Vec3 fk(const Vec3& q, double base_x, const RobotParams& params) {
  const double l1 = params.link1_length;
  const double l2 = params.link2_length;
  double radial = l1 * std::cos(q[1]) + l2 * std::cos(q[1] + q[2]);
  double height = l1 * std::sin(q[1]) + l2 * std::sin(q[1] + q[2]);
  return shoulder_position(base_x, params) +
         Vec3(radial * std::cos(q[0]), radial * std::sin(q[0]), height);
}

namespace {

// Analytic pan + planar two-link solution, elbow-down.
Vec3 solve_reachable(const Vec3& rel, const RobotParams& params) {
  const double l1 = params.link1_length;
  const double l2 = params.link2_length;
  double radial = std::hypot(rel.x(), rel.y());
  double pan = radial > 0.0 ? std::atan2(rel.y(), rel.x()) : 0.0;
  double c2 = (rel.squaredNorm() - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  double elbow = std::acos(std::clamp(c2, -1.0, 1.0));
  double shoulder = std::atan2(rel.z(), radial) -
                    std::atan2(l2 * std::sin(elbow), l1 + l2 * std::cos(elbow));
  if (shoulder < -kPi) shoulder += 2.0 * kPi;
  return {pan, shoulder, elbow};
}

bool within_limits(const Vec3& q, const RobotParams& params) {
  for (int i = 0; i < 3; ++i) {
    if (!params.joint_limits[i].contains(q[i])) return false;
  }
  return true;
}

}  // namespace

IkResult ik(const Vec3& target, double base_x, const RobotParams& params) {
  const Vec3 shoulder = shoulder_position(base_x, params);
  Vec3 rel = target - shoulder;
  double dist = rel.norm();
  IkResult out;
  out.reachable = dist >= params.reach_min && dist <= params.reach_max;
  if (!out.reachable) {
    Vec3 dir = dist > 0.0 ? Vec3(rel / dist) : Vec3::UnitX();
    rel = dir * std::clamp(dist, params.reach_min, params.reach_max);
  }
  out.q = solve_reachable(rel, params);
  out.target = shoulder + rel;
  if (!within_limits(out.q, params)) {
    for (int i = 0; i < 3; ++i)
      out.q[i] = std::clamp(out.q[i], params.joint_limits[i].lo,
                            params.joint_limits[i].hi);
    out.reachable = false;
    out.target = fk(out.q, base_x, params);
  }
  return out;
}

DynamicsRanges DynamicsRanges::widened(double factor) const {
  auto widen = [factor](Interval iv) {
    double c = 0.5 * (iv.lo + iv.hi);
    double h = 0.5 * iv.width() * factor;
    return Interval{c - h, c + h};
  };
  DynamicsRanges out{widen(actuation_gain), widen(lag_alpha),
                     widen(base_speed_scale), widen(arm_speed_scale)};
  out.lag_alpha.hi = std::min(out.lag_alpha.hi, 1.0);
  out.lag_alpha.lo = std::clamp(out.lag_alpha.lo, 1e-3, out.lag_alpha.hi);
  return out;
}

DynamicsParams randomize_dynamics(std::uint64_t rng_seed,
                                  const DynamicsRanges& ranges) {
  std::mt19937_64 rng(rng_seed);
  auto draw = [&rng](Interval iv) {
    if (iv.hi <= iv.lo) return iv.lo;
    return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
  };
  DynamicsParams p;
  p.actuation_gain = draw(ranges.actuation_gain);
  p.lag_alpha = draw(ranges.lag_alpha);
  p.base_speed_scale = draw(ranges.base_speed_scale);
  p.arm_speed_scale = draw(ranges.arm_speed_scale);
  return p;
}

SimState home_state(const RobotParams& params, const DynamicsParams& dynamics,
                    const GoalSample& goal) {
  SimState s;
  s.dynamics = dynamics;
  s.q = ik(shoulder_position(0.0, params) + params.home_offset, 0.0, params).q;
  s.gripper_pos = fk(s.q, 0.0, params);
  s.object_pos = goal.position;
  s.object_vel = goal.velocity;
  return s;
}

SimState apply_action(const SimState& state, std::span<const double> action,
                      const RobotParams& params, double dt) {
  SimState next = state;
  const DynamicsParams& dyn = state.dynamics;

  Eigen::Vector4d command = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < 4 && i < action.size(); ++i)
    command[i] = std::clamp(action[i], -1.0, 1.0);
  command.head<3>() *= params.ee_step_max * dyn.arm_speed_scale;
  command[3] *= params.base_step_max * dyn.base_speed_scale;

  // First-order actuation filter.
  Eigen::Vector4d effective = dyn.lag_alpha * dyn.actuation_gain * command +
                              (1.0 - dyn.lag_alpha) * state.prev_command;
  next.prev_command = effective;
  next.base_x = state.base_x + effective[3];
  next.clamped = false;

  if (!effective.isZero(0.0)) {
    // World-frame gripper target; the arm absorbs the base motion.
    IkResult sol = ik(state.gripper_pos + effective.head<3>(), next.base_x,
                      params);
    next.q = sol.q;
    next.clamped = !sol.reachable;
    next.gripper_pos = fk(next.q, next.base_x, params);
  }
  next.qd = (next.q - state.q) / dt;
  next.qd_base = (next.base_x - state.base_x) / dt;
  next.gripper_vel = (next.gripper_pos - state.gripper_pos) / dt;

  if (action.size() >= 5) {
    next.gripper_closed = action[4] > 0.0;
    next.gripper_just_closed = next.gripper_closed && !state.gripper_closed;
  } else {
    next.gripper_just_closed = false;
  }
  next.step_index = state.step_index + 1;
  return next;
}

SimState step_object(const SimState& state, const GoalSample& goal, double) {
  SimState next = state;
  if (state.object_grasped) {
    next.object_pos = state.gripper_pos;
    next.object_vel = state.gripper_vel;
  } else {
    next.object_pos = goal.position;
    next.object_vel = goal.velocity;
  }
  return next;
}

SimState step_object(const SimState& state, const TrajectorySpec& spec,
                     double dt) {
  return step_object(state, goal_at(spec, state.step_index, dt), dt);
}

bool check_grasp(const SimState& state, const RobotParams& params) {
  return state.gripper_just_closed &&
         (state.object_pos - state.gripper_pos).norm() <=
             params.gripper_grasp_radius;
}

}  // namespace mmrl
