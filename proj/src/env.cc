#include "mmrl/env.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace mmrl {

std::string_view task_name(TaskKind task) {
  return task == TaskKind::kTracking ? "tracking" : "grasping";
}

std::optional<TaskKind> parse_task(std::string_view name) {
  if (name == "tracking") return TaskKind::kTracking;
  if (name == "grasping") return TaskKind::kGrasping;
  return std::nullopt;
}

int action_dim(TaskKind task) { return task == TaskKind::kTracking ? 4 : 5; }

void EnvConfig::validate() const {
  robot.validate();
  auto fail = [](const std::string& what) {
    throw std::invalid_argument(what);
  };
  if (!inside_reachable_tube(workspace, robot))
    fail("workspace leaves the reachable tube of the arm");
  if (!(dt > 0)) fail("dt must be > 0");
  if (episode_steps < 1) fail("episode_steps must be >= 1");
  if (noise.sigma_action < 0 || noise.sigma_obs < 0)
    fail("noise sigmas must be >= 0");
  if (!(noise.clip_k > 0)) fail("noise clip_k must be > 0");
  if (!(dynamics.lag_alpha.lo > 0 && dynamics.lag_alpha.hi <= 1.0))
    fail("lag_alpha range must lie in (0, 1]");
  for (Interval iv : {dynamics.actuation_gain, dynamics.base_speed_scale,
                      dynamics.arm_speed_scale, dynamics.lag_alpha}) {
    if (!(iv.lo > 0 && iv.lo <= iv.hi)) fail("invalid dynamics range");
  }
}

double tracking_reward(double distance) {
  return -distance + std::exp(-100.0 * distance * distance);
}

double episode_return(std::span<const double> rewards) {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

void inject_noise(std::span<double> values, double sigma, double clip_k,
                  std::mt19937_64& rng) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> normal(0.0, sigma);
  const double bound = clip_k * sigma;
  for (double& v : values) v += std::clamp(normal(rng), -bound, bound);
}

MobileManipulatorEnv::MobileManipulatorEnv(EnvConfig config,
                                           TrajectoryFamily family)
    : config_(std::move(config)), family_(family) {
  config_.validate();
}

int MobileManipulatorEnv::observation_dim() const {
  return kObservationDim + (config_.task_onehot ? kTaskOneHotDim : 0);
}

int MobileManipulatorEnv::action_dim() const {
  return mmrl::action_dim(config_.task);
}

Observation MobileManipulatorEnv::reset(std::uint64_t seed) {
  return reset(family_, seed);
}

Observation MobileManipulatorEnv::reset(TrajectoryFamily family,
                                        std::uint64_t seed) {
  family_ = family;
  TrajectorySpec spec =
      sample_any(family, derive_seed(seed, kStreamTrajectory),
                 config_.workspace, config_.ranges);
  return reset(spec, seed);
}

Observation MobileManipulatorEnv::reset(const TrajectorySpec& spec,
                                        std::uint64_t seed) {
  family_ = spec.family;
  spec_ = spec;
  path_ = GoalPath(spec_, config_.episode_steps, config_.dt);
  DynamicsParams dynamics;
  if (config_.randomize_dynamics) {
    dynamics = randomize_dynamics(derive_seed(seed, kStreamDynamics),
                                  config_.dynamics);
  }
  state_ = home_state(config_.robot, dynamics, path_.at(0));
  noise_rng_.seed(derive_seed(seed, kStreamNoise));
  done_ = false;
  return observe();
}

StepResult MobileManipulatorEnv::step(std::span<const double> action) {
  if (done_) throw UsageError("step() called on a finished episode");
  if (static_cast<int>(action.size()) != action_dim()) {
    throw std::invalid_argument("action has " + std::to_string(action.size()) +
                                " components, expected " +
                                std::to_string(action_dim()));
  }
  std::vector<double> a(action.begin(), action.end());
  inject_noise(a, config_.noise.sigma_action, config_.noise.clip_k,
               noise_rng_);
  for (double& v : a) v = std::clamp(v, -1.0, 1.0);

  state_ = apply_action(state_, a, config_.robot, config_.dt);
  state_ = step_object(state_, path_.at(state_.step_index), config_.dt);

  StepResult out;
  out.info.distance = distance();
  out.info.clamped = state_.clamped;
  out.reward = tracking_reward(out.info.distance);
  if (config_.task == TaskKind::kGrasping &&
      check_grasp(state_, config_.robot)) {
    out.info.grasp_success = true;
    out.reward += config_.grasp_reward;
    state_.object_grasped = true;
  }
  done_ = out.info.grasp_success ||
          state_.step_index >= config_.episode_steps;
  out.done = done_;
  out.observation = observe();
  return out;
}

double MobileManipulatorEnv::distance() const {
  return (state_.object_pos - state_.gripper_pos).norm();
}

Observation MobileManipulatorEnv::clean_observation() const {
  using namespace obs_index;
  Observation o = Observation::Zero(observation_dim());
  o[kBaseX] = state_.base_x;
  o.segment<3>(kQ) = state_.q;
  o[kQdBase] = state_.qd_base;
  o.segment<3>(kQd) = state_.qd;
  o.segment<3>(kGripperPos) = state_.gripper_pos;
  o.segment<3>(kObjectPos) = state_.object_pos;
  o.segment<3>(kObjectVel) = state_.object_vel;
  o.segment<3>(kPosDiff) = state_.object_pos - state_.gripper_pos;
  o.segment<3>(kVelDiff) = state_.object_vel - state_.gripper_vel;
  if (config_.task_onehot) {
    int id = family_index(family_);
    if (id >= 0) o[kObservationDim + id] = 1.0;
  }
  return o;
}

Observation MobileManipulatorEnv::observe() {
  Observation o = clean_observation();
  inject_noise(std::span<double>(o.data(), kObservationDim),
               config_.noise.sigma_obs, config_.noise.clip_k, noise_rng_);
  return o;
}

}  // namespace mmrl
