#ifndef MMRL_ENV_H_
#define MMRL_ENV_H_

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

#include "mmrl/core.h"
#include "mmrl/sim.h"
#include "mmrl/trajectory.h"

namespace mmrl {

enum class TaskKind { kTracking, kGrasping };

std::string_view task_name(TaskKind task);
std::optional<TaskKind> parse_task(std::string_view name);
int action_dim(TaskKind task);

// Observation layout (23 values, optionally followed by a 6-value task
// one-hot):
//   [0]      base_x
//   [1..3]   q
//   [4]      qd_base
//   [5..7]   qd
//   [8..10]  gripper_pos
//   [11..13] object_pos
//   [14..16] object_vel
//   [17..19] object_pos - gripper_pos
//   [20..22] object_vel - gripper_vel
inline constexpr int kObservationDim = 23;
inline constexpr int kTaskOneHotDim = 6;
namespace obs_index {
inline constexpr int kBaseX = 0;
inline constexpr int kQ = 1;
inline constexpr int kQdBase = 4;
inline constexpr int kQd = 5;
inline constexpr int kGripperPos = 8;
inline constexpr int kObjectPos = 11;
inline constexpr int kObjectVel = 14;
inline constexpr int kPosDiff = 17;
inline constexpr int kVelDiff = 20;
}  // namespace obs_index

using Observation = VectorXd;

struct NoiseConfig {
  double sigma_action = 0.01;  // normalized action units
  double sigma_obs = 0.005;    // native units, every component
  double clip_k = 3.0;         // samples clipped to +-clip_k * sigma
};

struct EnvConfig {
  TaskKind task = TaskKind::kTracking;
  RobotParams robot;
  Box workspace = default_workspace();
  SamplingRanges ranges;
  DynamicsRanges dynamics;
  bool randomize_dynamics = true;
  NoiseConfig noise;
  double grasp_reward = 50.0;
  bool task_onehot = false;
  int episode_steps = kEpisodeSteps;
  double dt = kDefaultDt;

  // Throws std::invalid_argument.
  void validate() const;
};

struct StepInfo {
  double distance = 0.0;
  bool grasp_success = false;
  bool clamped = false;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// -d + exp(-100 d^2).
double tracking_reward(double distance);

double episode_return(std::span<const double> rewards);

// Adds clipped i.i.d. Gaussian noise in place.
void inject_noise(std::span<double> values, double sigma, double clip_k,
                  std::mt19937_64& rng);

// Interface consumed by the trainer.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::span<const double> action) = 0;
  // Index of the training task for bookkeeping, -1 if none.
  virtual int task_id() const = 0;
};

class MobileManipulatorEnv : public Environment {
 public:
  MobileManipulatorEnv(EnvConfig config,
                       TrajectoryFamily family = TrajectoryFamily::kCircle);

  int observation_dim() const override;
  int action_dim() const override;
  int task_id() const override { return family_index(family_); }

  Observation reset(std::uint64_t seed) override;
  Observation reset(TrajectoryFamily family, std::uint64_t seed);
  // Starts an episode on a given trajectory (dynamics and noise still come
  // from `seed`).
  Observation reset(const TrajectorySpec& spec, std::uint64_t seed);
  StepResult step(std::span<const double> action) override;

  bool done() const { return done_; }
  TaskKind task() const { return config_.task; }
  const EnvConfig& config() const { return config_; }
  const SimState& state() const { return state_; }
  const TrajectorySpec& spec() const { return spec_; }
  const GoalSample& goal() const { return path_.at(state_.step_index); }
  double distance() const;
  // Noise-free observation of the current state.
  Observation clean_observation() const;

 private:
  Observation observe();

  EnvConfig config_;
  TrajectoryFamily family_;
  TrajectorySpec spec_;
  GoalPath path_;
  SimState state_;
  std::mt19937_64 noise_rng_;
  bool done_ = true;
};

}  // namespace mmrl

#endif  // MMRL_ENV_H_
