#ifndef MMRL_PPO_H_
#define MMRL_PPO_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "mmrl/core.h"
#include "mmrl/env.h"
#include "mmrl/net.h"

namespace mmrl {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double learning_rate = 5e-5;
  int rollout_len = 200;  // steps per env per iteration
  int n_envs = 6;
  int epochs_per_update = 10;
  int minibatch_size = 256;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double grad_clip_norm = 0.5;
  long total_env_steps = 1'200'000;
  std::vector<std::uint64_t> seeds = {123, 456, 789};
  std::vector<int> hidden = {64, 64};
  double log_std_init = -0.5;
  int workers = 1;  // rollout threads; results do not depend on it

  // Throws std::invalid_argument.
  void validate() const;
};

// Summary of an episode that finished during collection.
struct EpisodeSummary {
  int task_id = -1;
  int steps = 0;
  double episode_return = 0.0;
  double mean_distance = 0.0;
  bool grasp_success = false;
};

// Transitions of one iteration. Sample i = env * rollout_len + t, so each
// env's steps are contiguous.
struct RolloutBatch {
  int n_envs = 0;
  int rollout_len = 0;
  MatrixXd obs;      // obs_dim x N
  MatrixXd actions;  // act_dim x N, pre-clip Gaussian samples
  VectorXd log_prob_old;
  VectorXd rewards;
  VectorXd values_old;
  std::vector<std::uint8_t> dones;
  std::vector<int> task_ids;
  VectorXd distances;   // gripper-goal distance after each step
  VectorXd bootstrap;   // V(s_T) per env
  std::vector<EpisodeSummary> episodes;

  Eigen::Index size() const { return rewards.size(); }
};

struct GaeResult {
  VectorXd advantages;
  VectorXd returns;
};

// One contiguous sequence; `bootstrap` is V(s_T) after the last step.
GaeResult compute_gae(const VectorXd& rewards, const VectorXd& values,
                      const std::vector<std::uint8_t>& dones, double bootstrap,
                      double gamma, double lambda);
// Per-env GAE over a batch.
GaeResult compute_gae(const RolloutBatch& batch, double gamma, double lambda);

// Standardizes to mean 0 and (population) std 1; only centers when the std
// is zero.
VectorXd standardize(const VectorXd& v);

// min(r * A, clip(r, 1 - eps, 1 + eps) * A).
double clipped_surrogate(double ratio, double advantage, double clip_eps);

// Samples used by one gradient evaluation.
struct LossBatch {
  MatrixXd obs;
  MatrixXd actions;
  VectorXd log_prob_old;
  VectorXd advantages;
  VectorXd returns;
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;  // -mean surrogate
  double value = 0.0;   // mean squared error
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// PPO loss at `params` (laid out like model.params()). Adds the gradient to
// `grad` when non-null.
LossTerms ppo_loss(const ActorCritic& model, const VectorXd& params,
                   const LossBatch& batch, const PpoConfig& config,
                   VectorXd* grad);

struct TrainStats {
  int iteration = 0;
  long env_steps = 0;
  double mean_reward = 0.0;     // mean return of finished episodes
  double tracking_error = 0.0;  // mean distance over the batch
  double grasp_success_rate = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double wall_time_s = 0.0;
  int episodes = 0;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs the epochs / minibatches of one update in place. Throws
// NonFiniteLossError (parameters untouched) when a loss or gradient is not
// finite.
TrainStats ppo_update(ActorCritic* model, AdamState* adam,
                      const RolloutBatch& batch, const PpoConfig& config,
                      std::mt19937_64& shuffle_rng);

// Creates environment `index` of a run.
using EnvFactory = std::function<std::unique_ptr<Environment>(int index)>;

// Round-robin assignment of `families` over env indices.
EnvFactory multitask_factory(const EnvConfig& config,
                             std::vector<TrajectoryFamily> families);

// One training run (single seed).
class Trainer {
 public:
  Trainer(EnvFactory factory, PpoConfig config, std::uint64_t seed);

  // Collects one batch with the current parameters.
  RolloutBatch collect_rollouts();
  // Collect + GAE + update.
  TrainStats iterate();
  // Iterates until total_env_steps; `on_iteration` runs after each.
  std::vector<TrainStats> run(
      const std::function<void(const Trainer&, const TrainStats&)>&
          on_iteration = {});

  int iteration() const { return iteration_; }
  long env_steps() const { return env_steps_; }
  std::uint64_t seed() const { return seed_; }
  const PpoConfig& config() const { return config_; }
  const ActorCritic& model() const { return model_; }
  ActorCritic& model() { return model_; }
  const AdamState& adam() const { return adam_; }
  AdamState& adam() { return adam_; }
  std::mt19937_64& shuffle_rng() { return shuffle_rng_; }
  const std::mt19937_64& shuffle_rng() const { return shuffle_rng_; }
  // Restores counters when resuming from a checkpoint and restarts every
  // env on a fresh episode. Partial episodes and action RNG streams are not
  // part of a checkpoint, so a resumed run is reproducible but not bitwise
  // equal to an uninterrupted one.
  void set_progress(int iteration, long env_steps);

 private:
  struct Slot {
    std::unique_ptr<Environment> env;
    std::mt19937_64 action_rng;
    Observation obs;
    long episodes = 0;
    EpisodeSummary running;
    std::vector<EpisodeSummary> finished;
  };
  void start_episode(int index);
  void collect_env(int index, RolloutBatch* batch);

  PpoConfig config_;
  std::uint64_t seed_;
  std::vector<Slot> slots_;
  ActorCritic model_;
  AdamState adam_;
  std::mt19937_64 shuffle_rng_;
  int iteration_ = 0;
  long env_steps_ = 0;
  double wall_time_s_ = 0.0;
};

// Element-wise mean of per-seed stats logs (truncated to the shortest).
std::vector<TrainStats> average_stats(
    const std::vector<std::vector<TrainStats>>& per_seed);

// Deterministic mean action, clipped to [-1, 1].
std::vector<double> mean_action(const ActorCritic& model,
                                const Observation& obs);

// Workspace-only sanity task: a point mass chases a goal moving on a
// circle. obs = (pos, goal, goal - pos, goal velocity), action = 3-d
// velocity command.
class PointMassEnv : public Environment {
 public:
  explicit PointMassEnv(int episode_steps = kEpisodeSteps);
  int observation_dim() const override { return 12; }
  int action_dim() const override { return 3; }
  int task_id() const override { return 0; }
  Observation reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;
  // Largest per-step velocity command (m per step).
  static constexpr double kStepMax = 0.05;

 private:
  Observation observe() const;
  Vec3 goal_at(int k) const;

  int episode_steps_;
  int k_ = 0;
  Vec3 pos_ = Vec3::Zero();
  Vec3 center_ = Vec3::Zero();
  double radius_ = 0.2;
  double omega_ = 0.5;
  double phase_ = 0.0;
  bool done_ = true;
};

}  // namespace mmrl

#endif  // MMRL_PPO_H_
