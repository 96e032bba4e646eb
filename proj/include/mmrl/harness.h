#ifndef MMRL_HARNESS_H_
#define MMRL_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmrl/env.h"
#include "mmrl/net.h"
#include "mmrl/ppo.h"

namespace mmrl {

struct EvalConfig {
  int episodes = 100;  // per family
  std::uint64_t seed = 20200;
  double randomization_scale = 1.0;  // dynamics ranges widened by this
  bool noise = true;
  bool randomize_dynamics = true;
};

// Every tunable of a run. Text form: one `key = value` per line, `#`
// starts a comment, lists are comma separated, ranges are `lo, hi`,
// vectors are `x, y, z`.
struct RunConfig {
  TaskKind task = TaskKind::kTracking;
  std::vector<TrajectoryFamily> families = {kBasicFamilies.begin(),
                                            kBasicFamilies.end()};
  std::string output_dir;  // empty: MMRL_OUTPUT_DIR, then "runs"
  PpoConfig ppo;
  int checkpoint_every = 0;  // iterations; 0 keeps only the final one
  EnvConfig env;
  EvalConfig eval;

  EnvConfig env_config() const;  // env with `task` applied
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws ConfigError naming the line for unknown, duplicate or malformed
// keys.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_text(const RunConfig& config);
// Applies one `key=value` override.
void set_config_value(RunConfig* config, const std::string& key,
                      const std::string& value);

// FNV-1a over the canonical text of everything that shapes training
// (output_dir, seeds, ppo.workers, ppo.total_env_steps, checkpoint_every
// and eval.* are left out, so a resumed run may extend its budget).
std::uint64_t config_hash(const RunConfig& config);
std::string hash_hex(std::uint64_t hash);

std::filesystem::path resolve_output_dir(const RunConfig& config);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointCorruptError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ConfigHashMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct Checkpoint {
  RunConfig config;
  std::uint64_t hash = 0;
  std::uint64_t seed = 0;
  int iteration = 0;
  long env_steps = 0;
  ActorCritic model;
  AdamState adam;
  std::string shuffle_rng;  // std::mt19937_64 text state

  std::string id() const;  // hash, seed and iteration
};

Checkpoint make_checkpoint(const Trainer& trainer, const RunConfig& config);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// All-or-nothing: throws one of the CheckpointError subclasses.
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Throws ConfigHashMismatchError quoting both hashes.
void check_config(const Checkpoint& ckpt, const RunConfig& config);

// ---------------------------------------------------------------------------
// Evaluation

using PolicyFn = std::function<std::vector<double>(
    const MobileManipulatorEnv& env, const Observation& obs)>;

PolicyFn deterministic_policy(const ActorCritic& model);

struct EpisodeMetrics {
  int steps = 0;
  double mean_error = 0.0;    // steps 1..end
  double steady_error = 0.0;  // steps 50..end; all steps if it ended sooner
  double episode_return = 0.0;
  bool grasp_success = false;
};

// One deterministic episode.
EpisodeMetrics run_episode(MobileManipulatorEnv& env, const PolicyFn& policy,
                           TrajectoryFamily family, std::uint64_t seed);

inline constexpr int kSteadyStateStart = 50;

struct FamilyEval {
  std::string family;
  int episodes = 0;
  double mean_error = 0.0;
  double median_error = 0.0;  // median of per-episode steady-state errors
  double steady_error = 0.0;
  double success_rate = 0.0;
  double mean_reward = 0.0;
};

struct EvalReport {
  std::string task;
  std::string config_hash;
  std::string checkpoint_id;
  std::vector<FamilyEval> rows;
};

// Runs `episodes` episodes per family with fresh specs derived from `seed`.
EvalReport evaluate(const PolicyFn& policy, const EnvConfig& env,
                    const std::vector<TrajectoryFamily>& families,
                    int episodes, std::uint64_t seed);

// Env used to evaluate a run: noise and dynamics scale from `eval`.
EnvConfig eval_env_config(const RunConfig& config, const EvalConfig& eval);

// Evaluates a checkpoint with its embedded config (or `config` after a hash
// check) and eval settings.
EvalReport evaluate(const Checkpoint& ckpt,
                    const std::vector<TrajectoryFamily>& families,
                    const EvalConfig& eval);

// ---------------------------------------------------------------------------
// Reports and logs

enum class ReportFormat { kCsv, kTable, kSummary };

// kCsv: every column; kSummary: family, steady-state error, success rate
// (the layout of the published results table); kTable: aligned text.
// Meters at 3 decimals, rates at 2.
std::string report(const EvalReport& eval, ReportFormat format);
// Parses kCsv output.
EvalReport parse_report_csv(const std::string& text);

std::string stats_csv_header();
std::string stats_csv_row(const TrainStats& s);
std::vector<TrainStats> parse_stats_csv(const std::string& text);
std::string stats_table(const std::vector<TrainStats>& stats);

// ---------------------------------------------------------------------------
// Replay

struct ReplayRow {
  int step = 0;
  double time_s = 0.0;
  Vec3 goal = Vec3::Zero();
  Vec3 gripper = Vec3::Zero();
  double base_x = 0.0;
  double distance = 0.0;
  double reward = 0.0;
  std::vector<double> action;  // as sent to step()
};

std::vector<ReplayRow> replay(const PolicyFn& policy, const EnvConfig& env,
                              TrajectoryFamily family, std::uint64_t seed);
// Feeds recorded actions back through a fresh env.
std::vector<ReplayRow> resimulate(const std::vector<ReplayRow>& rows,
                                  const EnvConfig& env,
                                  TrajectoryFamily family, std::uint64_t seed);
std::string replay_csv(const std::vector<ReplayRow>& rows);
std::vector<ReplayRow> parse_replay_csv(const std::string& text);

// ---------------------------------------------------------------------------
// Training runs

struct TrainOutputs {
  std::vector<std::filesystem::path> checkpoints;  // final one per seed
  std::vector<std::vector<TrainStats>> per_seed;
  std::vector<TrainStats> averaged;
};

// Trains every seed of the config, writing stats_seed<N>.csv,
// checkpoints and stats_mean.csv under `out_dir`. `log` receives progress
// lines when set.
TrainOutputs train_run(const RunConfig& config,
                       const std::filesystem::path& out_dir,
                       const std::function<void(const std::string&)>& log = {});
// Continues one seed from a checkpoint up to config.ppo.total_env_steps,
// appending to stats_seed<N>.csv under `out_dir`.
TrainOutputs resume_run(const Checkpoint& ckpt, const RunConfig& config,
                        const std::filesystem::path& out_dir,
                        const std::function<void(const std::string&)>& log = {});

// Trainer continuing from `ckpt` (weights, optimizer, shuffle RNG,
// counters) under `config`, which must hash equal to the checkpoint's.
Trainer resume_trainer(const Checkpoint& ckpt, const RunConfig& config);

// Trains one seed in memory.
Trainer train_seed(const RunConfig& config, std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mmrl

#endif  // MMRL_HARNESS_H_
