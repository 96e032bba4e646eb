#include "mmrl/harness.h"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mmrl {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_fixed(double v, int decimals) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

double to_double(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("'" + s + "' is not a finite number");
  return v;
}

template <typename Int>
Int to_int(const std::string& s) {
  Int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("'" + s + "' is not an integer");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "on") return true;
  if (s == "false" || s == "0" || s == "off") return false;
  throw ConfigError("'" + s + "' is not a boolean");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::vector<std::string> expect_items(const std::string& s, std::size_t n) {
  auto items = split(s, ',');
  if (items.size() != n)
    throw ConfigError("expected " + std::to_string(n) +
                      " comma-separated values, got '" + s + "'");
  return items;
}

Interval to_interval(const std::string& s) {
  auto it = expect_items(s, 2);
  Interval iv{to_double(it[0]), to_double(it[1])};
  if (iv.lo > iv.hi) throw ConfigError("range '" + s + "' has lo > hi");
  return iv;
}
std::string from_interval(Interval iv) { return fmt(iv.lo) + ", " + fmt(iv.hi); }

Vec3 to_vec3(const std::string& s) {
  auto it = expect_items(s, 3);
  return {to_double(it[0]), to_double(it[1]), to_double(it[2])};
}
std::string from_vec3(const Vec3& v) {
  return fmt(v.x()) + ", " + fmt(v.y()) + ", " + fmt(v.z());
}

std::vector<TrajectoryFamily> to_families(const std::string& s) {
  std::vector<TrajectoryFamily> out;
  for (const std::string& name : split(s, ',')) {
    if (name == "all") {
      out.insert(out.end(), kBasicFamilies.begin(), kBasicFamilies.end());
      continue;
    }
    auto f = parse_family(name);
    if (!f) throw ConfigError("unknown trajectory family '" + name + "'");
    out.push_back(*f);
  }
  if (out.empty()) throw ConfigError("empty family list");
  return out;
}
std::string from_families(const std::vector<TrajectoryFamily>& fams) {
  std::string out;
  for (std::size_t i = 0; i < fams.size(); ++i)
    out += (i ? ", " : "") + std::string(family_name(fams[i]));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::string key;
  bool hashed;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// Shorthands for the common field shapes.
#define MMRL_DOUBLE(KEY, HASHED, MEMBER)                            \
  Field {                                                           \
    KEY, HASHED, [](const RunConfig& c) { return fmt(c.MEMBER); },  \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_double(v); } \
  }
#define MMRL_INT(KEY, HASHED, MEMBER, TYPE)                                  \
  Field {                                                                    \
    KEY, HASHED, [](const RunConfig& c) { return std::to_string(c.MEMBER); }, \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_int<TYPE>(v); } \
  }
#define MMRL_BOOL(KEY, HASHED, MEMBER)                                   \
  Field {                                                                \
    KEY, HASHED, [](const RunConfig& c) { return from_bool(c.MEMBER); }, \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_bool(v); } \
  }
#define MMRL_RANGE(KEY, MEMBER)                                           \
  Field {                                                                 \
    KEY, true, [](const RunConfig& c) { return from_interval(c.MEMBER); }, \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_interval(v); } \
  }
#define MMRL_VEC3(KEY, MEMBER)                                          \
  Field {                                                               \
    KEY, true, [](const RunConfig& c) { return from_vec3(c.MEMBER); },  \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_vec3(v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"task", true,
       [](const RunConfig& c) { return std::string(task_name(c.task)); },
       [](RunConfig& c, const std::string& v) {
         auto t = parse_task(v);
         if (!t) throw ConfigError("unknown task '" + v + "'");
         c.task = *t;
       }},
      {"families", true,
       [](const RunConfig& c) { return from_families(c.families); },
       [](RunConfig& c, const std::string& v) { c.families = to_families(v); }},
      {"output_dir", false, [](const RunConfig& c) { return c.output_dir; },
       [](RunConfig& c, const std::string& v) { c.output_dir = v; }},
      {"seeds", false, [](const RunConfig& c) { return join(c.ppo.seeds); },
       [](RunConfig& c, const std::string& v) {
         c.ppo.seeds.clear();
         for (const std::string& s : split(v, ','))
           c.ppo.seeds.push_back(to_int<std::uint64_t>(s));
       }},
      MMRL_DOUBLE("ppo.gamma", true, ppo.gamma),
      MMRL_DOUBLE("ppo.gae_lambda", true, ppo.gae_lambda),
      MMRL_DOUBLE("ppo.clip_eps", true, ppo.clip_eps),
      MMRL_DOUBLE("ppo.learning_rate", true, ppo.learning_rate),
      MMRL_INT("ppo.rollout_len", true, ppo.rollout_len, int),
      MMRL_INT("ppo.n_envs", true, ppo.n_envs, int),
      MMRL_INT("ppo.epochs_per_update", true, ppo.epochs_per_update, int),
      MMRL_INT("ppo.minibatch_size", true, ppo.minibatch_size, int),
      MMRL_DOUBLE("ppo.value_coef", true, ppo.value_coef),
      MMRL_DOUBLE("ppo.entropy_coef", true, ppo.entropy_coef),
      MMRL_DOUBLE("ppo.grad_clip_norm", true, ppo.grad_clip_norm),
      MMRL_INT("ppo.total_env_steps", false, ppo.total_env_steps, long),
      MMRL_INT("ppo.workers", false, ppo.workers, int),
      MMRL_INT("ppo.checkpoint_every", false, checkpoint_every, int),
      {"net.hidden", true, [](const RunConfig& c) { return join(c.ppo.hidden); },
       [](RunConfig& c, const std::string& v) {
         c.ppo.hidden.clear();
         if (trim(v).empty()) return;
         for (const std::string& s : split(v, ','))
           c.ppo.hidden.push_back(to_int<int>(s));
       }},
      MMRL_DOUBLE("net.log_std_init", true, ppo.log_std_init),
      MMRL_BOOL("env.task_onehot", true, env.task_onehot),
      MMRL_BOOL("env.randomize_dynamics", true, env.randomize_dynamics),
      MMRL_DOUBLE("env.grasp_reward", true, env.grasp_reward),
      MMRL_INT("env.episode_steps", true, env.episode_steps, int),
      MMRL_DOUBLE("env.dt", true, env.dt),
      MMRL_DOUBLE("noise.sigma_action", true, env.noise.sigma_action),
      MMRL_DOUBLE("noise.sigma_obs", true, env.noise.sigma_obs),
      MMRL_DOUBLE("noise.clip_k", true, env.noise.clip_k),
      MMRL_RANGE("dynamics.actuation_gain", env.dynamics.actuation_gain),
      MMRL_RANGE("dynamics.lag_alpha", env.dynamics.lag_alpha),
      MMRL_RANGE("dynamics.base_speed_scale", env.dynamics.base_speed_scale),
      MMRL_RANGE("dynamics.arm_speed_scale", env.dynamics.arm_speed_scale),
      MMRL_DOUBLE("robot.link1_length", true, env.robot.link1_length),
      MMRL_DOUBLE("robot.link2_length", true, env.robot.link2_length),
      MMRL_DOUBLE("robot.shoulder_height", true, env.robot.shoulder_height),
      MMRL_RANGE("robot.pan_limits", env.robot.joint_limits[0]),
      MMRL_RANGE("robot.shoulder_limits", env.robot.joint_limits[1]),
      MMRL_RANGE("robot.elbow_limits", env.robot.joint_limits[2]),
      MMRL_DOUBLE("robot.reach_min", true, env.robot.reach_min),
      MMRL_DOUBLE("robot.reach_max", true, env.robot.reach_max),
      MMRL_DOUBLE("robot.base_step_max", true, env.robot.base_step_max),
      MMRL_DOUBLE("robot.ee_step_max", true, env.robot.ee_step_max),
      MMRL_DOUBLE("robot.gripper_grasp_radius", true,
                  env.robot.gripper_grasp_radius),
      MMRL_VEC3("robot.home_offset", env.robot.home_offset),
      MMRL_VEC3("workspace.lo", env.workspace.lo),
      MMRL_VEC3("workspace.hi", env.workspace.hi),
      MMRL_RANGE("traj.speed", env.ranges.speed),
      MMRL_RANGE("traj.radius", env.ranges.radius),
      MMRL_RANGE("traj.side_length", env.ranges.side_length),
      MMRL_RANGE("traj.amplitude", env.ranges.amplitude),
      MMRL_RANGE("traj.wavelength", env.ranges.wavelength),
      MMRL_RANGE("traj.vertical_speed", env.ranges.vertical_speed),
      MMRL_DOUBLE("traj.min_travel", true, env.ranges.min_travel),
      MMRL_INT("traj.composite_min_segments", true,
               env.ranges.composite_min_segments, int),
      MMRL_INT("traj.composite_max_segments", true,
               env.ranges.composite_max_segments, int),
      MMRL_INT("traj.composite_min_steps", true, env.ranges.composite_min_steps,
               int),
      MMRL_INT("traj.composite_max_steps", true, env.ranges.composite_max_steps,
               int),
      MMRL_INT("eval.episodes", false, eval.episodes, int),
      MMRL_INT("eval.seed", false, eval.seed, std::uint64_t),
      MMRL_DOUBLE("eval.randomization_scale", false, eval.randomization_scale),
      MMRL_BOOL("eval.noise", false, eval.noise),
      MMRL_BOOL("eval.randomize_dynamics", false, eval.randomize_dynamics),
  };
  return table;
}

#undef MMRL_DOUBLE
#undef MMRL_INT
#undef MMRL_BOOL
#undef MMRL_RANGE
#undef MMRL_VEC3

const Field* find_field(const std::string& key) {
  for (const Field& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

EnvConfig RunConfig::env_config() const {
  EnvConfig e = env;
  e.task = task;
  return e;
}

void RunConfig::validate() const {
  try {
    ppo.validate();
    env_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (families.empty()) throw ConfigError("families must not be empty");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (eval.episodes < 1) throw ConfigError("eval.episodes must be >= 1");
  if (!(eval.randomization_scale > 0))
    throw ConfigError("eval.randomization_scale must be > 0");
}

void set_config_value(RunConfig* config, const std::string& key,
                      const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown key '" + key + "'");
  try {
    f->set(*config, trim(value));
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    std::string where = "line " + std::to_string(number) + ": ";
    if (eq == std::string::npos)
      throw ConfigError(where + "expected 'key = value'");
    std::string key = trim(body.substr(0, eq));
    if (!seen.insert(key).second)
      throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set_config_value(&config, key, body.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  config.validate();
  return config;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec)
      throw std::runtime_error("cannot create directory " +
                               path.parent_path().string() + ": " +
                               ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path))
    throw ConfigError("config file not found: " + path.string());
  try {
    return parse_config(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_to_text(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::uint64_t config_hash(const RunConfig& config) {
  std::string canon;
  for (const Field& f : fields())
    if (f.hashed) canon += f.key + "=" + f.get(config) + "\n";
  return fnv1a(canon);
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, hash);
  return buf;
}

fs::path resolve_output_dir(const RunConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv("MMRL_OUTPUT_DIR"); env && *env)
    return env;
  return "runs";
}

// ---------------------------------------------------------------------------

std::string Checkpoint::id() const {
  return hash_hex(hash) + "-s" + std::to_string(seed) + "-i" +
         std::to_string(iteration);
}

Checkpoint make_checkpoint(const Trainer& trainer, const RunConfig& config) {
  Checkpoint c;
  c.config = config;
  c.hash = config_hash(config);
  c.seed = trainer.seed();
  c.iteration = trainer.iteration();
  c.env_steps = trainer.env_steps();
  c.model = trainer.model();
  c.adam = trainer.adam();
  std::ostringstream rng;
  rng << trainer.shuffle_rng();
  c.shuffle_rng = rng.str();
  return c;
}

namespace {

std::string hexfloat(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void append_vector(std::string* out, const std::string& tag,
                   const VectorXd& v) {
  *out += tag + " " + std::to_string(v.size()) + "\n";
  for (Eigen::Index i = 0; i < v.size(); ++i) *out += hexfloat(v[i]) + "\n";
}

// Line reader over an in-memory checkpoint; every failure is "corrupt".
class Lines {
 public:
  explicit Lines(const std::string& text) : in_(text) {}
  std::string next() {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of file");
    ++number_;
    return line;
  }
  // "tag value" line; returns value.
  std::string field(const std::string& tag) {
    std::string line = next();
    if (line.rfind(tag + " ", 0) != 0) fail("expected '" + tag + "'");
    return line.substr(tag.size() + 1);
  }
  double hex() {
    std::string s = next();
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') fail("bad number '" + s + "'");
    return v;
  }
  VectorXd vector(const std::string& tag, Eigen::Index expected) {
    long n = number(field(tag));
    if (n != expected) fail(tag + " has " + std::to_string(n) + " values");
    VectorXd v(n);
    for (long i = 0; i < n; ++i) v[i] = hex();
    return v;
  }
  long number(const std::string& s) {
    try {
      return to_int<long>(s);
    } catch (const ConfigError&) {
      fail("bad integer '" + s + "'");
    }
    return 0;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw CheckpointCorruptError("corrupt checkpoint (line " +
                                 std::to_string(number_) + "): " + what);
  }

 private:
  std::istringstream in_;
  int number_ = 0;
};

const char kMagic[] = "MMRL-CHECKPOINT";

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  std::string out;
  out += std::string(kMagic) + " " + std::to_string(kCheckpointVersion) + "\n";
  out += "hash " + hash_hex(ckpt.hash) + "\n";
  out += "seed " + std::to_string(ckpt.seed) + "\n";
  out += "iteration " + std::to_string(ckpt.iteration) + "\n";
  out += "env_steps " + std::to_string(ckpt.env_steps) + "\n";
  out += "obs_dim " + std::to_string(ckpt.model.obs_dim()) + "\n";
  out += "act_dim " + std::to_string(ckpt.model.act_dim()) + "\n";
  std::string cfg = config_to_text(ckpt.config);
  out += "config " + std::to_string(std::count(cfg.begin(), cfg.end(), '\n')) +
         "\n" + cfg;
  append_vector(&out, "params", ckpt.model.params());
  const AdamState& a = ckpt.adam;
  out += "adam_step " + std::to_string(a.step) + "\n";
  out += "adam_hyper " + hexfloat(a.beta1) + " " + hexfloat(a.beta2) + " " +
         hexfloat(a.eps) + " " + hexfloat(a.learning_rate) + "\n";
  append_vector(&out, "adam_m", a.m);
  append_vector(&out, "adam_v", a.v);
  out += "rng " + ckpt.shuffle_rng + "\n";
  out += "checksum " + hash_hex(fnv1a(out)) + "\n";
  out += "end\n";
  // Write-then-rename so a crash never leaves a half-written checkpoint
  // under the final name.
  fs::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, out);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec)
    throw std::runtime_error("cannot move " + tmp.string() + " to " +
                             path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw CheckpointCorruptError(e.what());
  }
  std::string first = text.substr(0, text.find('\n'));
  if (first.rfind(std::string(kMagic) + " ", 0) != 0)
    throw CheckpointCorruptError(path.string() + " is not a checkpoint");
  std::string version = first.substr(sizeof(kMagic));
  if (version != std::to_string(kCheckpointVersion))
    throw CheckpointVersionError(path.string() + ": format version " +
                                 version + ", expected " +
                                 std::to_string(kCheckpointVersion));

  const std::string tail = "end\n";
  auto sum_at = text.rfind("\nchecksum ");
  if (sum_at == std::string::npos || text.size() < tail.size() ||
      text.compare(text.size() - tail.size(), tail.size(), tail) != 0)
    throw CheckpointCorruptError(path.string() + ": truncated checkpoint");
  std::string body = text.substr(0, sum_at + 1);
  std::string stored =
      trim(text.substr(sum_at + 10, text.size() - tail.size() - sum_at - 10));
  if (stored != hash_hex(fnv1a(body)))
    throw CheckpointCorruptError(path.string() + ": checksum mismatch");

  Lines in(body);
  in.next();  // magic
  Checkpoint c;
  std::string hash = in.field("hash");
  c.seed = static_cast<std::uint64_t>(in.number(in.field("seed")));
  c.iteration = static_cast<int>(in.number(in.field("iteration")));
  c.env_steps = in.number(in.field("env_steps"));
  int obs_dim = static_cast<int>(in.number(in.field("obs_dim")));
  int act_dim = static_cast<int>(in.number(in.field("act_dim")));
  long cfg_lines = in.number(in.field("config"));
  std::string cfg;
  for (long i = 0; i < cfg_lines; ++i) cfg += in.next() + "\n";
  try {
    c.config = parse_config(cfg);
  } catch (const ConfigError& e) {
    in.fail(std::string("embedded config: ") + e.what());
  }
  c.hash = config_hash(c.config);
  if (hash != hash_hex(c.hash)) in.fail("config hash does not match config");
  try {
    c.model = ActorCritic(obs_dim, act_dim, c.config.ppo.hidden);
  } catch (const std::invalid_argument& e) {
    in.fail(e.what());
  }
  const Eigen::Index n = c.model.params().size();
  c.model.params() = in.vector("params", n);
  c.adam.step = in.number(in.field("adam_step"));
  {
    std::istringstream hyper(in.field("adam_hyper"));
    std::string b1, b2, eps, lr;
    hyper >> b1 >> b2 >> eps >> lr;
    c.adam.beta1 = std::strtod(b1.c_str(), nullptr);
    c.adam.beta2 = std::strtod(b2.c_str(), nullptr);
    c.adam.eps = std::strtod(eps.c_str(), nullptr);
    c.adam.learning_rate = std::strtod(lr.c_str(), nullptr);
  }
  c.adam.m = in.vector("adam_m", n);
  c.adam.v = in.vector("adam_v", n);
  c.shuffle_rng = in.field("rng");
  return c;
}

void check_config(const Checkpoint& ckpt, const RunConfig& config) {
  std::uint64_t h = config_hash(config);
  if (h != ckpt.hash)
    throw ConfigHashMismatchError("config hash " + hash_hex(h) +
                                  " does not match checkpoint hash " +
                                  hash_hex(ckpt.hash));
}

// ---------------------------------------------------------------------------

PolicyFn deterministic_policy(const ActorCritic& model) {
  return [&model](const MobileManipulatorEnv&, const Observation& obs) {
    return mean_action(model, obs);
  };
}

EpisodeMetrics run_episode(MobileManipulatorEnv& env, const PolicyFn& policy,
                           TrajectoryFamily family, std::uint64_t seed) {
  EpisodeMetrics m;
  Observation obs = env.reset(family, seed);
  double steady_sum = 0.0;
  int steady_n = 0;
  StepResult r;
  do {
    r = env.step(policy(env, obs));
    obs = r.observation;
    m.steps += 1;
    m.mean_error += r.info.distance;
    if (m.steps >= kSteadyStateStart) {
      steady_sum += r.info.distance;
      ++steady_n;
    }
    m.episode_return += r.reward;
    m.grasp_success = m.grasp_success || r.info.grasp_success;
  } while (!r.done);
  m.steady_error = steady_n ? steady_sum / steady_n : m.mean_error / m.steps;
  m.mean_error /= m.steps;
  return m;
}

EvalReport evaluate(const PolicyFn& policy, const EnvConfig& env_config,
                    const std::vector<TrajectoryFamily>& families,
                    int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  EvalReport report;
  report.task = std::string(task_name(env_config.task));
  MobileManipulatorEnv env(env_config);
  for (TrajectoryFamily fam : families) {
    FamilyEval row;
    row.family = std::string(family_name(fam));
    row.episodes = episodes;
    std::vector<double> steady;
    double successes = 0;
    const std::uint64_t fam_seed =
        derive_seed(seed, kStreamEval, static_cast<std::uint64_t>(fam));
    for (int e = 0; e < episodes; ++e) {
      EpisodeMetrics m =
          run_episode(env, policy, fam, derive_seed(fam_seed, e));
      row.mean_error += m.mean_error / episodes;
      row.steady_error += m.steady_error / episodes;
      row.mean_reward += m.episode_return / episodes;
      successes += m.grasp_success ? 1 : 0;
      steady.push_back(m.steady_error);
    }
    std::sort(steady.begin(), steady.end());
    std::size_t mid = steady.size() / 2;
    row.median_error = steady.size() % 2
                           ? steady[mid]
                           : 0.5 * (steady[mid - 1] + steady[mid]);
    row.success_rate = successes / episodes;
    report.rows.push_back(row);
  }
  return report;
}

EnvConfig eval_env_config(const RunConfig& config, const EvalConfig& eval) {
  EnvConfig env = config.env_config();
  if (!eval.noise) {
    env.noise.sigma_action = 0.0;
    env.noise.sigma_obs = 0.0;
  }
  env.randomize_dynamics = eval.randomize_dynamics;
  env.dynamics = env.dynamics.widened(eval.randomization_scale);
  return env;
}

EvalReport evaluate(const Checkpoint& ckpt,
                    const std::vector<TrajectoryFamily>& families,
                    const EvalConfig& eval) {
  EvalReport r = evaluate(deterministic_policy(ckpt.model),
                          eval_env_config(ckpt.config, eval), families,
                          eval.episodes, eval.seed);
  r.config_hash = hash_hex(ckpt.hash);
  r.checkpoint_id = ckpt.id();
  return r;
}

// ---------------------------------------------------------------------------

namespace {
const char kReportHeader[] =
    "family,episodes,mean_error_m,median_error_m,steady_error_m,success_rate,"
    "mean_reward";
}

std::string report(const EvalReport& eval, ReportFormat format) {
  std::string out;
  switch (format) {
    case ReportFormat::kCsv:
      out = std::string(kReportHeader) + "\n";
      for (const FamilyEval& r : eval.rows) {
        out += r.family + "," + std::to_string(r.episodes) + "," +
               fmt_fixed(r.mean_error, 3) + "," + fmt_fixed(r.median_error, 3) +
               "," + fmt_fixed(r.steady_error, 3) + "," +
               fmt_fixed(r.success_rate, 2) + "," +
               fmt_fixed(r.mean_reward, 2) + "\n";
      }
      break;
    case ReportFormat::kSummary:
      out = "family,tracking_error_m,grasp_success_rate\n";
      for (const FamilyEval& r : eval.rows)
        out += r.family + "," + fmt_fixed(r.steady_error, 3) + "," +
               fmt_fixed(r.success_rate, 2) + "\n";
      break;
    case ReportFormat::kTable: {
      char buf[200];
      if (!eval.checkpoint_id.empty())
        out += "checkpoint " + eval.checkpoint_id + "\n";
      std::snprintf(buf, sizeof buf, "%-16s %8s %10s %10s %10s %8s %10s\n",
                    "family", "episodes", "error(m)", "median(m)", "steady(m)",
                    "success", "reward");
      out += buf;
      for (const FamilyEval& r : eval.rows) {
        std::snprintf(buf, sizeof buf,
                      "%-16s %8d %10.3f %10.3f %10.3f %8.2f %10.2f\n",
                      r.family.c_str(), r.episodes, r.mean_error,
                      r.median_error, r.steady_error, r.success_rate,
                      r.mean_reward);
        out += buf;
      }
      break;
    }
  }
  return out;
}

EvalReport parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kReportHeader)
    throw std::runtime_error("not an evaluation CSV");
  EvalReport r;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 7) throw std::runtime_error("bad report row: " + line);
    FamilyEval row;
    row.family = f[0];
    row.episodes = to_int<int>(f[1]);
    row.mean_error = to_double(f[2]);
    row.median_error = to_double(f[3]);
    row.steady_error = to_double(f[4]);
    row.success_rate = to_double(f[5]);
    row.mean_reward = to_double(f[6]);
    r.rows.push_back(row);
  }
  return r;
}

std::string stats_csv_header() {
  return "iteration,env_steps,mean_reward,tracking_error,grasp_success_rate,"
         "policy_loss,value_loss,clip_fraction,wall_time_s,episodes";
}

std::string stats_csv_row(const TrainStats& s) {
  return std::to_string(s.iteration) + "," + std::to_string(s.env_steps) +
         "," + fmt(s.mean_reward) + "," + fmt(s.tracking_error) + "," +
         fmt(s.grasp_success_rate) + "," + fmt(s.policy_loss) + "," +
         fmt(s.value_loss) + "," + fmt(s.clip_fraction) + "," +
         fmt(s.wall_time_s) + "," + std::to_string(s.episodes);
}

std::vector<TrainStats> parse_stats_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != stats_csv_header())
    throw std::runtime_error("not a training stats CSV");
  std::vector<TrainStats> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 10) throw std::runtime_error("bad stats row: " + line);
    TrainStats s;
    s.iteration = to_int<int>(f[0]);
    s.env_steps = to_int<long>(f[1]);
    s.mean_reward = to_double(f[2]);
    s.tracking_error = to_double(f[3]);
    s.grasp_success_rate = to_double(f[4]);
    s.policy_loss = to_double(f[5]);
    s.value_loss = to_double(f[6]);
    s.clip_fraction = to_double(f[7]);
    s.wall_time_s = to_double(f[8]);
    s.episodes = to_int<int>(f[9]);
    out.push_back(s);
  }
  return out;
}

std::string stats_table(const std::vector<TrainStats>& stats) {
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%6s %10s %10s %9s %8s %10s %10s %7s %9s\n",
                "iter", "steps", "reward", "error(m)", "success", "pi_loss",
                "v_loss", "clip", "time(s)");
  out += buf;
  for (const TrainStats& s : stats) {
    std::snprintf(buf, sizeof buf,
                  "%6d %10ld %10.2f %9.3f %8.2f %10.4f %10.3f %7.3f %9.1f\n",
                  s.iteration, s.env_steps, s.mean_reward, s.tracking_error,
                  s.grasp_success_rate, s.policy_loss, s.value_loss,
                  s.clip_fraction, s.wall_time_s);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

ReplayRow record(const MobileManipulatorEnv& env, const StepResult& r,
                 const std::vector<double>& action, double dt) {
  ReplayRow row;
  row.step = env.state().step_index;
  row.time_s = row.step * dt;
  row.goal = env.state().object_pos;
  row.gripper = env.state().gripper_pos;
  row.base_x = env.state().base_x;
  row.distance = r.info.distance;
  row.reward = r.reward;
  row.action = action;
  return row;
}

}  // namespace

std::vector<ReplayRow> replay(const PolicyFn& policy, const EnvConfig& config,
                              TrajectoryFamily family, std::uint64_t seed) {
  MobileManipulatorEnv env(config);
  Observation obs = env.reset(family, seed);
  std::vector<ReplayRow> rows;
  StepResult r;
  do {
    std::vector<double> a = policy(env, obs);
    r = env.step(a);
    obs = r.observation;
    rows.push_back(record(env, r, a, config.dt));
  } while (!r.done);
  return rows;
}

std::vector<ReplayRow> resimulate(const std::vector<ReplayRow>& rows,
                                  const EnvConfig& config,
                                  TrajectoryFamily family,
                                  std::uint64_t seed) {
  MobileManipulatorEnv env(config);
  env.reset(family, seed);
  std::vector<ReplayRow> out;
  for (const ReplayRow& row : rows) {
    StepResult r = env.step(row.action);
    out.push_back(record(env, r, row.action, config.dt));
    if (r.done) break;
  }
  return out;
}

std::string replay_csv(const std::vector<ReplayRow>& rows) {
  std::string out =
      "step,time_s,goal_x,goal_y,goal_z,gripper_x,gripper_y,gripper_z,base_x,"
      "d_t,reward";
  std::size_t dims = rows.empty() ? 0 : rows[0].action.size();
  for (std::size_t i = 0; i < dims; ++i) out += ",a" + std::to_string(i);
  out += "\n";
  for (const ReplayRow& r : rows) {
    out += std::to_string(r.step) + "," + fmt(r.time_s);
    for (int i = 0; i < 3; ++i) out += "," + fmt(r.goal[i]);
    for (int i = 0; i < 3; ++i) out += "," + fmt(r.gripper[i]);
    out += "," + fmt(r.base_x) + "," + fmt(r.distance) + "," + fmt(r.reward);
    for (double a : r.action) out += "," + fmt(a);
    out += "\n";
  }
  return out;
}

std::vector<ReplayRow> parse_replay_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,time_s,", 0) != 0)
    throw std::runtime_error("not a replay CSV");
  const std::size_t columns = split(line, ',').size();
  if (columns < 11) throw std::runtime_error("replay CSV lacks columns");
  std::vector<ReplayRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split(line, ',');
    if (f.size() != columns) throw std::runtime_error("bad replay row: " + line);
    ReplayRow r;
    r.step = to_int<int>(f[0]);
    r.time_s = to_double(f[1]);
    r.goal = {to_double(f[2]), to_double(f[3]), to_double(f[4])};
    r.gripper = {to_double(f[5]), to_double(f[6]), to_double(f[7])};
    r.base_x = to_double(f[8]);
    r.distance = to_double(f[9]);
    r.reward = to_double(f[10]);
    for (std::size_t i = 11; i < columns; ++i) r.action.push_back(to_double(f[i]));
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------

Trainer train_seed(const RunConfig& config, std::uint64_t seed) {
  Trainer t(multitask_factory(config.env_config(), config.families),
            config.ppo, seed);
  t.run();
  return t;
}

Trainer resume_trainer(const Checkpoint& ckpt, const RunConfig& config) {
  check_config(ckpt, config);
  Trainer t(multitask_factory(config.env_config(), config.families),
            config.ppo, ckpt.seed);
  if (t.model().params().size() != ckpt.model.params().size())
    throw CheckpointCorruptError("checkpoint " + ckpt.id() +
                                 " does not match the network shape");
  t.model() = ckpt.model;
  t.adam() = ckpt.adam;
  std::istringstream rng(ckpt.shuffle_rng);
  rng >> t.shuffle_rng();
  if (!rng) throw CheckpointCorruptError("bad shuffle RNG state");
  t.set_progress(ckpt.iteration, ckpt.env_steps);
  return t;
}

namespace {

// Runs `trainer` to completion, appending per-iteration rows to
// stats_<tag>.csv and writing checkpoints. Returns the new rows.
std::vector<TrainStats> drive(Trainer& trainer, const RunConfig& config,
                              const fs::path& out_dir, bool append,
                              const std::function<void(const std::string&)>& log,
                              fs::path* final_path) {
  const std::string tag = "seed" + std::to_string(trainer.seed());
  const fs::path stats_path = out_dir / ("stats_" + tag + ".csv");
  if (!append || !fs::exists(stats_path))
    write_file(stats_path, stats_csv_header() + "\n");
  std::ofstream stats(stats_path, std::ios::app);
  if (!stats) throw std::runtime_error("cannot append to " + stats_path.string());

  std::vector<TrainStats> history = trainer.run(
      [&](const Trainer& t, const TrainStats& s) {
        stats << stats_csv_row(s) << "\n" << std::flush;
        if (!stats)
          throw std::runtime_error("cannot append to " + stats_path.string());
        if (config.checkpoint_every > 0 &&
            s.iteration % config.checkpoint_every == 0) {
          save_checkpoint(make_checkpoint(t, config),
                          out_dir / (tag + "_iter" +
                                     std::to_string(s.iteration) + ".ckpt"));
        }
        if (log) {
          char buf[200];
          std::snprintf(buf, sizeof buf,
                        "%s iter %d steps %ld reward %.2f error %.3f "
                        "success %.2f (%.0fs)",
                        tag.c_str(), s.iteration, s.env_steps, s.mean_reward,
                        s.tracking_error, s.grasp_success_rate, s.wall_time_s);
          log(buf);
        }
      });
  *final_path = out_dir / (tag + "_final.ckpt");
  save_checkpoint(make_checkpoint(trainer, config), *final_path);
  return history;
}

void write_summary(const RunConfig& config, const fs::path& out_dir,
                   TrainOutputs* outputs) {
  outputs->averaged = average_stats(outputs->per_seed);
  std::string mean = stats_csv_header() + "\n";
  for (const TrainStats& s : outputs->averaged) mean += stats_csv_row(s) + "\n";
  write_file(out_dir / "stats_mean.csv", mean);
  write_file(out_dir / "config.cfg", config_to_text(config));
}

}  // namespace

TrainOutputs train_run(const RunConfig& config, const fs::path& out_dir,
                       const std::function<void(const std::string&)>& log) {
  config.validate();
  TrainOutputs outputs;
  for (std::uint64_t seed : config.ppo.seeds) {
    Trainer trainer(multitask_factory(config.env_config(), config.families),
                    config.ppo, seed);
    fs::path final_path;
    outputs.per_seed.push_back(
        drive(trainer, config, out_dir, false, log, &final_path));
    outputs.checkpoints.push_back(final_path);
  }
  write_summary(config, out_dir, &outputs);
  return outputs;
}

TrainOutputs resume_run(const Checkpoint& ckpt, const RunConfig& config,
                        const fs::path& out_dir,
                        const std::function<void(const std::string&)>& log) {
  config.validate();
  Trainer trainer = resume_trainer(ckpt, config);
  TrainOutputs outputs;
  fs::path final_path;
  outputs.per_seed.push_back(
      drive(trainer, config, out_dir, true, log, &final_path));
  outputs.checkpoints.push_back(final_path);
  write_summary(config, out_dir, &outputs);
  return outputs;
}

}  // namespace mmrl
