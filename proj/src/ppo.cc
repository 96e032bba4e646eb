#include "mmrl/ppo.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace mmrl {

void PpoConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument(what);
  };
  if (!(gamma > 0 && gamma <= 1)) fail("ppo.gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0 && gae_lambda <= 1))
    fail("ppo.gae_lambda must lie in [0, 1]");
  if (!(clip_eps > 0)) fail("ppo.clip_eps must be > 0");
  if (!(learning_rate > 0)) fail("ppo.learning_rate must be > 0");
  if (rollout_len < 1) fail("ppo.rollout_len must be >= 1");
  if (n_envs < 1) fail("ppo.n_envs must be >= 1");
  if (epochs_per_update < 1) fail("ppo.epochs_per_update must be >= 1");
  if (minibatch_size < 1) fail("ppo.minibatch_size must be >= 1");
  if (value_coef < 0 || entropy_coef < 0)
    fail("loss coefficients must be >= 0");
  if (!(grad_clip_norm > 0)) fail("ppo.grad_clip_norm must be > 0");
  if (total_env_steps < 1) fail("ppo.total_env_steps must be >= 1");
  if (seeds.empty()) fail("at least one seed is required");
  if (workers < 1) fail("ppo.workers must be >= 1");
  if (!(log_std_init >= kLogStdMin && log_std_init <= kLogStdMax))
    fail("net.log_std_init outside the clamp range");
}

GaeResult compute_gae(const VectorXd& rewards, const VectorXd& values,
                      const std::vector<std::uint8_t>& dones, double bootstrap,
                      double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n)
    throw std::invalid_argument("compute_gae: sequence lengths differ");
  GaeResult out;
  out.advantages.resize(n);
  double next_value = bootstrap;
  double next_adv = 0.0;
  for (Eigen::Index t = n; t-- > 0;) {
    double live = dones[t] ? 0.0 : 1.0;
    double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[t] = next_adv;
    next_value = values[t];
  }
  out.returns = out.advantages + values;
  return out;
}

GaeResult compute_gae(const RolloutBatch& batch, double gamma, double lambda) {
  GaeResult out;
  out.advantages.resize(batch.size());
  out.returns.resize(batch.size());
  const int t_len = batch.rollout_len;
  for (int e = 0; e < batch.n_envs; ++e) {
    const Eigen::Index begin = static_cast<Eigen::Index>(e) * t_len;
    std::vector<std::uint8_t> dones(batch.dones.begin() + begin,
                                    batch.dones.begin() + begin + t_len);
    GaeResult r = compute_gae(batch.rewards.segment(begin, t_len),
                              batch.values_old.segment(begin, t_len), dones,
                              batch.bootstrap[e], gamma, lambda);
    out.advantages.segment(begin, t_len) = r.advantages;
    out.returns.segment(begin, t_len) = r.returns;
  }
  return out;
}

VectorXd standardize(const VectorXd& v) {
  if (v.size() == 0) return v;
  const double mean = v.mean();
  VectorXd c = v.array() - mean;
  const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(v.size()));
  if (sd > 0) c /= sd;
  return c;
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
  double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

LossTerms ppo_loss(const ActorCritic& model, const VectorXd& params,
                   const LossBatch& batch, const PpoConfig& config,
                   VectorXd* grad) {
  const Eigen::Index b = batch.obs.cols();
  const int act = model.act_dim();
  const double inv_b = 1.0 / static_cast<double>(b);
  static const double kHalfLog2Pi = 0.5 * std::log(2.0 * kPi);

  MlpTape pt, vt;
  model.policy_net().forward(params, batch.obs, &pt);
  model.value_net().forward(params, batch.obs, &vt);
  const MatrixXd& mean = pt.output();
  const VectorXd ls = params.segment(model.log_std_offset(), act);
  const VectorXd inv_var = (-2.0 * ls).array().exp();

  LossTerms terms;
  MatrixXd d_mean(act, b);
  VectorXd d_ls = VectorXd::Zero(act);
  MatrixXd d_value(1, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    VectorXd diff = batch.actions.col(i) - mean.col(i);
    VectorXd sq = diff.cwiseProduct(diff).cwiseProduct(inv_var);
    double logp = -0.5 * sq.sum() - ls.sum() - kHalfLog2Pi * act;
    double ratio = std::exp(logp - batch.log_prob_old[i]);
    double adv = batch.advantages[i];
    double clipped = std::clamp(ratio, 1.0 - config.clip_eps,
                                1.0 + config.clip_eps);
    bool unclipped_active = ratio * adv <= clipped * adv;
    terms.policy -= std::min(ratio * adv, clipped * adv) * inv_b;
    if (std::abs(ratio - 1.0) > config.clip_eps) terms.clip_fraction += inv_b;
    terms.approx_kl += (batch.log_prob_old[i] - logp) * inv_b;

    // dL/dlogp for this sample.
    double g = unclipped_active ? -ratio * adv * inv_b : 0.0;
    d_mean.col(i) = g * diff.cwiseProduct(inv_var);
    d_ls += g * (sq.array() - 1.0).matrix();

    double v_err = vt.output()(0, i) - batch.returns[i];
    terms.value += v_err * v_err * inv_b;
    d_value(0, i) = 2.0 * config.value_coef * v_err * inv_b;
  }
  terms.entropy = gaussian_entropy(ls);
  terms.total = terms.policy + config.value_coef * terms.value -
                config.entropy_coef * terms.entropy;

  if (grad) {
    model.policy_net().backward(params, pt, d_mean, grad);
    model.value_net().backward(params, vt, d_value, grad);
    grad->segment(model.log_std_offset(), act) +=
        (d_ls.array() - config.entropy_coef).matrix();
  }
  return terms;
}

TrainStats ppo_update(ActorCritic* model, AdamState* adam,
                      const RolloutBatch& batch, const PpoConfig& config,
                      std::mt19937_64& shuffle_rng) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty batch");
  GaeResult gae = compute_gae(batch, config.gamma, config.gae_lambda);
  VectorXd adv = standardize(gae.advantages);

  const VectorXd params_before = model->params();
  const AdamState adam_before = *adam;

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index mb = std::min<Eigen::Index>(config.minibatch_size, n);
  const int obs_dim = static_cast<int>(batch.obs.rows());
  const int act_dim = static_cast<int>(batch.actions.rows());

  TrainStats stats;
  int updates = 0;
  LossBatch lb;
  VectorXd grad(model->params().size());
  for (int epoch = 0; epoch < config.epochs_per_update; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (Eigen::Index start = 0; start < n; start += mb) {
      const Eigen::Index m = std::min(mb, n - start);
      lb.obs.resize(obs_dim, m);
      lb.actions.resize(act_dim, m);
      lb.log_prob_old.resize(m);
      lb.advantages.resize(m);
      lb.returns.resize(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::Index i = order[start + j];
        lb.obs.col(j) = batch.obs.col(i);
        lb.actions.col(j) = batch.actions.col(i);
        lb.log_prob_old[j] = batch.log_prob_old[i];
        lb.advantages[j] = adv[i];
        lb.returns[j] = gae.returns[i];
      }
      grad.setZero();
      LossTerms t = ppo_loss(*model, model->params(), lb, config, &grad);
      if (!std::isfinite(t.total) || !grad.allFinite()) {
        model->params() = params_before;
        *adam = adam_before;
        std::ostringstream msg;
        msg << "non-finite PPO loss at epoch " << epoch << " (policy "
            << t.policy << ", value " << t.value << ", entropy " << t.entropy
            << ")";
        throw NonFiniteLossError(msg.str());
      }
      double norm = grad.norm();
      if (norm > config.grad_clip_norm) grad *= config.grad_clip_norm / norm;
      adam_step(&model->params(), grad, adam, model->blocks());
      model->clamp_log_std();
      stats.policy_loss += t.policy;
      stats.value_loss += t.value;
      stats.clip_fraction += t.clip_fraction;
      ++updates;
    }
  }
  stats.policy_loss /= updates;
  stats.value_loss /= updates;
  stats.clip_fraction /= updates;
  return stats;
}

EnvFactory multitask_factory(const EnvConfig& config,
                             std::vector<TrajectoryFamily> families) {
  if (families.empty())
    throw std::invalid_argument("at least one trajectory family is required");
  return [config, families](int index) -> std::unique_ptr<Environment> {
    return std::make_unique<MobileManipulatorEnv>(
        config, families[static_cast<std::size_t>(index) % families.size()]);
  };
}

Trainer::Trainer(EnvFactory factory, PpoConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  config_.validate();
  slots_.resize(config_.n_envs);
  for (int i = 0; i < config_.n_envs; ++i) {
    slots_[i].env = factory(i);
    slots_[i].action_rng.seed(derive_seed(seed_, kStreamPolicy, i));
  }
  const Environment& e0 = *slots_[0].env;
  for (const Slot& s : slots_) {
    if (s.env->observation_dim() != e0.observation_dim() ||
        s.env->action_dim() != e0.action_dim())
      throw std::invalid_argument("environments disagree on dimensions");
  }
  model_ = ActorCritic(e0.observation_dim(), e0.action_dim(), config_.hidden);
  model_.initialize(derive_seed(seed_, kStreamInit), config_.log_std_init);
  adam_ = AdamState::zeros(model_.params().size(), config_.learning_rate);
  shuffle_rng_.seed(derive_seed(seed_, kStreamShuffle));
  for (int i = 0; i < config_.n_envs; ++i) start_episode(i);
}

void Trainer::start_episode(int index) {
  Slot& s = slots_[index];
  s.obs = s.env->reset(derive_seed(seed_, kStreamEpisode, index) + s.episodes);
  s.running = EpisodeSummary{};
  s.running.task_id = s.env->task_id();
}

void Trainer::set_progress(int iteration, long env_steps) {
  iteration_ = iteration;
  env_steps_ = env_steps;
  // A slot has run fewer than env_steps episodes so far, so offsetting the
  // episode counter by it never reuses an episode seed.
  for (int i = 0; i < static_cast<int>(slots_.size()); ++i) {
    slots_[i].episodes = env_steps;
    start_episode(i);
  }
}

// Steps one env for rollout_len steps, writing columns of its contiguous
// block. Only touches slot `index` and that block.
void Trainer::collect_env(int index, RolloutBatch* batch) {
  Slot& s = slots_[index];
  const int t_len = config_.rollout_len;
  const int act = model_.act_dim();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> executed(act);
  for (int t = 0; t < t_len; ++t) {
    const Eigen::Index i = static_cast<Eigen::Index>(index) * t_len + t;
    PolicyOutput out = model_.forward_policy(s.obs);
    VectorXd a(act);
    for (int j = 0; j < act; ++j)
      a[j] = out.mean[j] + std::exp(out.log_std[j]) * normal(s.action_rng);
    for (int j = 0; j < act; ++j) executed[j] = std::clamp(a[j], -1.0, 1.0);
    batch->obs.col(i) = s.obs;
    batch->actions.col(i) = a;
    batch->log_prob_old[i] = log_prob(out.mean, out.log_std, a);
    batch->values_old[i] = model_.forward_value(s.obs);
    batch->task_ids[i] = s.env->task_id();

    StepResult r = s.env->step(executed);
    batch->rewards[i] = r.reward;
    batch->dones[i] = r.done ? 1 : 0;
    batch->distances[i] = r.info.distance;
    s.running.steps += 1;
    s.running.episode_return += r.reward;
    s.running.mean_distance += r.info.distance;
    s.running.grasp_success = s.running.grasp_success || r.info.grasp_success;
    if (r.done) {
      s.running.mean_distance /= s.running.steps;
      s.finished.push_back(s.running);
      s.episodes += 1;
      start_episode(index);
    } else {
      s.obs = r.observation;
    }
  }
  batch->bootstrap[index] = model_.forward_value(s.obs);
}

RolloutBatch Trainer::collect_rollouts() {
  const int n_envs = config_.n_envs;
  const Eigen::Index n = static_cast<Eigen::Index>(n_envs) * config_.rollout_len;
  RolloutBatch batch;
  batch.n_envs = n_envs;
  batch.rollout_len = config_.rollout_len;
  batch.obs.resize(model_.obs_dim(), n);
  batch.actions.resize(model_.act_dim(), n);
  batch.log_prob_old.resize(n);
  batch.rewards.resize(n);
  batch.values_old.resize(n);
  batch.dones.assign(n, 0);
  batch.task_ids.assign(n, -1);
  batch.distances.resize(n);
  batch.bootstrap.resize(n_envs);

  const int workers = std::min(config_.workers, n_envs);
  if (workers <= 1) {
    for (int e = 0; e < n_envs; ++e) collect_env(e, &batch);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([this, w, workers, n_envs, &batch] {
        for (int e = w; e < n_envs; e += workers) collect_env(e, &batch);
      });
    }
    for (std::thread& t : pool) t.join();
  }
  // Index-ordered merge.
  for (Slot& s : slots_) {
    for (const EpisodeSummary& ep : s.finished) batch.episodes.push_back(ep);
    s.finished.clear();
  }
  return batch;
}

TrainStats Trainer::iterate() {
  auto t0 = std::chrono::steady_clock::now();
  RolloutBatch batch = collect_rollouts();
  TrainStats stats = ppo_update(&model_, &adam_, batch, config_, shuffle_rng_);
  iteration_ += 1;
  env_steps_ += batch.size();
  stats.iteration = iteration_;
  stats.env_steps = env_steps_;
  stats.tracking_error = batch.distances.mean();
  stats.episodes = static_cast<int>(batch.episodes.size());
  if (stats.episodes > 0) {
    double ret = 0, succ = 0;
    for (const EpisodeSummary& ep : batch.episodes) {
      ret += ep.episode_return;
      succ += ep.grasp_success ? 1.0 : 0.0;
    }
    stats.mean_reward = ret / stats.episodes;
    stats.grasp_success_rate = succ / stats.episodes;
  }
  wall_time_s_ += std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  stats.wall_time_s = wall_time_s_;
  return stats;
}

std::vector<TrainStats> Trainer::run(
    const std::function<void(const Trainer&, const TrainStats&)>&
        on_iteration) {
  std::vector<TrainStats> log;
  while (env_steps_ < config_.total_env_steps) {
    log.push_back(iterate());
    if (on_iteration) on_iteration(*this, log.back());
  }
  return log;
}

std::vector<TrainStats> average_stats(
    const std::vector<std::vector<TrainStats>>& per_seed) {
  std::vector<TrainStats> out;
  if (per_seed.empty()) return out;
  std::size_t len = per_seed[0].size();
  for (const auto& s : per_seed) len = std::min(len, s.size());
  const double k = static_cast<double>(per_seed.size());
  for (std::size_t i = 0; i < len; ++i) {
    TrainStats a;
    a.iteration = per_seed[0][i].iteration;
    a.env_steps = per_seed[0][i].env_steps;
    for (const auto& s : per_seed) {
      const TrainStats& x = s[i];
      a.mean_reward += x.mean_reward / k;
      a.tracking_error += x.tracking_error / k;
      a.grasp_success_rate += x.grasp_success_rate / k;
      a.policy_loss += x.policy_loss / k;
      a.value_loss += x.value_loss / k;
      a.clip_fraction += x.clip_fraction / k;
      a.wall_time_s += x.wall_time_s / k;
      a.episodes += x.episodes;
    }
    out.push_back(a);
  }
  return out;
}

std::vector<double> mean_action(const ActorCritic& model,
                                const Observation& obs) {
  VectorXd m = model.forward_policy(obs).mean;
  std::vector<double> a(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i)
    a[i] = std::clamp(m[i], -1.0, 1.0);
  return a;
}

PointMassEnv::PointMassEnv(int episode_steps) : episode_steps_(episode_steps) {}

Vec3 PointMassEnv::goal_at(int k) const {
  double th = phase_ + omega_ * k * kDefaultDt;
  return center_ + radius_ * Vec3(std::cos(th), std::sin(th), 0.0);
}

Observation PointMassEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  center_ = Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
  radius_ = 0.1 + 0.2 * u(rng);
  double speed = 0.05 + 0.15 * u(rng);
  omega_ = (u(rng) < 0.5 ? -1.0 : 1.0) * speed / radius_;
  phase_ = 2 * kPi * u(rng);
  Vec3 dir(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
  pos_ = goal_at(0) + 0.1 * dir.normalized();
  k_ = 0;
  done_ = false;
  return observe();
}

Observation PointMassEnv::observe() const {
  Observation o(12);
  Vec3 g = goal_at(k_);
  Vec3 gv = (goal_at(k_ + 1) - g) / kDefaultDt;
  o << pos_, g, g - pos_, gv;
  return o;
}

StepResult PointMassEnv::step(std::span<const double> action) {
  if (done_) throw UsageError("step() called on a finished episode");
  if (action.size() != 3)
    throw std::invalid_argument("point-mass action must have 3 components");
  for (int i = 0; i < 3; ++i)
    pos_[i] += kStepMax * std::clamp(action[i], -1.0, 1.0);
  k_ += 1;
  StepResult r;
  r.info.distance = (goal_at(k_) - pos_).norm();
  r.reward = tracking_reward(r.info.distance);
  done_ = k_ >= episode_steps_;
  r.done = done_;
  r.observation = observe();
  return r;
}

}  // namespace mmrl
