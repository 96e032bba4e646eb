#include "mmrl/ppo.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracle/oracle.h"

namespace mmrl {
namespace {

struct Sequence {
  VectorXd rewards, values;
  std::vector<std::uint8_t> dones;
  double bootstrap = 0;
};

Sequence random_sequence(std::mt19937_64& rng, int n, double done_rate) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution done(done_rate);
  Sequence s;
  s.rewards.resize(n);
  s.values.resize(n);
  s.dones.resize(n);
  for (int i = 0; i < n; ++i) {
    s.rewards[i] = u(rng);
    s.values[i] = u(rng);
    s.dones[i] = done(rng);
  }
  s.bootstrap = u(rng);
  return s;
}

TEST(Gae, TelescopesWithUnitDiscounts) {
  std::mt19937_64 rng(1);
  Sequence s = random_sequence(rng, 20, 0.0);
  s.dones.back() = 1;
  GaeResult g = compute_gae(s.rewards, s.values, s.dones, s.bootstrap, 1, 1);
  for (int t = 0; t < 20; ++t) {
    double tail = s.rewards.tail(20 - t).sum();
    EXPECT_NEAR(g.advantages[t], tail - s.values[t], 1e-12);
    EXPECT_NEAR(g.returns[t], tail, 1e-12);
  }
}

TEST(Gae, LambdaZeroIsOneStep) {
  std::mt19937_64 rng(2);
  Sequence s = random_sequence(rng, 30, 0.1);
  GaeResult g = compute_gae(s.rewards, s.values, s.dones, s.bootstrap, 0.99, 0);
  for (int t = 0; t < 30; ++t) {
    double next = t + 1 < 30 ? s.values[t + 1] : s.bootstrap;
    double delta =
        s.rewards[t] + 0.99 * next * (s.dones[t] ? 0.0 : 1.0) - s.values[t];
    EXPECT_EQ(g.advantages[t], delta);
  }
}

TEST(Gae, MatchesBruteForceOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    int n = 1 + static_cast<int>(rng() % 50);
    Sequence s = random_sequence(rng, n, 0.08);
    double gamma = 0.8 + 0.2 * u(rng);
    double lambda = u(rng);
    if (k == 0) gamma = lambda = 1.0;
    if (k == 1) lambda = 0.0;
    GaeResult g =
        compute_gae(s.rewards, s.values, s.dones, s.bootstrap, gamma, lambda);
    VectorXd ref = oracle::gae_bruteforce(s.rewards, s.values, s.dones,
                                          s.bootstrap, gamma, lambda);
    ASSERT_LE((g.advantages - ref).cwiseAbs().maxCoeff(), 1e-10) << "k=" << k;
  }
}

TEST(Standardize, MeanZeroStdOne) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(3.0, 7.0);
  VectorXd v(1000);
  for (auto& x : v) x = normal(rng);
  VectorXd z = standardize(v);
  EXPECT_LE(std::abs(z.mean()), 1e-10);
  EXPECT_NEAR(std::sqrt(z.squaredNorm() / 1000.0), 1.0, 1e-10);
  VectorXd flat = VectorXd::Constant(5, 2.5);
  EXPECT_TRUE(standardize(flat).isZero(0.0));
}

TEST(Surrogate, ClipArithmetic) {
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
  double mean = (clipped_surrogate(0.7, -1.0, 0.2) +
                 clipped_surrogate(1.0, 2.0, 0.2) +
                 clipped_surrogate(1.4, 1.0, 0.2)) /
                3.0;
  // The doubles -0.8, 2.0 and 1.2 sum exactly to double(2.4), and 2.4 / 3
  // rounds to the neighbour just below double(0.8).
  EXPECT_LE(std::abs(mean - 0.8), 0.8 - std::nextafter(0.8, 0.0));
}

TEST(Surrogate, FlatOutsideClipRange) {
  for (double r : {1.3, 1.5, 2.0, 5.0})
    EXPECT_EQ(clipped_surrogate(r, 1.0, 0.2), clipped_surrogate(1.25, 1.0, 0.2));
  for (double r : {0.0, 0.3, 0.7, 0.79})
    EXPECT_EQ(clipped_surrogate(r, -2.0, 0.2), clipped_surrogate(0.1, -2.0, 0.2));
}

TEST(PpoLoss, HandBatchPolicyTerm) {
  // Build a batch whose ratios are 0.7 / 1.0 / 1.4 by shifting the old
  // log-probs.
  ActorCritic model(3, 2, {4});
  model.initialize(1);
  LossBatch b;
  b.obs = MatrixXd::Random(3, 3);
  b.actions = MatrixXd::Random(2, 3) * 0.5;
  b.log_prob_old.resize(3);
  double ratios[] = {0.7, 1.0, 1.4};
  for (int j = 0; j < 3; ++j) {
    VectorXd m = model.forward_policy(b.obs.col(j)).mean;
    b.log_prob_old[j] =
        log_prob(m, model.log_std(), b.actions.col(j)) - std::log(ratios[j]);
  }
  b.advantages = (VectorXd(3) << -1, 2, 1).finished();
  b.returns = VectorXd::Zero(3);
  PpoConfig c;
  LossTerms t = ppo_loss(model, model.params(), b, c, nullptr);
  EXPECT_NEAR(-t.policy, 0.8, 1e-12);
  EXPECT_NEAR(t.clip_fraction, 2.0 / 3.0, 1e-12);
}

TEST(PpoLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    for (const oracle::BlockError& e : oracle::ppo_gradient_check(seed, 4, 1e-5))
      EXPECT_LE(e.relative_error, 1e-5) << e.name << " seed " << seed;
  }
}

TEST(PpoLoss, FirstEpochRatiosAreOne) {
  ActorCritic model(4, 2, {8});
  model.initialize(2);
  LossBatch b;
  b.obs = MatrixXd::Random(4, 6);
  b.actions = MatrixXd::Random(2, 6);
  b.log_prob_old.resize(6);
  for (int j = 0; j < 6; ++j)
    b.log_prob_old[j] = log_prob(model.forward_policy(b.obs.col(j)).mean,
                                 model.log_std(), b.actions.col(j));
  b.advantages = VectorXd::Random(6);
  b.returns = VectorXd::Random(6);
  LossTerms t = ppo_loss(model, model.params(), b, PpoConfig{}, nullptr);
  EXPECT_NEAR(t.policy, -b.advantages.mean(), 1e-12);
  EXPECT_EQ(t.clip_fraction, 0.0);
}

PpoConfig small_config() {
  PpoConfig c;
  c.n_envs = 6;
  c.rollout_len = 200;
  c.total_env_steps = 1200;
  c.epochs_per_update = 2;
  c.hidden = {16, 16};
  return c;
}

EnvFactory all_families() {
  return multitask_factory(
      EnvConfig{}, {kBasicFamilies.begin(), kBasicFamilies.end()});
}

TEST(Rollouts, SizeAndFamilies) {
  Trainer t(all_families(), small_config(), 7);
  RolloutBatch b = t.collect_rollouts();
  EXPECT_EQ(b.size(), 1200);
  EXPECT_EQ(b.obs.cols(), 1200);
  std::set<int> ids(b.task_ids.begin(), b.task_ids.end());
  EXPECT_EQ(ids, (std::set<int>{0, 1, 2, 3, 4, 5}));
  // 200-step rollouts hold exactly one tracking episode per env.
  EXPECT_EQ(b.episodes.size(), 6u);
  for (int e = 0; e < 6; ++e) EXPECT_EQ(b.dones[e * 200 + 199], 1);
}

TEST(Rollouts, DeterministicAndWorkerIndependent) {
  PpoConfig c = small_config();
  Trainer a(all_families(), c, 11), b(all_families(), c, 11);
  c.workers = 3;
  Trainer w(all_families(), c, 11);
  RolloutBatch ba = a.collect_rollouts(), bb = b.collect_rollouts(),
               bw = w.collect_rollouts();
  EXPECT_EQ(ba.obs, bb.obs);
  EXPECT_EQ(ba.actions, bb.actions);
  EXPECT_EQ(ba.log_prob_old, bb.log_prob_old);
  EXPECT_EQ(ba.rewards, bw.rewards);
  EXPECT_EQ(ba.actions, bw.actions);
  EXPECT_EQ(ba.values_old, bw.values_old);
}

TEST(Rollouts, LogProbMatchesSnapshot) {
  Trainer t(all_families(), small_config(), 3);
  RolloutBatch b = t.collect_rollouts();
  for (Eigen::Index i = 0; i < b.size(); i += 97) {
    PolicyOutput out = t.model().forward_policy(b.obs.col(i));
    EXPECT_EQ(b.log_prob_old[i], log_prob(out.mean, out.log_std, b.actions.col(i)));
    EXPECT_EQ(b.values_old[i], t.model().forward_value(b.obs.col(i)));
  }
}

TEST(Train, OneUpdateWhenBudgetIsOneBatch) {
  Trainer t(all_families(), small_config(), 5);
  VectorXd before = t.model().params();
  std::vector<TrainStats> log = t.run();
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].env_steps, 1200);
  EXPECT_EQ(t.iteration(), 1);
  EXPECT_NE(before, t.model().params());
  // 2 epochs of ceil(1200 / 256) minibatches.
  EXPECT_EQ(t.adam().step, 10);
}

TEST(Train, StatsLogLengthAndReproducibility) {
  PpoConfig c = small_config();
  c.total_env_steps = 3 * 1200;
  Trainer a(all_families(), c, 9), b(all_families(), c, 9);
  auto la = a.run(), lb = b.run();
  ASSERT_EQ(la.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(la[i].mean_reward, lb[i].mean_reward);
    EXPECT_EQ(la[i].policy_loss, lb[i].policy_loss);
    EXPECT_EQ(la[i].value_loss, lb[i].value_loss);
    EXPECT_EQ(la[i].tracking_error, lb[i].tracking_error);
    EXPECT_TRUE(std::isfinite(la[i].policy_loss));
  }
  EXPECT_EQ(a.model().params(), b.model().params());
}

TEST(Train, LogStdStaysClamped) {
  PpoConfig c = small_config();
  c.learning_rate = 0.5;
  c.total_env_steps = 2400;
  Trainer t(all_families(), c, 2);
  t.run();
  EXPECT_GE(t.model().log_std().minCoeff(), kLogStdMin);
  EXPECT_LE(t.model().log_std().maxCoeff(), kLogStdMax);
}

TEST(Train, NonFiniteLossLeavesParamsUntouched) {
  Trainer t(all_families(), small_config(), 4);
  RolloutBatch b = t.collect_rollouts();
  b.rewards[5] = std::nan("");
  VectorXd before = t.model().params();
  std::mt19937_64 rng(1);
  EXPECT_THROW(ppo_update(&t.model(), &t.adam(), b, t.config(), rng),
               NonFiniteLossError);
  EXPECT_EQ(before, t.model().params());
  EXPECT_EQ(t.adam().step, 0);
}

TEST(Train, AverageStats) {
  TrainStats a, b;
  a.iteration = b.iteration = 1;
  a.mean_reward = 1;
  b.mean_reward = 3;
  a.episodes = 2;
  b.episodes = 4;
  auto avg = average_stats({{a}, {b, b}});
  ASSERT_EQ(avg.size(), 1u);
  EXPECT_EQ(avg[0].mean_reward, 2.0);
  EXPECT_EQ(avg[0].episodes, 6);
}

TEST(Config, Validation) {
  PpoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = PpoConfig{};
  c.clip_eps = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = PpoConfig{};
  c.rollout_len = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

// Toy point-mass chase. The bound (80% of the scripted pursuer's return,
// deterministic policy) was measured once and is kept as a regression
// floor.
TEST(Train, PointMassSmoke) {
  PpoConfig c;
  c.n_envs = 4;
  c.total_env_steps = 200000;
  c.seeds = {123};
  Trainer t([](int) { return std::make_unique<PointMassEnv>(); }, c, 123);
  t.run();

  double learned = 0, scripted = 0;
  const int episodes = 10;
  for (int e = 0; e < episodes; ++e) {
    PointMassEnv env;
    Observation o = env.reset(5000 + e);
    StepResult r;
    do {
      r = env.step(mean_action(t.model(), o));
      o = r.observation;
      learned += r.reward;
    } while (!r.done);
    o = env.reset(5000 + e);
    do {
      Vec3 diff = o.segment<3>(6) + o.segment<3>(9) * kDefaultDt;
      std::vector<double> a(3);
      for (int i = 0; i < 3; ++i)
        a[i] = std::clamp(diff[i] / PointMassEnv::kStepMax, -1.0, 1.0);
      r = env.step(a);
      o = r.observation;
      scripted += r.reward;
    } while (!r.done);
  }
  EXPECT_GE(learned, 0.8 * scripted)
      << "learned " << learned / episodes << " scripted "
      << scripted / episodes;
}

}  // namespace
}  // namespace mmrl
