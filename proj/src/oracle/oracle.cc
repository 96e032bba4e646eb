#include "oracle/oracle.h"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdio>
#include <random>

#include "mmrl/env.h"

namespace mmrl::oracle {

VectorXd gae_bruteforce(const VectorXd& rewards, const VectorXd& values,
                        const std::vector<std::uint8_t>& dones,
                        double bootstrap, double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  auto value_at = [&](Eigen::Index i) {
    return i < n ? values[i] : bootstrap;
  };
  // k-step advantage from t.
  auto k_step = [&](Eigen::Index t, Eigen::Index k) {
    double sum = 0.0;
    double discount = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      sum += discount * rewards[t + j];
      if (dones[t + j]) return sum - values[t];
      discount *= gamma;
    }
    return sum + discount * value_at(t + k) - values[t];
  };
  VectorXd out(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::Index K = n - t;
    double acc = 0.0;
    double weight = 1.0;  // lambda^(k-1)
    for (Eigen::Index k = 1; k < K; ++k) {
      acc += (1.0 - lambda) * weight * k_step(t, k);
      weight *= lambda;
    }
    acc += weight * k_step(t, K);
    out[t] = acc;
  }
  return out;
}

VectorXd central_difference(const std::function<double(const VectorXd&)>& f,
                            const VectorXd& x, double h) {
  VectorXd g(x.size());
  VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double up = f(p);
    p[i] = saved - h;
    const double down = f(p);
    p[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Vec3 fk_transforms(const Vec3& q, double base_x, const RobotParams& params) {
  using Eigen::AngleAxisd;
  using Eigen::Translation3d;
  Eigen::Affine3d t =
      Translation3d(base_x, 0.0, params.shoulder_height) *
      AngleAxisd(q[0], Vec3::UnitZ()) * AngleAxisd(-q[1], Vec3::UnitY()) *
      Translation3d(params.link1_length, 0.0, 0.0) *
      AngleAxisd(-q[2], Vec3::UnitY()) *
      Translation3d(params.link2_length, 0.0, 0.0);
  return t.translation();
}

std::vector<BlockError> ppo_gradient_check(std::uint64_t seed, int samples,
                                           double h) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ActorCritic model(kObservationDim, 5);
  model.initialize(seed);
  // Move away from the init so no block is trivially small.
  for (Eigen::Index i = 0; i < model.params().size(); ++i)
    model.params()[i] += 0.1 * normal(rng);

  PpoConfig config;
  config.entropy_coef = 0.01;
  LossBatch batch;
  batch.obs.resize(kObservationDim, samples);
  batch.actions.resize(5, samples);
  batch.log_prob_old.resize(samples);
  batch.advantages.resize(samples);
  batch.returns.resize(samples);
  for (int j = 0; j < samples; ++j) {
    for (int i = 0; i < kObservationDim; ++i) batch.obs(i, j) = normal(rng);
    VectorXd mean = model.forward_policy(batch.obs.col(j)).mean;
    for (int i = 0; i < 5; ++i)
      batch.actions(i, j) = mean[i] + 0.3 * normal(rng);
    // Old log-probs near the current ones keep every ratio inside the clip
    // range, where the loss is smooth.
    batch.log_prob_old[j] =
        log_prob(mean, model.log_std(), batch.actions.col(j)) +
        0.05 * normal(rng);
    batch.advantages[j] = normal(rng);
    batch.returns[j] = normal(rng);
  }

  VectorXd analytic = VectorXd::Zero(model.params().size());
  ppo_loss(model, model.params(), batch, config, &analytic);
  VectorXd numeric = central_difference(
      [&](const VectorXd& p) {
        return ppo_loss(model, p, batch, config, nullptr).total;
      },
      model.params(), h);

  std::vector<BlockError> out;
  for (const ParamBlock& b : model.blocks()) {
    VectorXd a = analytic.segment(b.offset, b.size());
    VectorXd n = numeric.segment(b.offset, b.size());
    double scale = std::max(a.norm(), n.norm());
    out.push_back({b.name, scale > 0 ? (a - n).norm() / scale : 0.0});
  }
  return out;
}

std::vector<Check> run_selftest() {
  std::vector<Check> checks;
  char buf[160];

  {
    double worst = 0.0;
    for (std::uint64_t s = 1; s <= 3; ++s)
      for (const BlockError& e : ppo_gradient_check(s, 4, 1e-5))
        worst = std::max(worst, e.relative_error);
    std::snprintf(buf, sizeof buf, "max relative error %.3g", worst);
    checks.push_back({"ppo loss gradient", worst <= 1e-5, buf});
  }
  {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 500; ++k) {
      int n = 1 + static_cast<int>(rng() % 50);
      VectorXd r(n), v(n);
      std::vector<std::uint8_t> d(n);
      for (int i = 0; i < n; ++i) {
        r[i] = u(rng);
        v[i] = u(rng);
        d[i] = (rng() % 10) == 0;
      }
      double boot = u(rng);
      double gamma = 0.5 + 0.5 * (u(rng) + 1.0) / 2.0;
      double lambda = (u(rng) + 1.0) / 2.0;
      VectorXd a = compute_gae(r, v, d, boot, gamma, lambda).advantages;
      VectorXd b = gae_bruteforce(r, v, d, boot, gamma, lambda);
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    std::snprintf(buf, sizeof buf, "max abs difference %.3g", worst);
    checks.push_back({"gae vs brute force", worst <= 1e-10, buf});
  }
  {
    RobotParams p;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0, fk_worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
      double base = 2.0 * u(rng) - 1.0;
      Vec3 dir(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
      double r = p.reach_min + (p.reach_max - p.reach_min) * u(rng);
      Vec3 target = shoulder_position(base, p) + r * dir.normalized();
      IkResult s = ik(target, base, p);
      worst = std::max(worst, (fk(s.q, base, p) - target).norm());
      fk_worst = std::max(fk_worst,
                          (fk(s.q, base, p) - fk_transforms(s.q, base, p)).norm());
    }
    std::snprintf(buf, sizeof buf, "ik round trip %.3g m, fk cross-check %.3g m",
                  worst, fk_worst);
    checks.push_back({"fk/ik", worst <= 1e-9 && fk_worst <= 1e-12, buf});
  }
  {
    double mean = (clipped_surrogate(0.7, -1.0, 0.2) +
                   clipped_surrogate(1.0, 2.0, 0.2) +
                   clipped_surrogate(1.4, 1.0, 0.2)) /
                  3.0;
    std::snprintf(buf, sizeof buf, "surrogate mean %.17g", mean);
    checks.push_back({"clip arithmetic",
                      std::abs(mean - 0.8) <= 0.8 - std::nextafter(0.8, 0.0),
                      buf});
  }
  return checks;
}

}  // namespace mmrl::oracle
