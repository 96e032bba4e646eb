#ifndef MMRL_ORACLE_ORACLE_H_
#define MMRL_ORACLE_ORACLE_H_

// Independent reference computations used by the test suites and by
// `mmrl selftest`. Nothing here is used at training time.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmrl/core.h"
#include "mmrl/ppo.h"
#include "mmrl/sim.h"

namespace mmrl::oracle {

// lambda-weighted blend of k-step advantages, evaluated directly in O(T^2):
//   A_t = (1 - lambda) sum_{k=1}^{K-1} lambda^(k-1) A_t^(k)
//         + lambda^(K-1) A_t^(K),   K = T - t.
// A k-step estimate stops accumulating at a terminal step.
VectorXd gae_bruteforce(const VectorXd& rewards, const VectorXd& values,
                        const std::vector<std::uint8_t>& dones,
                        double bootstrap, double gamma, double lambda);

// Central differences of f at x.
VectorXd central_difference(const std::function<double(const VectorXd&)>& f,
                            const VectorXd& x, double h);

// FK by chaining homogeneous transforms.
Vec3 fk_transforms(const Vec3& q, double base_x, const RobotParams& params);

// Relative error between analytic and numeric gradients of the full PPO
// loss, one entry per parameter block.
struct BlockError {
  std::string name;
  double relative_error = 0.0;
};
std::vector<BlockError> ppo_gradient_check(std::uint64_t seed, int samples,
                                           double h);

// Result of one self-check.
struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};
std::vector<Check> run_selftest();

}  // namespace mmrl::oracle

#endif  // MMRL_ORACLE_ORACLE_H_
