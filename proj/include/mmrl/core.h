#ifndef MMRL_CORE_H_
#define MMRL_CORE_H_

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mmrl {

using Vec3 = Eigen::Vector3d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// Axis-aligned box.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= lo.array() - tol).all() &&
           (p.array() <= hi.array() + tol).all();
  }
  Interval axis(int i) const { return {lo[i], hi[i]}; }
};

// Mixes a base seed with a stream tag so that independent consumers
// (trajectory sampling, dynamics, noise, policy sampling) draw from
// decorrelated generators. splitmix64 finalizer.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

// Stream tags.
enum SeedStream : std::uint64_t {
  kStreamTrajectory = 1,
  kStreamDynamics = 2,
  kStreamNoise = 3,
  kStreamPolicy = 4,
  kStreamEpisode = 5,
  kStreamInit = 6,
  kStreamShuffle = 7,
  kStreamEval = 8,
};

}  // namespace mmrl

#endif  // MMRL_CORE_H_
