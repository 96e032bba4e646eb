#ifndef MMRL_TRAJECTORY_H_
#define MMRL_TRAJECTORY_H_

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mmrl/core.h"

namespace mmrl {

enum class TrajectoryFamily {
  kHorizontalLine,
  kVerticalLine,
  kCircle,
  kSine,
  kSquare,
  kHelix,
  kRandomComposite,  // evaluation only
};

inline constexpr std::array<TrajectoryFamily, 6> kBasicFamilies = {
    TrajectoryFamily::kHorizontalLine, TrajectoryFamily::kVerticalLine,
    TrajectoryFamily::kCircle,         TrajectoryFamily::kSine,
    TrajectoryFamily::kSquare,         TrajectoryFamily::kHelix,
};

std::string_view family_name(TrajectoryFamily family);
std::optional<TrajectoryFamily> parse_family(std::string_view name);
// Index into kBasicFamilies, or -1 for RandomComposite.
int family_index(TrajectoryFamily family);

// Parameter sampling ranges.
struct SamplingRanges {
  Interval speed{0.05, 0.30};
  Interval radius{0.10, 0.40};
  Interval side_length{0.20, 0.50};
  Interval amplitude{0.10, 0.30};
  Interval wavelength{0.50, 1.50};
  Interval vertical_speed{0.02, 0.10};
  // Shortest admissible travel interval for line and sine motions.
  double min_travel = 0.10;
  // Composite construction.
  int composite_min_segments = 3;
  int composite_max_segments = 6;
  int composite_min_steps = 30;
  int composite_max_steps = 80;
};

inline constexpr double kDefaultDt = 0.04;

// Goal workspace in world coordinates (m). Lies inside the reachable tube of
// the default robot (see sim.h) and in front of its home pose.
inline Box default_workspace() {
  return {Vec3(0.6, -0.3, 0.3), Vec3(1.6, 0.3, 1.1)};
}
inline constexpr int kEpisodeSteps = 200;

struct CompositeSegment;

// One parameterized moving-goal trajectory.
//
// The meaning of `direction` and `turn` depends on the family:
//   HorizontalLine / VerticalLine: direction is the unit travel direction.
//     The goal moves back and forth along the chord of that line through
//     `start` clipped to `bounds`.
//   Sine: direction is the unit (horizontal) axis of travel; the curve
//     oscillates along +z: start + u*direction + amplitude*sin(2*pi*u/
//     wavelength)*z. Travel reverses at the ends of the admissible axis
//     interval.
//   Circle: x-z plane; direction is the unit vector from start to center,
//     turn is the angular sense in the (x, z) coordinates.
//   Square: x-z plane; start is a corner, direction is the first edge, the
//     second edge is turn * (y-hat x direction).
//   Helix: direction is the horizontal unit vector from start to the axis,
//     turn the angular sense in (x, y); z bounces between bounds.z with
//     vertical_sign giving the initial vertical sense.
// Speeds are constant per-step chord lengths: every step that does not
// contain a reflection or corner moves the goal by exactly speed * dt.
struct TrajectorySpec {
  TrajectoryFamily family = TrajectoryFamily::kHorizontalLine;
  Vec3 start = Vec3::Zero();
  double speed = 0.1;
  Vec3 direction = Vec3::UnitX();
  double turn = 1.0;
  double radius = 0.0;
  double side_length = 0.0;
  double amplitude = 0.0;
  double wavelength = 0.0;
  double vertical_speed = 0.0;
  double vertical_sign = 1.0;
  Box bounds;
  std::uint64_t seed = 0;
  // RandomComposite only.
  std::vector<CompositeSegment> segments;
};

struct CompositeSegment {
  TrajectorySpec spec;  // a basic family
  int start_step = 0;   // global step at which the segment begins
  int steps = 0;        // segment duration
};

struct GoalSample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  // The step ending here contained a boundary reflection or a corner, so
  // its chord may be shorter than speed * dt (path length is conserved).
  bool reflected = false;
};

class TrajectoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Samples a basic family. Throws TrajectoryError when the workspace cannot
// hold the family at its minimum parameters (message names the axis).
TrajectorySpec sample_spec(TrajectoryFamily family, std::uint64_t rng_seed,
                           const Box& workspace,
                           const SamplingRanges& ranges = {});

// Chain of 3-6 basic segments with fresh parameters, C0-continuous, at
// least `min_steps` long in total.
TrajectorySpec sample_composite(std::uint64_t rng_seed, const Box& workspace,
                                const SamplingRanges& ranges = {},
                                int min_steps = kEpisodeSteps);

// Dispatches to sample_spec / sample_composite.
TrajectorySpec sample_any(TrajectoryFamily family, std::uint64_t rng_seed,
                          const Box& workspace,
                          const SamplingRanges& ranges = {});

// Goal at `step`. Pure; Sine is integrated from step 0 so cost is O(step)
// for that family. Use GoalPath when stepping through a whole episode.
GoalSample goal_at(const TrajectorySpec& spec, int step,
                   double dt = kDefaultDt);

// Precomputed goal samples for steps [0, steps].
class GoalPath {
 public:
  GoalPath() = default;
  GoalPath(const TrajectorySpec& spec, int steps, double dt = kDefaultDt);

  const GoalSample& at(int step) const { return samples_.at(step); }
  int steps() const { return static_cast<int>(samples_.size()) - 1; }

 private:
  std::vector<GoalSample> samples_;
};

// Serialization as flat `key = value` lines, optionally prefixed.
std::string spec_to_text(const TrajectorySpec& spec,
                         const std::string& prefix = "traj.");
TrajectorySpec spec_from_text(const std::string& text,
                              const std::string& prefix = "traj.");

}  // namespace mmrl

#endif  // MMRL_TRAJECTORY_H_
