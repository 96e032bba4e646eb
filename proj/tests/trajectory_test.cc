#include "mmrl/trajectory.h"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace mmrl {
namespace {

constexpr double kDt = 0.04;

std::vector<GoalSample> sample_path(const TrajectorySpec& spec, int steps) {
  GoalPath path(spec, steps, kDt);
  std::vector<GoalSample> out;
  for (int k = 0; k <= steps; ++k) out.push_back(path.at(k));
  return out;
}

TEST(SampleSpec, CircleRangesAndDeterminism) {
  Box ws = default_workspace();
  TrajectorySpec a = sample_spec(TrajectoryFamily::kCircle, 7, ws);
  TrajectorySpec b = sample_spec(TrajectoryFamily::kCircle, 7, ws);
  EXPECT_GE(a.radius, 0.10);
  EXPECT_LE(a.radius, 0.40);
  EXPECT_TRUE(ws.contains(a.start, 1e-12));
  EXPECT_EQ(spec_to_text(a), spec_to_text(b));
}

TEST(SampleSpec, HorizontalLineHasZeroVerticalDirection) {
  TrajectorySpec s =
      sample_spec(TrajectoryFamily::kHorizontalLine, 3, default_workspace());
  EXPECT_EQ(s.direction.z(), 0.0);
  EXPECT_NEAR(s.direction.norm(), 1.0, 1e-12);
}

TEST(SampleSpec, InvariantsHoldForAllFamilies) {
  Box ws = default_workspace();
  SamplingRanges r;
  for (TrajectoryFamily fam : kBasicFamilies) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      TrajectorySpec s = sample_spec(fam, seed, ws);
      SCOPED_TRACE(std::string(family_name(fam)) + " seed " +
                   std::to_string(seed));
      EXPECT_TRUE(r.speed.contains(s.speed));
      EXPECT_TRUE(ws.contains(s.start, 1e-12));
      EXPECT_NEAR(s.direction.norm(), 1.0, 1e-12);
      if (fam == TrajectoryFamily::kCircle || fam == TrajectoryFamily::kHelix)
        EXPECT_TRUE(r.radius.contains(s.radius));
      if (fam == TrajectoryFamily::kSquare)
        EXPECT_TRUE(r.side_length.contains(s.side_length));
      if (fam == TrajectoryFamily::kSine) {
        EXPECT_TRUE(r.amplitude.contains(s.amplitude));
        EXPECT_TRUE(r.wavelength.contains(s.wavelength));
      }
      if (fam == TrajectoryFamily::kHelix)
        EXPECT_TRUE(r.vertical_speed.contains(s.vertical_speed));
    }
  }
}

TEST(SampleSpec, RejectsWorkspaceTooSmall) {
  Box thin{Vec3(0.6, -0.3, 0.7), Vec3(1.6, 0.3, 0.85)};
  try {
    sample_spec(TrajectoryFamily::kCircle, 1, thin);
    FAIL() << "expected TrajectoryError";
  } catch (const TrajectoryError& e) {
    EXPECT_NE(std::string(e.what()).find("z extent"), std::string::npos);
  }
  Box narrow{Vec3(0.6, -0.05, 0.3), Vec3(1.6, 0.05, 1.1)};
  EXPECT_THROW(sample_spec(TrajectoryFamily::kHelix, 1, narrow),
               TrajectoryError);
  // Lines only need travel along their own axis.
  EXPECT_NO_THROW(sample_spec(TrajectoryFamily::kVerticalLine, 1, narrow));
  Box flat{Vec3(0, 0, 0), Vec3(1, 1, 0)};
  EXPECT_THROW(sample_spec(TrajectoryFamily::kHorizontalLine, 1, flat),
               TrajectoryError);
}

TEST(GoalAt, InitialConditionIsStartWithZeroVelocity) {
  for (TrajectoryFamily fam : kBasicFamilies) {
    TrajectorySpec s = sample_spec(fam, 11, default_workspace());
    GoalSample g = goal_at(s, 0);
    EXPECT_EQ(g.position, s.start);
    EXPECT_EQ(g.velocity, Vec3::Zero());
  }
}

TEST(GoalAt, CircleClosesAfterOnePeriod) {
  TrajectorySpec s;
  s.family = TrajectoryFamily::kCircle;
  s.bounds = default_workspace();
  s.start = Vec3(1.1, 0.0, 0.7);
  s.direction = Vec3(0.0, 0.0, 1.0);
  s.radius = 0.2;
  s.speed = 0.1;
  // Period 2*pi*r/v = 4*pi s, i.e. 314.16 steps of 0.04 s.
  int period = static_cast<int>(std::lround(2 * kPi * 0.2 / 0.1 / kDt));
  ASSERT_EQ(period, 314);
  EXPECT_LE((goal_at(s, period).position - s.start).norm(), 2e-3);
  EXPECT_GT((goal_at(s, period / 2).position - s.start).norm(), 0.39);
}

TEST(GoalAt, SquareCompletesPerimeterInEpisode) {
  TrajectorySpec s;
  s.family = TrajectoryFamily::kSquare;
  s.bounds = default_workspace();
  s.start = Vec3(0.8, 0.0, 0.5);
  s.direction = Vec3::UnitX();
  s.turn = -1.0;  // second edge along +z
  s.side_length = 0.3;
  s.speed = 0.15;
  auto path = sample_path(s, 200);
  // Path length: every step contributes speed*dt; corners are on step
  // boundaries here (0.3 / 0.006 = 50), so chord sums equal path length.
  double length = 0.0;
  for (int k = 1; k <= 200; ++k)
    length += (path[k].position - path[k - 1].position).norm();
  EXPECT_NEAR(length, 1.2, 1e-9);
  EXPECT_NEAR((path[200].position - s.start).norm(), 0.0, 1e-9);
  EXPECT_NEAR((path[50].position - Vec3(1.1, 0.0, 0.5)).norm(), 0.0, 1e-9);
  EXPECT_NEAR((path[100].position - Vec3(1.1, 0.0, 0.8)).norm(), 0.0, 1e-9);
}

TEST(GoalAt, PureFunctionMatchesPrecomputedPath) {
  for (TrajectoryFamily fam : kBasicFamilies) {
    TrajectorySpec s = sample_spec(fam, 5, default_workspace());
    GoalPath path(s, 200);
    for (int k : {0, 1, 17, 99, 200}) {
      EXPECT_EQ(goal_at(s, k).position, path.at(k).position);
      EXPECT_EQ(goal_at(s, k).velocity, path.at(k).velocity);
    }
  }
}

// Speed, containment and determinism over full episodes for every family.
TEST(TrajectoryProperties, SpeedContainmentDeterminism) {
  Box ws = default_workspace();
  for (TrajectoryFamily fam : kBasicFamilies) {
    for (std::uint64_t seed = 100; seed < 200; ++seed) {
      TrajectorySpec s = sample_spec(fam, seed, ws);
      auto a = sample_path(s, 200);
      auto b = sample_path(sample_spec(fam, seed, ws), 200);
      const double step = s.speed * kDt;
      for (int k = 1; k <= 200; ++k) {
        ASSERT_EQ(a[k].position, b[k].position);
        double chord = (a[k].position - a[k - 1].position).norm();
        ASSERT_LE(chord, step + 1e-6);
        if (!a[k].reflected) {
          ASSERT_NEAR(chord, step, 1e-6)
              << family_name(fam) << " seed " << seed << " step " << k;
        }
        ASSERT_TRUE(s.bounds.contains(a[k].position, 1e-9))
            << family_name(fam) << " seed " << seed << " step " << k;
        ASSERT_TRUE(a[k].velocity.isApprox(
            (a[k].position - a[k - 1].position) / kDt));
      }
    }
  }
}

// Travel along the line axis on reflecting steps sums to speed*dt.
TEST(TrajectoryProperties, LineReflectionConservesPathLength) {
  int reflections = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (auto fam :
         {TrajectoryFamily::kHorizontalLine, TrajectoryFamily::kVerticalLine}) {
      TrajectorySpec s = sample_spec(fam, seed, default_workspace());
      // Independent slab intersection.
      double ulo = -1e300, uhi = 1e300;
      for (int i = 0; i < 3; ++i) {
        if (s.direction[i] == 0.0) continue;
        double t1 = (s.bounds.lo[i] - s.start[i]) / s.direction[i];
        double t2 = (s.bounds.hi[i] - s.start[i]) / s.direction[i];
        ulo = std::max(ulo, std::min(t1, t2));
        uhi = std::min(uhi, std::max(t1, t2));
      }
      auto path = sample_path(s, 200);
      for (int k = 1; k <= 200; ++k) {
        double u0 = (path[k - 1].position - s.start).dot(s.direction);
        double u1 = (path[k].position - s.start).dot(s.direction);
        // On-curve: the position stays on the line.
        Vec3 off = path[k].position - s.start - u1 * s.direction;
        ASSERT_LT(off.norm(), 1e-9);
        if (!path[k].reflected) continue;
        ++reflections;
        double via_hi = (uhi - u0) + (uhi - u1);
        double via_lo = (u0 - ulo) + (u1 - ulo);
        double expected = s.speed * kDt;
        ASSERT_TRUE(std::abs(via_hi - expected) < 1e-9 ||
                    std::abs(via_lo - expected) < 1e-9);
      }
    }
  }
  EXPECT_GT(reflections, 10);
}

TEST(TrajectoryProperties, SineReflectionConservesPathLength) {
  int reflections = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TrajectorySpec s = sample_spec(TrajectoryFamily::kSine, seed,
                                   default_workspace());
    auto point = [&](double u) {
      Vec3 p = s.start + u * s.direction;
      p.z() += s.amplitude * std::sin(2 * kPi * u / s.wavelength);
      return p;
    };
    double ulo = -1e300, uhi = 1e300;
    for (int i = 0; i < 2; ++i) {
      if (s.direction[i] == 0.0) continue;
      double t1 = (s.bounds.lo[i] - s.start[i]) / s.direction[i];
      double t2 = (s.bounds.hi[i] - s.start[i]) / s.direction[i];
      ulo = std::max(ulo, std::min(t1, t2));
      uhi = std::min(uhi, std::max(t1, t2));
    }
    auto path = sample_path(s, 200);
    for (int k = 1; k <= 200; ++k) {
      double u1 = (path[k].position - s.start).dot(s.direction);
      ASSERT_LT((point(u1) - path[k].position).norm(), 1e-9);
      if (!path[k].reflected) continue;
      ++reflections;
      double best = 1e300;
      for (double ub : {ulo, uhi}) {
        double len = (point(ub) - path[k - 1].position).norm() +
                     (path[k].position - point(ub)).norm();
        best = std::min(best, std::abs(len - s.speed * kDt));
      }
      ASSERT_LT(best, 1e-8);
    }
  }
  EXPECT_GT(reflections, 0);
}

TEST(TrajectoryProperties, HelixDecomposition) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TrajectorySpec s =
        sample_spec(TrajectoryFamily::kHelix, seed, default_workspace());
    Vec3 center = s.start + s.radius * s.direction;
    auto path = sample_path(s, 200);
    for (int k = 0; k <= 200; ++k) {
      Vec3 rel = path[k].position - center;
      ASSERT_NEAR(std::hypot(rel.x(), rel.y()), s.radius, 1e-9);
      if (k > 0 && !path[k].reflected) {
        ASSERT_NEAR(std::abs(path[k].position.z() - path[k - 1].position.z()),
                    s.vertical_speed * kDt, 1e-12);
      }
    }
  }
}

TEST(Composite, ContinuityDeterminismAndSpeedCap) {
  Box ws = default_workspace();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TrajectorySpec s = sample_composite(seed, ws);
    ASSERT_EQ(spec_to_text(s), spec_to_text(sample_composite(seed, ws)));
    ASSERT_GE(s.segments.size(), 3u);
    ASSERT_LE(s.segments.size(), 6u);
    const auto& last = s.segments.back();
    ASSERT_GE(last.start_step + last.steps, 200);
    for (std::size_t k = 0; k + 1 < s.segments.size(); ++k) {
      const auto& a = s.segments[k];
      const auto& b = s.segments[k + 1];
      ASSERT_EQ(b.start_step, a.start_step + a.steps);
      ASSERT_EQ((goal_at(a.spec, a.steps).position - b.spec.start).norm(), 0.0);
    }
    auto path = sample_path(s, 200);
    for (int k = 1; k <= 200; ++k) {
      ASSERT_LE((path[k].position - path[k - 1].position).norm(),
                0.30 * kDt + 1e-9);
      ASSERT_TRUE(ws.contains(path[k].position, 1e-9));
    }
    // Global evaluation agrees with the segment it falls in.
    const auto& seg = s.segments[1];
    int g = seg.start_step + seg.steps / 2;
    ASSERT_LT((path[g].position -
               goal_at(seg.spec, g - seg.start_step).position).norm(), 1e-12);
  }
}

TEST(Serialization, TextRoundTripReproducesPath) {
  for (TrajectoryFamily fam :
       {TrajectoryFamily::kSine, TrajectoryFamily::kHelix,
        TrajectoryFamily::kRandomComposite}) {
    TrajectorySpec s = sample_any(fam, 42, default_workspace());
    TrajectorySpec t = spec_from_text(spec_to_text(s));
    GoalPath a(s, 200), b(t, 200);
    for (int k = 0; k <= 200; ++k) EXPECT_EQ(a.at(k).position, b.at(k).position);
  }
}

TEST(Families, NamesRoundTrip) {
  for (int i = 0; i < 7; ++i) {
    auto fam = static_cast<TrajectoryFamily>(i);
    EXPECT_EQ(parse_family(family_name(fam)), fam);
  }
  EXPECT_FALSE(parse_family("zigzag").has_value());
}

}  // namespace
}  // namespace mmrl
