#include "mmrl/trajectory.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <random>
#include <sstream>

namespace mmrl {
namespace {

constexpr std::array<std::string_view, 7> kFamilyNames = {
    "horizontal_line", "vertical_line", "circle", "sine",
    "square",          "helix",         "random",
};

// Helix vertical speed is kept below this fraction of the total speed so the
// horizontal chord stays well defined.
constexpr double kHelixVerticalFraction = 0.7;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double uniform(Rng& rng, Interval iv) { return uniform(rng, iv.lo, iv.hi); }

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double random_sign(Rng& rng) { return uniform_int(rng, 0, 1) ? 1.0 : -1.0; }

// Parameter interval of the line p + u*d inside the box, considering only
// the axes where d is non-zero.
Interval line_interval(const Vec3& p, const Vec3& d, const Box& box) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) continue;
    double t1 = (box.lo[i] - p[i]) / d[i];
    double t2 = (box.hi[i] - p[i]) / d[i];
    lo = std::max(lo, std::min(t1, t2));
    hi = std::min(hi, std::max(t1, t2));
  }
  // Start can sit on a face; never let roundoff exclude u = 0.
  return {std::min(lo, 0.0), std::max(hi, 0.0)};
}

// Triangle-wave fold of an unfolded coordinate w >= 0 into [0, length].
double fold(double w, double length) {
  double m = std::fmod(w, 2.0 * length);
  return m <= length ? m : 2.0 * length - m;
}

Vec3 sine_point(const TrajectorySpec& s, double u) {
  Vec3 p = s.start + u * s.direction;
  p.z() += s.amplitude * std::sin(2.0 * kPi * u / s.wavelength);
  return p;
}

Vec3 sine_tangent(const TrajectorySpec& s, double u) {
  Vec3 t = s.direction;
  double k = 2.0 * kPi / s.wavelength;
  t.z() += s.amplitude * k * std::cos(k * u);
  return t;
}

// Solves |x(u + sign*delta) - x(u)| = chord for delta > 0 by Newton's
// method on the squared chord.
double sine_advance(const TrajectorySpec& s, double u, double sign,
                    double chord) {
  const Vec3 x0 = sine_point(s, u);
  double delta = chord / sine_tangent(s, u).norm();
  for (int it = 0; it < 60; ++it) {
    Vec3 diff = sine_point(s, u + sign * delta) - x0;
    double f = diff.squaredNorm() - chord * chord;
    if (std::abs(std::sqrt(diff.squaredNorm()) - chord) < 1e-14) break;
    double df = 2.0 * sign * diff.dot(sine_tangent(s, u + sign * delta));
    double next = delta - f / df;
    delta = next > 0.0 ? next : 0.5 * delta;
  }
  return delta;
}

// Incremental evaluator for one trajectory. Closed-form families are
// evaluated directly from the step counter; Sine integrates arc length.
class Stepper {
 public:
  Stepper(const TrajectorySpec& spec, double dt) : spec_(spec), dt_(dt) {
    if (spec_.family == TrajectoryFamily::kSine) {
      sine_range_ = line_interval(spec_.start, spec_.direction, spec_.bounds);
    } else if (spec_.family == TrajectoryFamily::kRandomComposite) {
      child_ = std::make_unique<Stepper>(spec_.segments.front().spec, dt_);
    }
    position_ = spec_.start;
  }

  const Vec3& position() const { return position_; }
  bool reflected() const { return reflected_; }

  void advance() {
    ++step_;
    reflected_ = false;
    switch (spec_.family) {
      case TrajectoryFamily::kSine:
        advance_sine();
        break;
      case TrajectoryFamily::kRandomComposite:
        advance_composite();
        break;
      default:
        position_ = closed_form(step_, &reflected_);
    }
  }

 private:
  Vec3 closed_form(int k, bool* reflected) const {
    const TrajectorySpec& s = spec_;
    const double travel = s.speed * dt_;
    switch (s.family) {
      case TrajectoryFamily::kHorizontalLine:
      case TrajectoryFamily::kVerticalLine: {
        Interval iv = line_interval(s.start, s.direction, s.bounds);
        double length = iv.width();
        if (length <= 0.0) return s.start;
        double w0 = -iv.lo;
        double w = w0 + k * travel;
        double wp = w0 + (k - 1) * travel;
        *reflected = std::floor(w / length) != std::floor(wp / length);
        return s.start + (iv.lo + fold(w, length)) * s.direction;
      }
      case TrajectoryFamily::kCircle: {
        Vec3 center = s.start + s.radius * s.direction;
        Vec3 rel = s.start - center;
        double phi0 = std::atan2(rel.z(), rel.x());
        double dtheta = 2.0 * std::asin(std::min(1.0, travel / (2.0 * s.radius)));
        double phi = phi0 + s.turn * k * dtheta;
        return {center.x() + s.radius * std::cos(phi), s.start.y(),
                center.z() + s.radius * std::sin(phi)};
      }
      case TrajectoryFamily::kHelix: {
        Vec3 center = s.start + s.radius * s.direction;
        Vec3 rel = s.start - center;
        double phi0 = std::atan2(rel.y(), rel.x());
        double vertical = s.vertical_speed * dt_;
        double chord = std::sqrt(std::max(0.0, travel * travel - vertical * vertical));
        double dtheta = 2.0 * std::asin(std::min(1.0, chord / (2.0 * s.radius)));
        double phi = phi0 + s.turn * k * dtheta;
        double zlen = s.bounds.hi.z() - s.bounds.lo.z();
        double z0 = s.start.z() - s.bounds.lo.z();
        double w0 = s.vertical_sign > 0 ? z0 : 2.0 * zlen - z0;
        double w = w0 + k * vertical;
        double wp = w0 + (k - 1) * vertical;
        *reflected = std::floor(w / zlen) != std::floor(wp / zlen);
        return {center.x() + s.radius * std::cos(phi),
                center.y() + s.radius * std::sin(phi),
                s.bounds.lo.z() + fold(w, zlen)};
      }
      case TrajectoryFamily::kSquare: {
        const double l = s.side_length;
        Vec3 normal = s.turn * Vec3::UnitY().cross(s.direction);
        std::array<Vec3, 4> corners = {
            s.start, s.start + l * s.direction,
            s.start + l * s.direction + l * normal, s.start + l * normal};
        std::array<Vec3, 4> edges = {s.direction, normal, -s.direction,
                                     -normal};
        double arc = k * travel;
        double edge_count = std::floor(arc / l);
        *reflected = edge_count != std::floor((k - 1) * travel / l);
        int edge = static_cast<int>(std::fmod(edge_count, 4.0));
        double local = arc - edge_count * l;
        return corners[edge] + local * edges[edge];
      }
      default:
        return s.start;
    }
  }

  void advance_sine() {
    double remaining = spec_.speed * dt_;
    const Interval iv = sine_range_;
    if (iv.width() <= 0.0) return;
    for (int guard = 0; guard < 64 && remaining > 0.0; ++guard) {
      double delta = sine_advance(spec_, u_, sign_, remaining);
      double next = u_ + sign_ * delta;
      if (next >= iv.lo && next <= iv.hi) {
        u_ = next;
        break;
      }
      double edge = sign_ > 0 ? iv.hi : iv.lo;
      remaining -= (sine_point(spec_, edge) - sine_point(spec_, u_)).norm();
      u_ = edge;
      sign_ = -sign_;
      reflected_ = true;
    }
    position_ = sine_point(spec_, u_);
  }

  void advance_composite() {
    const auto& segs = spec_.segments;
    const CompositeSegment& cur = segs[segment_];
    bool last = segment_ + 1 == segs.size();
    if (!last && step_ > cur.start_step + cur.steps) {
      ++segment_;
      child_ = std::make_unique<Stepper>(segs[segment_].spec, dt_);
    }
    child_->advance();
    position_ = child_->position();
    reflected_ = child_->reflected();
  }

  const TrajectorySpec& spec_;
  double dt_;
  int step_ = 0;
  Vec3 position_;
  bool reflected_ = false;
  // Sine state.
  Interval sine_range_;
  double u_ = 0.0;
  double sign_ = 1.0;
  // Composite state.
  std::size_t segment_ = 0;
  std::unique_ptr<Stepper> child_;
};

void require_extent(const Box& ws, int axis, double needed,
                    TrajectoryFamily family) {
  static constexpr char kAxis[] = {'x', 'y', 'z'};
  double have = ws.extent()[axis];
  if (have < needed) {
    std::ostringstream msg;
    msg << "workspace " << kAxis[axis] << " extent " << have << " m < "
        << needed << " m required by " << family_name(family);
    throw TrajectoryError(msg.str());
  }
}

void check_workspace(TrajectoryFamily family, const Box& ws,
                     const SamplingRanges& r) {
  for (int i = 0; i < 3; ++i) {
    if (!(ws.extent()[i] > 0.0)) require_extent(ws, i, 1e-9, family);
  }
  switch (family) {
    case TrajectoryFamily::kHorizontalLine:
      require_extent(ws, 0, r.min_travel, family);
      break;
    case TrajectoryFamily::kVerticalLine:
      require_extent(ws, 2, r.min_travel, family);
      break;
    case TrajectoryFamily::kCircle:
      require_extent(ws, 0, 2 * r.radius.lo, family);
      require_extent(ws, 2, 2 * r.radius.lo, family);
      break;
    case TrajectoryFamily::kSine:
      require_extent(ws, 0, r.min_travel, family);
      require_extent(ws, 2, 2 * r.amplitude.lo, family);
      break;
    case TrajectoryFamily::kSquare:
      require_extent(ws, 0, r.side_length.lo, family);
      require_extent(ws, 2, r.side_length.lo, family);
      break;
    case TrajectoryFamily::kHelix:
      require_extent(ws, 0, 2 * r.radius.lo, family);
      require_extent(ws, 1, 2 * r.radius.lo, family);
      require_extent(ws, 2, r.min_travel, family);
      break;
    case TrajectoryFamily::kRandomComposite:
      require_extent(ws, 0, r.min_travel, family);
      require_extent(ws, 2, r.min_travel, family);
      break;
  }
}

Vec3 uniform_point(Rng& rng, const Box& box) {
  return {uniform(rng, box.axis(0)), uniform(rng, box.axis(1)),
          uniform(rng, box.axis(2))};
}

constexpr int kMaxTries = 256;

// Samples a basic family. With `fixed_start`, the trajectory must begin at
// that point; returns nullopt when no admissible parameters were found.
std::optional<TrajectorySpec> try_sample(TrajectoryFamily family, Rng& rng,
                                         const Box& ws,
                                         const SamplingRanges& r,
                                         const Vec3* fixed_start) {
  TrajectorySpec s;
  s.family = family;
  s.bounds = ws;
  s.speed = uniform(rng, r.speed);
  const Vec3 ext = ws.extent();

  switch (family) {
    case TrajectoryFamily::kHorizontalLine: {
      for (int t = 0; t < kMaxTries; ++t) {
        s.start = fixed_start ? *fixed_start : uniform_point(rng, ws);
        double theta = uniform(rng, -kPi, kPi);
        s.direction = {std::cos(theta), std::sin(theta), 0.0};
        if (line_interval(s.start, s.direction, ws).width() >= r.min_travel)
          return s;
      }
      return std::nullopt;
    }
    case TrajectoryFamily::kVerticalLine: {
      s.start = fixed_start ? *fixed_start : uniform_point(rng, ws);
      s.direction = random_sign(rng) * Vec3::UnitZ();
      return s;
    }
    case TrajectoryFamily::kCircle: {
      double rmax = std::min({r.radius.hi, ext.x() / 2, ext.z() / 2});
      s.turn = random_sign(rng);
      for (int t = 0; t < kMaxTries; ++t) {
        s.radius = uniform(rng, r.radius.lo, rmax);
        double phi = uniform(rng, -kPi, kPi);
        Vec3 offset(std::cos(phi), 0.0, std::sin(phi));
        if (fixed_start) {
          Vec3 c = *fixed_start - s.radius * offset;
          if (c.x() < ws.lo.x() + s.radius || c.x() > ws.hi.x() - s.radius ||
              c.z() < ws.lo.z() + s.radius || c.z() > ws.hi.z() - s.radius)
            continue;
          s.start = *fixed_start;
        } else {
          Vec3 c(uniform(rng, ws.lo.x() + s.radius, ws.hi.x() - s.radius),
                 uniform(rng, ws.axis(1)),
                 uniform(rng, ws.lo.z() + s.radius, ws.hi.z() - s.radius));
          s.start = c + s.radius * offset;
          s.start = s.start.cwiseMax(ws.lo).cwiseMin(ws.hi);
        }
        s.direction = -offset;
        return s;
      }
      return std::nullopt;
    }
    case TrajectoryFamily::kSine: {
      s.wavelength = uniform(rng, r.wavelength);
      for (int t = 0; t < kMaxTries; ++t) {
        double amax = std::min(r.amplitude.hi, ext.z() / 2);
        if (fixed_start) {
          amax = std::min({amax, fixed_start->z() - ws.lo.z(),
                           ws.hi.z() - fixed_start->z()});
          if (amax < r.amplitude.lo) return std::nullopt;
        }
        s.amplitude = uniform(rng, r.amplitude.lo, amax);
        if (fixed_start) {
          s.start = *fixed_start;
        } else {
          s.start = uniform_point(rng, ws);
          s.start.z() = uniform(rng, ws.lo.z() + s.amplitude,
                                ws.hi.z() - s.amplitude);
        }
        double theta = uniform(rng, -kPi, kPi);
        s.direction = {std::cos(theta), std::sin(theta), 0.0};
        if (line_interval(s.start, s.direction, ws).width() >= r.min_travel)
          return s;
      }
      return std::nullopt;
    }
    case TrajectoryFamily::kSquare: {
      double lmax = std::min({r.side_length.hi, ext.x(), ext.z()});
      static const std::array<Vec3, 4> kEdges = {
          Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitZ(), -Vec3::UnitZ()};
      for (int t = 0; t < kMaxTries; ++t) {
        s.side_length = uniform(rng, r.side_length.lo, lmax);
        s.direction = kEdges[uniform_int(rng, 0, 3)];
        s.turn = random_sign(rng);
        Vec3 diag = s.side_length *
                    (s.direction + s.turn * Vec3::UnitY().cross(s.direction));
        // Admissible start corner box.
        Box corner{ws.lo - diag.cwiseMin(0.0), ws.hi - diag.cwiseMax(0.0)};
        if (fixed_start) {
          if (!corner.contains(*fixed_start, 1e-12)) continue;
          s.start = *fixed_start;
        } else {
          s.start = uniform_point(rng, corner);
        }
        return s;
      }
      return std::nullopt;
    }
    case TrajectoryFamily::kHelix: {
      double rmax = std::min({r.radius.hi, ext.x() / 2, ext.y() / 2});
      double vmax = std::min(r.vertical_speed.hi,
                             kHelixVerticalFraction * s.speed);
      s.vertical_speed = uniform(rng, std::min(r.vertical_speed.lo, vmax), vmax);
      s.vertical_sign = random_sign(rng);
      s.turn = random_sign(rng);
      for (int t = 0; t < kMaxTries; ++t) {
        s.radius = uniform(rng, r.radius.lo, rmax);
        double phi = uniform(rng, -kPi, kPi);
        Vec3 offset(std::cos(phi), std::sin(phi), 0.0);
        if (fixed_start) {
          Vec3 c = *fixed_start - s.radius * offset;
          if (c.x() < ws.lo.x() + s.radius || c.x() > ws.hi.x() - s.radius ||
              c.y() < ws.lo.y() + s.radius || c.y() > ws.hi.y() - s.radius)
            continue;
          s.start = *fixed_start;
        } else {
          Vec3 c(uniform(rng, ws.lo.x() + s.radius, ws.hi.x() - s.radius),
                 uniform(rng, ws.lo.y() + s.radius, ws.hi.y() - s.radius),
                 uniform(rng, ws.axis(2)));
          s.start = c + s.radius * offset;
          s.start = s.start.cwiseMax(ws.lo).cwiseMin(ws.hi);
        }
        s.direction = -offset;
        return s;
      }
      return std::nullopt;
    }
    case TrajectoryFamily::kRandomComposite:
      break;
  }
  return std::nullopt;
}

}  // namespace

std::string_view family_name(TrajectoryFamily family) {
  return kFamilyNames[static_cast<int>(family)];
}

std::optional<TrajectoryFamily> parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyNames.size(); ++i) {
    if (kFamilyNames[i] == name) return static_cast<TrajectoryFamily>(i);
  }
  return std::nullopt;
}

int family_index(TrajectoryFamily family) {
  return family == TrajectoryFamily::kRandomComposite
             ? -1
             : static_cast<int>(family);
}

TrajectorySpec sample_spec(TrajectoryFamily family, std::uint64_t rng_seed,
                           const Box& workspace,
                           const SamplingRanges& ranges) {
  if (family == TrajectoryFamily::kRandomComposite)
    return sample_composite(rng_seed, workspace, ranges);
  check_workspace(family, workspace, ranges);
  Rng rng(rng_seed);
  auto spec = try_sample(family, rng, workspace, ranges, nullptr);
  if (!spec) {
    throw TrajectoryError("could not sample " +
                          std::string(family_name(family)) +
                          " inside workspace");
  }
  spec->seed = rng_seed;
  return *spec;
}

TrajectorySpec sample_composite(std::uint64_t rng_seed, const Box& workspace,
                                const SamplingRanges& ranges, int min_steps) {
  check_workspace(TrajectoryFamily::kRandomComposite, workspace, ranges);
  Rng rng(rng_seed);
  TrajectorySpec out;
  out.family = TrajectoryFamily::kRandomComposite;
  out.bounds = workspace;
  out.seed = rng_seed;
  out.speed = 0.0;

  int count = uniform_int(rng, ranges.composite_min_segments,
                          ranges.composite_max_segments);
  int step = 0;
  Vec3 cursor = Vec3::Zero();
  for (int k = 0; k < count; ++k) {
    std::optional<TrajectorySpec> seg;
    for (int t = 0; t < 32 && !seg; ++t) {
      TrajectoryFamily fam = kBasicFamilies[uniform_int(rng, 0, 5)];
      if (k == 0) {
        try {
          check_workspace(fam, workspace, ranges);
        } catch (const TrajectoryError&) {
          continue;
        }
      }
      seg = try_sample(fam, rng, workspace, ranges, k == 0 ? nullptr : &cursor);
    }
    if (!seg) {
      // Vertical travel from any interior point always exists.
      seg = try_sample(TrajectoryFamily::kVerticalLine, rng, workspace, ranges,
                       k == 0 ? nullptr : &cursor);
    }
    seg->seed = derive_seed(rng_seed, static_cast<std::uint64_t>(k));
    int steps = uniform_int(rng, ranges.composite_min_steps,
                            ranges.composite_max_steps);
    if (k + 1 == count && step + steps < min_steps) steps = min_steps - step;
    out.segments.push_back({*seg, step, steps});
    out.speed = std::max(out.speed, seg->speed);
    // The next segment starts exactly where this one ends.
    cursor = goal_at(*seg, steps).position;
    step += steps;
  }
  out.start = out.segments.front().spec.start;
  out.direction = out.segments.front().spec.direction;
  return out;
}

TrajectorySpec sample_any(TrajectoryFamily family, std::uint64_t rng_seed,
                          const Box& workspace, const SamplingRanges& ranges) {
  return family == TrajectoryFamily::kRandomComposite
             ? sample_composite(rng_seed, workspace, ranges)
             : sample_spec(family, rng_seed, workspace, ranges);
}

GoalSample goal_at(const TrajectorySpec& spec, int step, double dt) {
  Stepper stepper(spec, dt);
  Vec3 prev = stepper.position();
  for (int k = 0; k < step; ++k) {
    prev = stepper.position();
    stepper.advance();
  }
  GoalSample g;
  g.position = stepper.position();
  if (step > 0) {
    g.velocity = (g.position - prev) / dt;
    g.reflected = stepper.reflected();
  }
  return g;
}

GoalPath::GoalPath(const TrajectorySpec& spec, int steps, double dt) {
  samples_.resize(steps + 1);
  Stepper stepper(spec, dt);
  samples_[0].position = stepper.position();
  for (int k = 1; k <= steps; ++k) {
    stepper.advance();
    GoalSample& g = samples_[k];
    g.position = stepper.position();
    g.velocity = (g.position - samples_[k - 1].position) / dt;
    g.reflected = stepper.reflected();
  }
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(const Vec3& v) {
  return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z());
}

void write_spec(std::ostringstream& out, const TrajectorySpec& s,
                const std::string& p) {
  out << p << "family = " << family_name(s.family) << "\n";
  out << p << "start = " << fmt(s.start) << "\n";
  out << p << "speed = " << fmt(s.speed) << "\n";
  out << p << "direction = " << fmt(s.direction) << "\n";
  out << p << "turn = " << fmt(s.turn) << "\n";
  out << p << "radius = " << fmt(s.radius) << "\n";
  out << p << "side_length = " << fmt(s.side_length) << "\n";
  out << p << "amplitude = " << fmt(s.amplitude) << "\n";
  out << p << "wavelength = " << fmt(s.wavelength) << "\n";
  out << p << "vertical_speed = " << fmt(s.vertical_speed) << "\n";
  out << p << "vertical_sign = " << fmt(s.vertical_sign) << "\n";
  out << p << "bounds_lo = " << fmt(s.bounds.lo) << "\n";
  out << p << "bounds_hi = " << fmt(s.bounds.hi) << "\n";
  out << p << "seed = " << s.seed << "\n";
  out << p << "segments = " << s.segments.size() << "\n";
  for (std::size_t i = 0; i < s.segments.size(); ++i) {
    std::string sp = p + "segment." + std::to_string(i) + ".";
    out << sp << "start_step = " << s.segments[i].start_step << "\n";
    out << sp << "steps = " << s.segments[i].steps << "\n";
    write_spec(out, s.segments[i].spec, sp);
  }
}

using KeyValues = std::map<std::string, std::string>;

const std::string& lookup(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw TrajectoryError("missing trajectory key " + key);
  return it->second;
}

double read_double(const KeyValues& kv, const std::string& key) {
  return std::stod(lookup(kv, key));
}

Vec3 read_vec3(const KeyValues& kv, const std::string& key) {
  std::istringstream in(lookup(kv, key));
  Vec3 v;
  if (!(in >> v.x() >> v.y() >> v.z()))
    throw TrajectoryError("malformed 3-vector for " + key);
  return v;
}

TrajectorySpec read_spec(const KeyValues& kv, const std::string& p) {
  TrajectorySpec s;
  auto fam = parse_family(lookup(kv, p + "family"));
  if (!fam) throw TrajectoryError("unknown family " + lookup(kv, p + "family"));
  s.family = *fam;
  s.start = read_vec3(kv, p + "start");
  s.speed = read_double(kv, p + "speed");
  s.direction = read_vec3(kv, p + "direction");
  s.turn = read_double(kv, p + "turn");
  s.radius = read_double(kv, p + "radius");
  s.side_length = read_double(kv, p + "side_length");
  s.amplitude = read_double(kv, p + "amplitude");
  s.wavelength = read_double(kv, p + "wavelength");
  s.vertical_speed = read_double(kv, p + "vertical_speed");
  s.vertical_sign = read_double(kv, p + "vertical_sign");
  s.bounds.lo = read_vec3(kv, p + "bounds_lo");
  s.bounds.hi = read_vec3(kv, p + "bounds_hi");
  s.seed = std::stoull(lookup(kv, p + "seed"));
  int n = std::stoi(lookup(kv, p + "segments"));
  for (int i = 0; i < n; ++i) {
    std::string sp = p + "segment." + std::to_string(i) + ".";
    CompositeSegment seg;
    seg.start_step = std::stoi(lookup(kv, sp + "start_step"));
    seg.steps = std::stoi(lookup(kv, sp + "steps"));
    seg.spec = read_spec(kv, sp);
    s.segments.push_back(std::move(seg));
  }
  return s;
}

}  // namespace

std::string spec_to_text(const TrajectorySpec& spec,
                         const std::string& prefix) {
  std::ostringstream out;
  write_spec(out, spec, prefix);
  return out.str();
}

TrajectorySpec spec_from_text(const std::string& text,
                              const std::string& prefix) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return read_spec(kv, prefix);
}

}  // namespace mmrl
