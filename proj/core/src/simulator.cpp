#include "bhmm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "bhmm/error.hpp"

namespace bhmm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = 180.0 / kPi;

double heading_of(const Vec2& from, const Vec2& to) { return std::atan2(to.y - from.y, to.x - from.x); }

double distance(const Vec2& p, const Vec2& q) { return std::hypot(q.x - p.x, q.y - p.y); }

BehaviorTemplate make_template(std::string name, std::vector<Vec2> waypoints) {
  BehaviorTemplate t;
  t.name = std::move(name);
  t.turn_events = exterior_turns(waypoints);
  t.waypoints = std::move(waypoints);
  return t;
}

std::vector<BehaviorTemplate> build_templates() {
  const double h = std::sqrt(3.0) / 2.0;
  std::vector<Vec2> hexagon;
  for (int k = 0; k < 6; ++k) {
    const double ang = kPi / 3.0 * k;
    hexagon.push_back({std::cos(ang), std::sin(ang)});
  }
  std::vector<BehaviorTemplate> out;
  // Vertex order fixes which turn is observed first (see BehaviorTemplate).
  out.push_back(make_template("concave_box", {{2.0, 0.5}, {1.5, 0.5}, {1.5, 1.0}, {0.0, 1.0},
                                              {0.0, 0.0}, {2.0, 0.0}}));
  out.push_back(make_template("convex_box", std::move(hexagon)));
  out.push_back(make_template("hourglass", {{2.0, 0.0}, {0.0, 0.5}, {2.0, 0.5}, {0.0, 0.0}}));
  out.push_back(make_template("rectangle", {{0.0, 1.0}, {0.0, 0.0}, {2.0, 0.0}, {2.0, 1.0}}));
  out.push_back(make_template("trapezoid", {{0.5, 0.5}, {0.0, 0.0}, {2.0, 0.0}, {1.5, 0.5}}));
  out.push_back(make_template("triangle", {{1.5, 0.0}, {0.75, 1.5 * h}, {0.0, 0.0}}));
  return out;
}

}  // namespace

std::string_view to_string(Direction d) {
  return d == Direction::kClockwise ? "cw" : "ccw";
}

Direction parse_direction(std::string_view text) {
  if (text == "cw") return Direction::kClockwise;
  if (text == "ccw") return Direction::kCounterClockwise;
  throw ValidationError(fmt::format("unknown direction '{}', expected cw or ccw", text));
}

std::vector<double> exterior_turns(std::span<const Vec2> loop) {
  const std::size_t n = loop.size();
  std::vector<double> turns(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& prev = loop[(i + n - 1) % n];
    const Vec2& here = loop[i];
    const Vec2& next = loop[(i + 1) % n];
    turns[i] = wrap_degrees((heading_of(here, next) - heading_of(prev, here)) * kDeg);
  }
  return turns;
}

const std::vector<BehaviorTemplate>& behavior_templates() {
  static const std::vector<BehaviorTemplate> templates = build_templates();
  return templates;
}

std::vector<std::string> behavior_names() {
  std::vector<std::string> names;
  for (const auto& t : behavior_templates()) names.push_back(t.name);
  return names;
}

const BehaviorTemplate& find_template(std::string_view name) {
  for (const auto& t : behavior_templates()) {
    if (t.name == name) return t;
  }
  throw ValidationError(fmt::format("unknown behavior '{}'; valid behaviors: {}", name,
                                    fmt::join(behavior_names(), ", ")));
}

void require_valid(const RunConfig& c) {
  if (!(c.scale >= 0.5 && c.scale <= 1.5)) throw ValidationError("scale must lie in [0.5, 1.5]");
  if (!(c.sample_rate > 0.0)) throw ValidationError("sample_rate must be positive");
  if (!(c.speed > 0.0)) throw ValidationError("speed must be positive");
  if (!(c.turn_rate > 0.0)) throw ValidationError("turn_rate must be positive");
  if (!(c.position_noise_sigma >= 0.0)) throw ValidationError("noise sigma must be >= 0");
  if (!(c.detection_range > 0.0)) throw ValidationError("detection_range must be positive");
  if (!(c.start_fraction > 0.0 && c.start_fraction < 1.0)) {
    throw ValidationError("start_fraction must lie in (0, 1)");
  }
}

RunConfig draw_run_config(std::uint64_t seed, const RunConfig& base) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  std::uniform_real_distribution<double> heading(0.0, 2.0 * kPi);
  RunConfig c = base;
  c.seed = seed;
  c.scale = scale(rng);
  c.initial_heading = heading(rng);
  c.direction = (rng() & 1U) ? Direction::kClockwise : Direction::kCounterClockwise;
  return c;
}

double polyline_length(std::span<const Vec2> points) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += distance(points[i - 1], points[i]);
  return total;
}

BehaviorPath build_behavior_path(const BehaviorTemplate& tmpl, const RunConfig& config) {
  require_valid(config);
  const std::size_t n = tmpl.waypoints.size();
  if (n < 2) throw ValidationError(fmt::format("template '{}' needs >= 2 waypoints", tmpl.name));

  Vec2 centroid;
  for (const auto& p : tmpl.waypoints) {
    centroid.x += p.x / static_cast<double>(n);
    centroid.y += p.y / static_cast<double>(n);
  }
  const double mirror = config.direction == Direction::kClockwise ? -1.0 : 1.0;
  const double c = std::cos(config.initial_heading);
  const double s = std::sin(config.initial_heading);
  const auto place = [&](const Vec2& p) {
    const double x = (p.x - centroid.x) * config.scale;
    const double y = (p.y - centroid.y) * config.scale * mirror;
    return Vec2{config.path_center.x + c * x - s * y, config.path_center.y + s * x + c * y};
  };

  std::vector<Vec2> vertices;
  for (const auto& p : tmpl.waypoints) vertices.push_back(place(p));
  for (std::size_t i = 0; i < n; ++i) {
    if (distance(vertices[i], vertices[(i + 1) % n]) <= 0.0) {
      throw ValidationError(fmt::format("template '{}' repeats waypoint {}", tmpl.name, i));
    }
  }

  const Vec2& from = vertices.back();
  const Vec2& to = vertices.front();
  const double f = config.start_fraction;
  const Vec2 start{from.x + f * (to.x - from.x), from.y + f * (to.y - from.y)};

  BehaviorPath path;
  path.behavior = tmpl.name;
  path.points.push_back(start);
  path.points.insert(path.points.end(), vertices.begin(), vertices.end());
  path.points.push_back(start);
  path.turn_events = exterior_turns(vertices);
  path.length = polyline_length(path.points);
  return path;
}

double SimRun::distance_at(double t) const {
  if (truth.empty()) return 0.0;
  if (t <= truth.front().t) return truth.front().distance;
  if (t >= truth.back().t) return truth.back().distance;
  const auto it = std::lower_bound(truth.begin(), truth.end(), t,
                                   [](const TruthSample& s, double v) { return s.t < v; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  if (hi.t == t) return hi.distance;
  const double w = (t - lo.t) / (hi.t - lo.t);
  return lo.distance + w * (hi.distance - lo.distance);
}

namespace {

// Piecewise motion plan: alternating straight drives and in-place pivots.
struct Phase {
  double start_time = 0.0;
  double duration = 0.0;
  Vec2 from;
  Vec2 to;
  double heading_from = 0.0;  // rad
  double heading_delta = 0.0; // rad, nonzero for pivots
  double distance_before = 0.0;
  bool pivot = false;
};

TruthSample pose_at(const std::vector<Phase>& plan, double t) {
  auto it = std::upper_bound(plan.begin(), plan.end(), t,
                             [](double v, const Phase& p) { return v < p.start_time; });
  const Phase& ph = *(it == plan.begin() ? it : it - 1);
  const double w = ph.duration > 0.0 ? std::clamp((t - ph.start_time) / ph.duration, 0.0, 1.0) : 1.0;
  TruthSample s;
  s.t = t;
  if (ph.pivot) {
    s.x = ph.from.x;
    s.y = ph.from.y;
    s.heading = ph.heading_from + w * ph.heading_delta;
    s.distance = ph.distance_before;
  } else {
    s.x = ph.from.x + w * (ph.to.x - ph.from.x);
    s.y = ph.from.y + w * (ph.to.y - ph.from.y);
    s.heading = ph.heading_from;
    s.distance = ph.distance_before + w * distance(ph.from, ph.to);
  }
  s.heading = std::remainder(s.heading, 2.0 * kPi);
  return s;
}

}  // namespace

SimRun simulate_run(const BehaviorPath& path, const RunConfig& config) {
  require_valid(config);
  if (path.points.size() < 2 || !(path.length > 0.0)) {
    throw ValidationError("cannot simulate an empty path");
  }

  SimRun run;
  run.true_behavior = path.behavior;
  run.config = config;
  run.path_length = path.length;

  std::vector<Phase> plan;
  double time = 0.0;
  double travelled = 0.0;
  const double turn_rate = config.turn_rate / kDeg;
  for (std::size_t i = 0; i + 1 < path.points.size(); ++i) {
    const Vec2& a = path.points[i];
    const Vec2& b = path.points[i + 1];
    const double len = distance(a, b);
    if (len <= 0.0) continue;
    const double heading = heading_of(a, b);
    if (!plan.empty()) {
      const Phase& last = plan.back();
      const double delta = std::remainder(heading - last.heading_from, 2.0 * kPi);
      if (delta != 0.0) {
        Phase pivot;
        pivot.start_time = time;
        pivot.duration = std::abs(delta) / turn_rate;
        pivot.from = pivot.to = a;
        pivot.heading_from = last.heading_from;
        pivot.heading_delta = delta;
        pivot.distance_before = travelled;
        pivot.pivot = true;
        plan.push_back(pivot);
        time += pivot.duration;
        run.true_turn_events.push_back({time, delta * kDeg});
      }
    }
    Phase drive;
    drive.start_time = time;
    drive.duration = len / config.speed;
    drive.from = a;
    drive.to = b;
    drive.heading_from = heading;
    drive.distance_before = travelled;
    plan.push_back(drive);
    time += drive.duration;
    travelled += len;
  }
  const double end_time = time;

  const double dt = 1.0 / config.sample_rate;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t >= end_time) break;
    run.truth.push_back(pose_at(plan, t));
  }
  if (run.truth.empty() || run.truth.back().t < end_time) run.truth.push_back(pose_at(plan, end_time));

  std::mt19937_64 rng(config.seed ^ 0x6e6f697365ULL);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = config.position_noise_sigma;
  for (const auto& s : run.truth) {
    PositionSample m{s.t, s.x, s.y};
    if (sigma > 0.0) {
      m.x += sigma * noise(rng);
      m.y += sigma * noise(rng);
    }
    const double range = std::hypot(s.x - config.observer_position.x, s.y - config.observer_position.y);
    if (range <= config.detection_range) run.measurements.push_back(m);
  }
  return run;
}

}  // namespace bhmm
