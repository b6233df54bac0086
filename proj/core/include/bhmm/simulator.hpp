#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bhmm/perception.hpp"

namespace bhmm {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

enum class Direction { kCounterClockwise, kClockwise };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view text);

/// A closed polygonal behavior at unit scale, traversed counter-clockwise.
/// A run starts part-way along the closing edge (last vertex -> first) and
/// ends back there, so it turns once at every vertex, in order.
struct BehaviorTemplate {
  std::string name;
  std::vector<Vec2> waypoints;
  std::vector<double> turn_events;  // deg, one per waypoint

  std::size_t t_nominal() const { return turn_events.size(); }
};

// Signed exterior angle (deg) at every vertex of a closed loop.
std::vector<double> exterior_turns(std::span<const Vec2> loop);

const std::vector<BehaviorTemplate>& behavior_templates();
std::vector<std::string> behavior_names();
// Throws ValidationError listing the valid names.
const BehaviorTemplate& find_template(std::string_view name);

struct RunConfig {
  std::uint64_t seed = 0;
  double scale = 1.0;
  double initial_heading = 0.0;  // rad
  Direction direction = Direction::kCounterClockwise;
  double speed = 0.2;             // m/s
  double turn_rate = 90.0;        // deg/s, in-place pivot rate
  double sample_rate = 30.0;      // Hz
  double position_noise_sigma = 0.05;  // m
  double detection_range = 7.5;   // m
  Vec2 observer_position{0.0, 0.0};
  Vec2 path_center{0.0, 0.0};     // template centroid lands here
  double start_fraction = 0.6;    // position along the closing edge
};

void require_valid(const RunConfig& config);

/// Fills scale ~ U[0.5, 1.5], initial_heading ~ U[0, 2 pi) and a fair
/// direction coin from `seed`; every other field is copied from `base`.
RunConfig draw_run_config(std::uint64_t seed, const RunConfig& base = {});

/// Concrete loop for one run: start point, every vertex, then the start again.
struct BehaviorPath {
  std::string behavior;
  std::vector<Vec2> points;
  std::vector<double> turn_events;  // deg, in traversal order
  double length = 0.0;
};

double polyline_length(std::span<const Vec2> points);

/// Scales, rotates and places the template; clockwise runs traverse the
/// mirror image, so every turn angle is negated in place.
BehaviorPath build_behavior_path(const BehaviorTemplate& tmpl, const RunConfig& config);

struct TruthSample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;   // rad
  double distance = 0.0;  // m travelled so far
};

struct TurnEvent {
  double time = 0.0;   // when the pivot at the vertex completes
  double angle = 0.0;  // deg
};

struct SimRun {
  std::string true_behavior;
  RunConfig config;
  std::vector<PositionSample> measurements;
  std::vector<TruthSample> truth;
  std::vector<TurnEvent> true_turn_events;
  double path_length = 0.0;

  // Ground-truth distance travelled at time t (linear between samples).
  double distance_at(double t) const;
};

/// Drives a pivot-turn waypoint follower (straight at `speed`, in-place turns
/// at `turn_rate`) along the path, samples it at `sample_rate`, adds
/// per-axis Gaussian noise and drops samples beyond detection_range.
SimRun simulate_run(const BehaviorPath& path, const RunConfig& config);

}  // namespace bhmm
