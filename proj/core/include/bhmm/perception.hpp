#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bhmm/hmm.hpp"

namespace bhmm {

struct PositionSample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// Constant-velocity track of the observed agent, state (x, y, vx, vy).
struct TrackState {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  double last_time = 0.0;

  double speed() const;
  double heading_deg() const;
  // 1-sigma heading uncertainty from the velocity covariance, capped at 180.
  double heading_sigma_deg() const;
};

struct KalmanNoise {
  double accel_sigma = 0.15;        // m/s^2, white acceleration
  double measurement_sigma = 0.05;  // m, per axis
};

/// Starts a track at the first measurement with zero velocity and unit covariance.
TrackState kf_init(double x, double y, double time);

/// Predicts forward to `time` and fuses the position measurement (x, y).
/// Throws ValidationError for non-increasing time or non-finite input.
TrackState kf_update(const TrackState& track, double x, double y, double time,
                     const KalmanNoise& noise = {});

struct QuantizerConfig {
  int n_bins = 8;
  double trigger_angle = 30.0;  // deg
  double settle_rate = 15.0;    // deg/s
  int settle_samples = 15;
  double min_speed = 0.05;  // m/s
  // Samples whose heading is less certain than this are skipped like slow ones.
  double max_heading_sigma = 12.0;  // deg
};

void require_valid(const QuantizerConfig& config);

struct ObservationEvent {
  double timestamp = 0.0;
  Symbol symbol = 0;
  double turn_angle = 0.0;  // deg, in (-180, 180]
};

// Wraps to (-180, 180].
double wrap_degrees(double deg);

// Bins are n_bins equal arcs centred on multiples of 360/n_bins, so a straight
// continuation and a reversal each sit in the middle of a bin. Bin k is centred
// at -180 + k * width; a boundary value belongs to the upper bin.
Symbol quantize_turn(double turn_deg, int n_bins);
double bin_center(Symbol symbol, int n_bins);
Symbol mirror_symbol(Symbol symbol, int n_bins);

/// Turns a stream of track estimates into discrete heading-change events.
///
/// The reference heading starts at the settled heading after the last emitted
/// event (or the first settled heading) and is averaged over the rest of that
/// leg. Once the agent has turned by more than
/// trigger_angle relative to it and the heading rate stays under settle_rate
/// over a window of settle_samples + 1 samples, a single event carrying the whole
/// signed change is emitted. Settled headings are averaged over those
/// samples. Samples slower than min_speed are ignored.
class EventDetector {
 public:
  explicit EventDetector(QuantizerConfig config = {});

  std::optional<ObservationEvent> observe(const TrackState& track);

  const QuantizerConfig& config() const { return config_; }

 private:
  QuantizerConfig config_;
  bool has_previous_ = false;
  bool has_reference_ = false;
  double previous_heading_ = 0.0;  // unwrapped, deg
  double reference_sum_ = 0.0;  // unwrapped, deg; mean over the current leg
  int reference_count_ = 0;
  std::vector<std::pair<double, double>> window_;  // (time, unwrapped heading)
};

/// Full perception chain: Kalman filter over the position stream, then event
/// detection on the filtered velocity.
std::vector<ObservationEvent> extract_events(std::span<const PositionSample> positions,
                                             const KalmanNoise& noise = {},
                                             const QuantizerConfig& quantizer = {});

ObservationSequence to_sequence(std::span<const ObservationEvent> events);

}  // namespace bhmm
