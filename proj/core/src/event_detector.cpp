#include <cmath>

#include <fmt/format.h>

#include "bhmm/error.hpp"
#include "bhmm/perception.hpp"

namespace bhmm {

void require_valid(const QuantizerConfig& c) {
  if (c.n_bins < 2 || c.n_bins % 2 != 0) {
    throw ValidationError(fmt::format("n_bins must be even and >= 2, got {}", c.n_bins));
  }
  if (!(c.trigger_angle > 0.0 && c.trigger_angle < 180.0)) {
    throw ValidationError("trigger_angle must lie in (0, 180) degrees");
  }
  if (!(c.settle_rate > 0.0)) throw ValidationError("settle_rate must be positive");
  if (c.settle_samples < 1) throw ValidationError("settle_samples must be >= 1");
  if (!(c.min_speed >= 0.0)) throw ValidationError("min_speed must be >= 0");
  if (!(c.max_heading_sigma > 0.0)) throw ValidationError("max_heading_sigma must be positive");
}

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

Symbol quantize_turn(double turn_deg, int n_bins) {
  const double width = 360.0 / n_bins;
  const double shifted = wrap_degrees(turn_deg) + 180.0 + width / 2.0;
  const auto bin = static_cast<int>(std::floor(shifted / width));
  return bin % n_bins;
}

double bin_center(Symbol symbol, int n_bins) { return -180.0 + symbol * (360.0 / n_bins); }

Symbol mirror_symbol(Symbol symbol, int n_bins) { return (n_bins - symbol) % n_bins; }

EventDetector::EventDetector(QuantizerConfig config) : config_(config) { require_valid(config_); }

std::optional<ObservationEvent> EventDetector::observe(const TrackState& track) {
  if (!std::isfinite(track.vx) || !std::isfinite(track.vy)) return std::nullopt;
  if (track.speed() < config_.min_speed || track.heading_sigma_deg() > config_.max_heading_sigma) {
    // Heading is meaningless near standstill; restart the stability count.
    has_previous_ = false;
    window_.clear();
    return std::nullopt;
  }

  const double raw = track.heading_deg();
  double heading = raw;
  if (has_previous_) {
    heading = previous_heading_ + wrap_degrees(raw - previous_heading_);
  } else if (has_reference_) {
    const double reference = reference_sum_ / reference_count_;
    heading = reference + wrap_degrees(raw - reference);
  }
  previous_heading_ = heading;
  has_previous_ = true;
  window_.push_back({track.last_time, heading});
  if (window_.size() > static_cast<std::size_t>(config_.settle_samples) + 1) {
    window_.erase(window_.begin());
  }
  if (window_.size() <= static_cast<std::size_t>(config_.settle_samples)) return std::nullopt;

  // Rate over the whole window; single-sample differences are dominated by noise.
  const double span = window_.back().first - window_.front().first;
  const double rate = std::abs(window_.back().second - window_.front().second) / span;
  if (!(rate < config_.settle_rate)) return std::nullopt;
  double settled_heading = 0.0;
  for (const auto& [t, h] : window_) settled_heading += h;
  settled_heading /= static_cast<double>(window_.size());

  if (!has_reference_) {
    has_reference_ = true;
    reference_sum_ = settled_heading;
    reference_count_ = 1;
    return std::nullopt;
  }

  const double reference = reference_sum_ / reference_count_;
  const double change = settled_heading - reference;
  if (std::abs(change) > config_.trigger_angle) {
    ObservationEvent event;
    event.timestamp = track.last_time;
    event.turn_angle = wrap_degrees(change);
    event.symbol = quantize_turn(event.turn_angle, config_.n_bins);
    reference_sum_ = settled_heading;
    reference_count_ = 1;
    return event;
  }
  // Still on the same leg: keep refining the reference with each settled sample.
  reference_sum_ += heading;
  reference_count_ += 1;
  return std::nullopt;
}

std::vector<ObservationEvent> extract_events(std::span<const PositionSample> positions,
                                             const KalmanNoise& noise,
                                             const QuantizerConfig& quantizer) {
  std::vector<ObservationEvent> events;
  if (positions.empty()) return events;
  EventDetector detector(quantizer);
  TrackState track = kf_init(positions.front().x, positions.front().y, positions.front().t);
  for (std::size_t i = 1; i < positions.size(); ++i) {
    const auto& p = positions[i];
    track = kf_update(track, p.x, p.y, p.t, noise);
    if (auto event = detector.observe(track)) events.push_back(*event);
  }
  return events;
}

ObservationSequence to_sequence(std::span<const ObservationEvent> events) {
  ObservationSequence seq;
  for (const auto& e : events) {
    seq.symbols.push_back(e.symbol);
    seq.timestamps.push_back(e.timestamp);
  }
  return seq;
}

}  // namespace bhmm
