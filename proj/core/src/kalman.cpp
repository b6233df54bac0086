#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "bhmm/error.hpp"
#include "bhmm/perception.hpp"

namespace bhmm {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

// Keeps S invertible when both noise terms are zero.
constexpr double kMinMeasurementVariance = 1e-12;

}  // namespace

double TrackState::speed() const { return std::hypot(vx, vy); }

double TrackState::heading_deg() const { return std::atan2(vy, vx) * kRadToDeg; }

double TrackState::heading_sigma_deg() const {
  const double s2 = vx * vx + vy * vy;
  if (!(s2 > 0.0)) return 180.0;
  // Velocity variance across the direction of travel, linearised.
  const double cross = vy * vy * covariance(2, 2) - 2.0 * vx * vy * covariance(2, 3) +
                       vx * vx * covariance(3, 3);
  return std::min(180.0, std::sqrt(std::max(cross, 0.0) / s2) / std::sqrt(s2) * kRadToDeg);
}

TrackState kf_init(double x, double y, double time) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(time)) {
    throw ValidationError("track initialised with a non-finite measurement");
  }
  TrackState track;
  track.x = x;
  track.y = y;
  track.last_time = time;
  return track;
}

TrackState kf_update(const TrackState& track, double x, double y, double time,
                     const KalmanNoise& noise) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(time)) {
    throw ValidationError("non-finite position measurement");
  }
  if (!(time > track.last_time)) {
    throw ValidationError(fmt::format("measurement time {} does not advance past {}", time,
                                      track.last_time));
  }
  const double dt = time - track.last_time;

  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;

  // Discretised white-noise acceleration.
  const double q = noise.accel_sigma * noise.accel_sigma;
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  const double dt4 = dt2 * dt2;
  Eigen::Matrix4d process = Eigen::Matrix4d::Zero();
  process(0, 0) = process(1, 1) = dt4 / 4.0 * q;
  process(0, 2) = process(2, 0) = dt3 / 2.0 * q;
  process(1, 3) = process(3, 1) = dt3 / 2.0 * q;
  process(2, 2) = process(3, 3) = dt2 * q;

  Eigen::Vector4d state(track.x, track.y, track.vx, track.vy);
  state = f * state;
  Eigen::Matrix4d p = f * track.covariance * f.transpose() + process;

  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const double r_var =
      std::max(noise.measurement_sigma * noise.measurement_sigma, kMinMeasurementVariance);
  const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * r_var;

  const Eigen::Vector2d innovation = Eigen::Vector2d(x, y) - h * state;
  const Eigen::Matrix2d s = h * p * h.transpose() + r;
  const Eigen::Matrix<double, 4, 2> gain = p * h.transpose() * s.inverse();
  state += gain * innovation;

  // Joseph form keeps P symmetric positive semidefinite.
  const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - gain * h;
  p = ikh * p * ikh.transpose() + gain * r * gain.transpose();
  p = 0.5 * (p + p.transpose());

  TrackState out;
  out.x = state(0);
  out.y = state(1);
  out.vx = state(2);
  out.vy = state(3);
  out.covariance = p;
  out.last_time = time;
  return out;
}

}  // namespace bhmm
