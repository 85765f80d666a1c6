/*
 * Copyright 2026 The crowdnav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Simulated 360 degree range sensing and constant-velocity Kalman tracking
// of the sensed agents.

#ifndef CROWDNAV_ESTIMATION_HPP_
#define CROWDNAV_ESTIMATION_HPP_

#include <cstdint>
#include <map>
#include <vector>

#include "crowdnav/geometry.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

/// One range return per sensed agent. Association is by simulation id.
struct Scan {
  std::vector<double> angles;
  std::vector<double> ranges;
  std::vector<int> agent_ids;
  double max_range = 0.2;

  std::size_t size() const { return ranges.size(); }
};

/// Agents within `sensing_range` of the robot return their true center
/// range plus N(0, noise_std^2), clamped to (0, sensing_range]. Bearings
/// are exact.
Scan Sense(const WorldState& world, double noise_std, double sensing_range,
           Rng& rng);

/// Position of return `i` in world coordinates.
Vec2 ReturnPosition(const Scan& scan, std::size_t i, const Vec2& origin);

struct KalmanParams {
  // White acceleration noise variance per axis, per step^2.
  double process_noise = 1e-6;
  double measurement_std = 0.01;
  // Prior velocity variance of a freshly seeded track.
  double init_velocity_var = 4e-4;
  // Tracks are dropped after this many ticks without a return.
  int max_missed = 3;
};

/// Kalman state z = [o_x, o_y, v_x, v_y] with covariance.
struct AgentEstimate {
  int agent_id = 0;
  Vec4 state = Vec4::Zero();
  Mat4 covariance = Mat4::Identity();
  std::int64_t last_update_tick = 0;
  int missed = 0;

  Vec2 position() const { return state.head<2>(); }
  Vec2 velocity() const { return state.tail<2>(); }
};

/// Constant-velocity transition for step `dt`.
Mat4 TransitionMatrix(double dt);
/// Discrete white-noise-acceleration covariance for step `dt`.
Mat4 ProcessNoise(double dt, double q);

/// Seeds a track at the measured position with zero velocity.
AgentEstimate KalmanInit(int agent_id, const Vec2& measured_position,
                         std::int64_t tick, const KalmanParams& params);

/// Time update only.
AgentEstimate KalmanPredict(const AgentEstimate& estimate, double dt,
                            const KalmanParams& params);

/// Predict over `dt`, then correct with a position measurement (Joseph
/// form, so the posterior stays symmetric positive semi-definite).
AgentEstimate KalmanUpdate(const AgentEstimate& estimate,
                           const Vec2& measured_position, double dt,
                           const KalmanParams& params);

/// Open-loop prediction over a horizon. Index i holds step i, with index 0
/// the current estimate, so positions.size() == horizon + 1.
struct AgentPrediction {
  int agent_id = 0;
  int horizon = 0;
  Vec2 velocity = Vec2::Zero();
  std::vector<Vec2> positions;
  std::vector<Mat2> covariances;

  const Vec2& position(int step) const {
    return positions[static_cast<std::size_t>(step)];
  }
  const Mat2& covariance(int step) const {
    return covariances[static_cast<std::size_t>(step)];
  }
};

/// o[i] = o[0] + i*dt*v and Sigma_i = F Sigma_{i-1} F^T + Q, keeping the
/// position block. Throws InvalidArgument for horizon < 1.
AgentPrediction Predict(const AgentEstimate& estimate, int horizon, double dt,
                        const KalmanParams& params);

/// Same as Predict, but every step holds the current position (the static
/// gap baseline).
AgentPrediction FrozenPrediction(const AgentEstimate& estimate, int horizon);

/// Owns the set of live tracks.
class Tracker {
 public:
  explicit Tracker(KalmanParams params = {}) : params_(params) {}

  /// Ingests the scan taken at `tick` from `origin`.
  void Update(const Scan& scan, const Vec2& origin, std::int64_t tick);

  std::vector<AgentEstimate> Estimates() const;
  const KalmanParams& params() const { return params_; }

 private:
  KalmanParams params_;
  std::map<int, AgentEstimate> tracks_;
  std::int64_t last_tick_ = 0;
  bool started_ = false;
};

}  // namespace crowdnav

#endif  // CROWDNAV_ESTIMATION_HPP_
