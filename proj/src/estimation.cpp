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

#include "crowdnav/estimation.hpp"

#include <algorithm>

#include <Eigen/Dense>

namespace crowdnav {

Scan Sense(const WorldState& world, double noise_std, double sensing_range,
           Rng& rng) {
  if (!(noise_std >= 0.0)) throw InvalidArgument("noise_std must be >= 0");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Scan scan;
  scan.max_range = sensing_range;
  for (const AgentTruth& agent : world.agents) {
    const Vec2 rel = agent.position - world.robot.position;
    const double dist = rel.norm();
    if (dist > sensing_range) continue;
    double range = dist + noise_std * gauss(rng);
    range = std::clamp(range, 1e-9, sensing_range);
    scan.angles.push_back(Bearing(rel));
    scan.ranges.push_back(range);
    scan.agent_ids.push_back(agent.id);
  }
  return scan;
}

Vec2 ReturnPosition(const Scan& scan, std::size_t i, const Vec2& origin) {
  return origin + scan.ranges[i] * UnitFromAngle(scan.angles[i]);
}

Mat4 TransitionMatrix(double dt) {
  Mat4 f = Mat4::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

Mat4 ProcessNoise(double dt, double q) {
  const double a = 0.25 * dt * dt * dt * dt;
  const double b = 0.5 * dt * dt * dt;
  const double c = dt * dt;
  Mat4 m = Mat4::Zero();
  m(0, 0) = m(1, 1) = a;
  m(0, 2) = m(2, 0) = m(1, 3) = m(3, 1) = b;
  m(2, 2) = m(3, 3) = c;
  return q * m;
}

namespace {

Mat4 Symmetrize(const Mat4& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

AgentEstimate KalmanInit(int agent_id, const Vec2& measured_position,
                         std::int64_t tick, const KalmanParams& params) {
  AgentEstimate e;
  e.agent_id = agent_id;
  e.state << measured_position, 0.0, 0.0;
  const double r2 = params.measurement_std * params.measurement_std;
  e.covariance = Mat4::Zero();
  e.covariance.diagonal() << r2, r2, params.init_velocity_var,
      params.init_velocity_var;
  e.last_update_tick = tick;
  return e;
}

AgentEstimate KalmanPredict(const AgentEstimate& estimate, double dt,
                            const KalmanParams& params) {
  const Mat4 f = TransitionMatrix(dt);
  AgentEstimate out = estimate;
  out.state = f * estimate.state;
  out.covariance = Symmetrize(f * estimate.covariance * f.transpose() +
                              ProcessNoise(dt, params.process_noise));
  return out;
}

AgentEstimate KalmanUpdate(const AgentEstimate& estimate,
                           const Vec2& measured_position, double dt,
                           const KalmanParams& params) {
  AgentEstimate out = KalmanPredict(estimate, dt, params);
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const double r2 = params.measurement_std * params.measurement_std;
  const Mat2 r = r2 * Mat2::Identity();
  const Mat2 s = h * out.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 4, 2> gain =
      out.covariance * h.transpose() * s.inverse();
  const Vec2 innovation = measured_position - h * out.state;
  out.state += gain * innovation;
  const Mat4 ikh = Mat4::Identity() - gain * h;
  out.covariance = Symmetrize(ikh * out.covariance * ikh.transpose() +
                              gain * r * gain.transpose());
  out.missed = 0;
  return out;
}

AgentPrediction Predict(const AgentEstimate& estimate, int horizon, double dt,
                        const KalmanParams& params) {
  if (horizon < 1) throw InvalidArgument("prediction horizon must be >= 1");
  const Mat4 f = TransitionMatrix(dt);
  const Mat4 q = ProcessNoise(dt, params.process_noise);
  AgentPrediction p;
  p.agent_id = estimate.agent_id;
  p.horizon = horizon;
  p.velocity = estimate.velocity();
  p.positions.reserve(static_cast<std::size_t>(horizon) + 1);
  p.covariances.reserve(static_cast<std::size_t>(horizon) + 1);
  Mat4 sigma = estimate.covariance;
  for (int i = 0; i <= horizon; ++i) {
    if (i > 0) sigma = Symmetrize(f * sigma * f.transpose() + q);
    // Positions use the closed form rather than repeated addition so a
    // longer horizon reproduces a shorter one exactly.
    p.positions.push_back(estimate.position() + (i * dt) * estimate.velocity());
    p.covariances.push_back(sigma.topLeftCorner<2, 2>());
  }
  return p;
}

AgentPrediction FrozenPrediction(const AgentEstimate& estimate, int horizon) {
  if (horizon < 1) throw InvalidArgument("prediction horizon must be >= 1");
  AgentPrediction p;
  p.agent_id = estimate.agent_id;
  p.horizon = horizon;
  p.velocity = Vec2::Zero();
  const Mat2 cov = estimate.covariance.topLeftCorner<2, 2>();
  p.positions.assign(static_cast<std::size_t>(horizon) + 1,
                     estimate.position());
  p.covariances.assign(static_cast<std::size_t>(horizon) + 1, cov);
  return p;
}

void Tracker::Update(const Scan& scan, const Vec2& origin, std::int64_t tick) {
  const double dt =
      started_ ? static_cast<double>(std::max<std::int64_t>(tick - last_tick_, 0))
               : 0.0;
  started_ = true;
  last_tick_ = tick;

  std::map<int, Vec2> measured;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    measured.emplace(scan.agent_ids[i], ReturnPosition(scan, i, origin));
  }

  for (auto it = tracks_.begin(); it != tracks_.end();) {
    auto m = measured.find(it->first);
    if (m != measured.end()) {
      it->second = KalmanUpdate(it->second, m->second, dt, params_);
      it->second.last_update_tick = tick;
      measured.erase(m);
      ++it;
    } else {
      it->second = KalmanPredict(it->second, dt, params_);
      if (++it->second.missed >= params_.max_missed) {
        it = tracks_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (const auto& [id, pos] : measured) {
    tracks_.emplace(id, KalmanInit(id, pos, tick, params_));
  }
}

std::vector<AgentEstimate> Tracker::Estimates() const {
  std::vector<AgentEstimate> out;
  out.reserve(tracks_.size());
  for (const auto& [id, e] : tracks_) out.push_back(e);
  return out;
}

}  // namespace crowdnav
