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

// Per-step safe control. A reference control tracks the active trajectory;
// the safe set algorithm then projects it onto the controls that make the
// safety index phi = d_min^2 - d^2 - k d' decay at rate eta wherever phi >= 0.

#ifndef CROWDNAV_SSA_HPP_
#define CROWDNAV_SSA_HPP_

#include <span>
#include <vector>

#include "crowdnav/estimation.hpp"
#include "crowdnav/geometry.hpp"
#include "crowdnav/qp.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

struct SafetyIndexParams {
  double d_min = 0.07;  // agent radius + 0.02
  // Large enough that a head-on approach at v_max can still brake at u_max
  // on the phi = 0 boundary: 2 v sqrt(d_min^2 + k v) <= k u_max.
  double k_grad = 2.0;
  double eta = 0.5;
  // > 0: constraints bound the one-step change of phi under the sampled
  // dynamics, (phi(x+) - phi(x)) / dt, linearized in u. 0: Lie derivatives.
  double step = 1.0;
  /// Throws Error(kConfig) unless every field is positive.
  void Validate() const;
};

struct SafetyIndexValue {
  double phi = 0.0;
  double d = 0.0;
  double d_dot = 0.0;
  // phi' = lf + lg . u along the robot dynamics, agent velocity constant.
  double lf = 0.0;
  Vec2 lg = Vec2::Zero();
};

/// Throws NumericError when the robot sits on the agent centre.
SafetyIndexValue SafetyIndex(const RobotState& robot, const Vec2& agent_position,
                             const Vec2& agent_velocity, const SafetyIndexParams& params);

enum class SsaRowKind {
  kDecrease,       // phi >= 0: lf + lg u <= -eta phi
  kIndexGuard,     // phi < 0: phi(x+) <= 0
  kDistanceGuard,  // g^T r(x+) >= d_min, g the unit offset at u = 0
  kSpeed,          // double integrator: v + u dt stays where StepRobot keeps it
};

struct SsaConstraint {
  int agent_id = 0;
  double phi = 0.0;
  double lf = 0.0;
  Vec2 lg = Vec2::Zero();
  double rhs = 0.0;
  SsaRowKind kind = SsaRowKind::kDecrease;
};

/// phi at the current state with (lf, lg) replaced by the one-step secant
/// (phi(x+(0)) - phi(x)) / step and its gradient in u divided by step; x+ is
/// the semi-implicit Euler successor without saturation, the agent moving at
/// constant velocity. Tends to SafetyIndex as step -> 0.
SafetyIndexValue OneStepSafetyIndex(const RobotState& robot, const Vec2& agent_position,
                                    const Vec2& agent_velocity, const SafetyIndexParams& params);

/// Admissible control box. Infinite entries are unbounded.
struct ControlBox {
  Vec2 lo{-kInf, -kInf};
  Vec2 hi{kInf, kInf};
  bool Contains(const Vec2& u) const {
    return u.x() >= lo.x() && u.x() <= hi.x() && u.y() >= lo.y() && u.y() <= hi.y();
  }
  Vec2 Clamp(const Vec2& u) const { return u.cwiseMax(lo).cwiseMin(hi); }
};

/// One decrease row per agent with phi >= 0. With a positive step, guard
/// rows keep the sampled system inside the safe set: an agent with phi < 0
/// gets phi(x+) <= 0, and every agent gets the distance halfspace, each only
/// when some u in `bounds` could violate it. Agents exactly on the robot are
/// reported through `contact` (when non-null) and skipped.
std::vector<SsaConstraint> EmitConstraints(const RobotState& robot,
                                           std::span<const AgentEstimate> agents,
                                           const SafetyIndexParams& params,
                                           const ControlBox& bounds,
                                           std::vector<int>* contact = nullptr);

/// Double integrator only: rows keeping v + u dt inside the regular
/// `sides`-gon inscribed in the v_max disc with a vertex on the current
/// velocity, so the step is never rescaled and u = 0 stays admissible.
/// Rows no control in `bounds` can violate are dropped. agent_id is -1.
std::vector<SsaConstraint> SpeedRows(const RobotState& robot, const ControlLimits& limits,
                                     double dt, const ControlBox& bounds, int sides = 16);

/// (ax, ay) within +-u_max for the double integrator; (a, alpha) within
/// +-u_max and +-alpha_max for the unicycle.
ControlBox ControlBounds(RobotModel model, const ControlLimits& limits);

/// ControlBounds narrowed so the unicycle speed stays in [0, v_max] and the
/// turn rate in [-omega_max, omega_max] after a step of `dt`. Unchanged for
/// the double integrator.
ControlBox ControlBounds(const RobotState& robot, const ControlLimits& limits, double dt);

struct PdGains {
  double kp = 0.2;
  double kd = 0.6;
  // Unicycle heading loop.
  double k_heading = 0.3;
  double k_omega = 0.8;
};

/// PD law u = kp (waypoint - p) + kd (waypoint_velocity - v), mapped to the
/// model's control space and clamped to `bounds`.
Vec2 ReferenceControl(const RobotState& robot, const Vec2& waypoint, const PdGains& gains,
                      const ControlBox& bounds,
                      const Vec2& waypoint_velocity = Vec2::Zero());

struct SsaTelemetry {
  std::vector<double> phi;  // per emitted constraint
  int constraint_count = 0;
  QpStatus qp_status = QpStatus::kOptimal;
  bool fallback = false;
  double correction = 0.0;  // |u - u_ref|
};

struct SafeControlResult {
  Vec2 u = Vec2::Zero();
  SsaTelemetry telemetry;
};

/// argmin |u - u_ref|^2 subject to lf + lg u <= rhs for every constraint and
/// u in `bounds`. When that set is empty, a shared slack t >= 0 relaxes every
/// constraint and W t^2 + |u - u_ref|^2 is minimized instead.
SafeControlResult SafeControl(const Vec2& u_ref, std::span<const SsaConstraint> constraints,
                              const ControlBox& bounds);

/// The QP posed by SafeControl, exposed for verification.
QpProblem SafeControlQp(const Vec2& u_ref, std::span<const SsaConstraint> constraints,
                        const ControlBox& bounds);

}  // namespace crowdnav

#endif  // CROWDNAV_SSA_HPP_
