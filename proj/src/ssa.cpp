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

#include "crowdnav/ssa.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace crowdnav {

namespace {
constexpr double kSlackWeight = 1e6;
}  // namespace

void SafetyIndexParams::Validate() const {
  if (!(d_min > 0.0) || !(k_grad > 0.0) || !(eta > 0.0) || !(step >= 0.0)) {
    throw Error(Error::Kind::kConfig, "safety index parameters must be positive");
  }
}

SafetyIndexValue SafetyIndex(const RobotState& robot, const Vec2& agent_position,
                             const Vec2& agent_velocity, const SafetyIndexParams& params) {
  const Vec2 r = robot.position - agent_position;
  const Vec2 rv = robot.velocity() - agent_velocity;
  const double d = r.norm();
  if (!(d > 0.0)) throw NumericError("SafetyIndex: robot on agent centre");
  SafetyIndexValue out;
  out.d = d;
  out.d_dot = r.dot(rv) / d;
  const double k = params.k_grad;
  out.phi = params.d_min * params.d_min - d * d - k * out.d_dot;
  // d'' = (|rv|^2 + r . a - d'^2) / d with a the robot acceleration.
  const double drift = rv.squaredNorm() - out.d_dot * out.d_dot;
  out.lf = -2.0 * r.dot(rv) - k * drift / d;
  if (robot.model == RobotModel::kDoubleIntegrator) {
    out.lg = -k * r / d;
  } else {
    // a = u_lin h + v omega h_perp; angular acceleration does not reach d''.
    const Vec2 h = UnitFromAngle(robot.heading);
    out.lf -= k * robot.linear_speed * robot.angular_speed * r.dot(Perp(h)) / d;
    out.lg = Vec2(-k * r.dot(h) / d, 0.0);
  }
  return out;
}

namespace {

struct Relative {
  Vec2 r;
  Vec2 rv;
};

double PhiOf(const Relative& s, const SafetyIndexParams& p) {
  const double d = s.r.norm();
  return p.d_min * p.d_min - d * d - p.k_grad * s.r.dot(s.rv) / d;
}

}  // namespace

namespace {

// Successor relative state at u = 0 and its sensitivity to each control
// axis, under the unsaturated semi-implicit Euler step.
struct Successor {
  Relative next;
  Vec2 dr[2];
  Vec2 drv[2];
};

Successor Propagate(const RobotState& robot, const Vec2& agent_position,
                    const Vec2& agent_velocity, double h) {
  Successor s;
  if (robot.model == RobotModel::kDoubleIntegrator) {
    const Vec2 v = robot.velocity();
    s.next.r = robot.position + v * h - (agent_position + agent_velocity * h);
    s.next.rv = v - agent_velocity;
    for (int a = 0; a < 2; ++a) {
      s.dr[a] = Vec2::Unit(a) * h * h;
      s.drv[a] = Vec2::Unit(a) * h;
    }
  } else {
    const double theta = robot.heading + robot.angular_speed * h;
    const Vec2 hd = UnitFromAngle(theta);
    const Vec2 hp = Perp(hd);
    const double v = robot.linear_speed;
    s.next.r = robot.position + v * hd * h - (agent_position + agent_velocity * h);
    s.next.rv = v * hd - agent_velocity;
    s.dr[0] = hd * h * h;
    s.drv[0] = hd * h;
    // alpha turns the heading by alpha h^2 before the position update.
    s.dr[1] = v * hp * h * h * h;
    s.drv[1] = v * hp * h * h;
  }
  return s;
}

// Absorbs the QP feasibility tolerance so d(x+) >= d_min holds in floating point.
constexpr double kDistanceMargin = 1e-9;

double MaxOverBox(const Vec2& g, const ControlBox& box) {
  double best = 0.0;
  for (int a = 0; a < 2; ++a) best += std::max(g[a] * box.lo[a], g[a] * box.hi[a]);
  return best;
}

}  // namespace

SafetyIndexValue OneStepSafetyIndex(const RobotState& robot, const Vec2& agent_position,
                                    const Vec2& agent_velocity, const SafetyIndexParams& params) {
  SafetyIndexValue out = SafetyIndex(robot, agent_position, agent_velocity, params);
  const double h = params.step;
  if (!(h > 0.0)) return out;
  const Successor s = Propagate(robot, agent_position, agent_velocity, h);
  const double d = s.next.r.norm();
  if (!(d > 0.0)) throw NumericError("OneStepSafetyIndex: successor on agent centre");
  const double k = params.k_grad;
  const double rdot = s.next.r.dot(s.next.rv);
  const Vec2 grad_r = -2.0 * s.next.r - k * (s.next.rv / d - rdot * s.next.r / (d * d * d));
  const Vec2 grad_rv = -k * s.next.r / d;
  out.lf = (PhiOf(s.next, params) - out.phi) / h;
  for (int a = 0; a < 2; ++a) out.lg[a] = (grad_r.dot(s.dr[a]) + grad_rv.dot(s.drv[a])) / h;
  return out;
}

std::vector<SsaConstraint> EmitConstraints(const RobotState& robot,
                                           std::span<const AgentEstimate> agents,
                                           const SafetyIndexParams& params,
                                           const ControlBox& bounds,
                                           std::vector<int>* contact) {
  std::vector<SsaConstraint> out;
  const double h = params.step;
  for (const AgentEstimate& a : agents) {
    if ((robot.position - a.position()).norm() == 0.0) {
      if (contact) contact->push_back(a.agent_id);
      continue;
    }
    const SafetyIndexValue v = OneStepSafetyIndex(robot, a.position(), a.velocity(), params);
    if (v.phi >= 0.0) {
      out.push_back({a.agent_id, v.phi, v.lf, v.lg, -params.eta * v.phi, SsaRowKind::kDecrease});
    }
    if (!(h > 0.0)) continue;
    if (v.phi < 0.0 && v.phi + h * (v.lf + MaxOverBox(v.lg, bounds)) >= 0.0) {
      out.push_back({a.agent_id, v.phi, v.lf, v.lg, -v.phi / h, SsaRowKind::kIndexGuard});
    }
    // -g^T dr u <= g^T r+(0) - d_min, scaled by 1 / h like the other rows.
    const Successor s = Propagate(robot, a.position(), a.velocity(), h);
    const double d_next = s.next.r.norm();
    if (!(d_next > 0.0)) continue;
    const Vec2 g = s.next.r / d_next;
    const Vec2 lg(-g.dot(s.dr[0]) / h, -g.dot(s.dr[1]) / h);
    double margin = kDistanceMargin;
    if (robot.model == RobotModel::kSecondOrderUnicycle) {
      // The heading turns by delta = alpha h^2; |h(t + delta) - h(t) - delta h'(t)| <= delta^2 / 2
      // and the acceleration column moves with the heading by at most |a| h^2 delta.
      const double delta = std::max(std::abs(bounds.lo.y()), std::abs(bounds.hi.y())) * h * h;
      const double a = std::max(std::abs(bounds.lo.x()), std::abs(bounds.hi.x()));
      const double bound = (robot.linear_speed + a * h) * h * 0.5 * delta * delta + a * h * h * delta;
      if (std::isfinite(bound)) margin += bound;
    }
    const double rhs = (d_next - params.d_min - margin) / h;
    if (MaxOverBox(lg, bounds) > rhs) {
      out.push_back({a.agent_id, v.phi, 0.0, lg, rhs, SsaRowKind::kDistanceGuard});
    }
  }
  return out;
}

std::vector<SsaConstraint> SpeedRows(const RobotState& robot, const ControlLimits& limits,
                                     double dt, const ControlBox& bounds, int sides) {
  std::vector<SsaConstraint> out;
  if (robot.model != RobotModel::kDoubleIntegrator || !(dt > 0.0)) return out;
  if (sides < 3) throw InvalidArgument("SpeedRows: sides must be >= 3");
  const Vec2 v = robot.velocity();
  const double base = v.norm() > 0.0 ? Bearing(v) : 0.0;
  const double half = kPi / sides;
  const double apothem = limits.v_max * std::cos(half);
  for (int i = 0; i < sides; ++i) {
    // Face normals sit between vertices; vertex 0 is on the velocity.
    const Vec2 n = UnitFromAngle(base + (2 * i + 1) * half);
    const Vec2 lg = dt * n;
    // >= 0 exactly: v lies on the segment from the origin to vertex 0.
    const double rhs = std::max(0.0, apothem - n.dot(v));
    if (MaxOverBox(lg, bounds) > rhs) out.push_back({-1, 0.0, 0.0, lg, rhs, SsaRowKind::kSpeed});
  }
  return out;
}

ControlBox ControlBounds(RobotModel model, const ControlLimits& limits) {
  ControlBox box;
  if (model == RobotModel::kDoubleIntegrator) {
    box.lo = Vec2(-limits.u_max, -limits.u_max);
    box.hi = Vec2(limits.u_max, limits.u_max);
  } else {
    box.lo = Vec2(-limits.u_max, -limits.alpha_max);
    box.hi = Vec2(limits.u_max, limits.alpha_max);
  }
  return box;
}

ControlBox ControlBounds(const RobotState& robot, const ControlLimits& limits, double dt) {
  ControlBox box = ControlBounds(robot.model, limits);
  if (robot.model == RobotModel::kSecondOrderUnicycle && dt > 0.0) {
    box.lo.x() = std::min(0.0, std::max(box.lo.x(), -robot.linear_speed / dt));
    box.hi.x() = std::max(0.0, std::min(box.hi.x(), (limits.v_max - robot.linear_speed) / dt));
    box.lo.y() = std::min(0.0, std::max(box.lo.y(), (-limits.omega_max - robot.angular_speed) / dt));
    box.hi.y() = std::max(0.0, std::min(box.hi.y(), (limits.omega_max - robot.angular_speed) / dt));
  }
  return box;
}

Vec2 ReferenceControl(const RobotState& robot, const Vec2& waypoint, const PdGains& gains,
                      const ControlBox& bounds, const Vec2& waypoint_velocity) {
  const Vec2 acc = gains.kp * (waypoint - robot.position) +
                   gains.kd * (waypoint_velocity - robot.velocity());
  if (robot.model == RobotModel::kDoubleIntegrator) return bounds.Clamp(acc);
  const Vec2 h = UnitFromAngle(robot.heading);
  const Vec2 aim = waypoint - robot.position;
  // Hold heading when the error vanishes.
  const double heading_error =
      aim.norm() > 1e-12 ? WrapAngle(Bearing(aim) - robot.heading) : 0.0;
  const double alpha = gains.k_heading * heading_error - gains.k_omega * robot.angular_speed;
  return bounds.Clamp(Vec2(acc.dot(h), alpha));
}

QpProblem SafeControlQp(const Vec2& u_ref, std::span<const SsaConstraint> constraints,
                        const ControlBox& bounds) {
  QpProblem qp = QpProblem::Unconstrained(2.0 * Eigen::Matrix2d::Identity(), -2.0 * u_ref);
  const int m = static_cast<int>(constraints.size());
  qp.A.resize(m, 2);
  qp.b.resize(m);
  for (int i = 0; i < m; ++i) {
    qp.A.row(i) = constraints[i].lg.transpose();
    qp.b[i] = constraints[i].rhs - constraints[i].lf;
  }
  qp.lo = bounds.lo;
  qp.hi = bounds.hi;
  return qp;
}

namespace {

bool Satisfies(const Vec2& u, std::span<const SsaConstraint> constraints,
               const ControlBox& bounds) {
  if (!bounds.Contains(u)) return false;
  for (const SsaConstraint& c : constraints) {
    if (c.lf + c.lg.dot(u) > c.rhs) return false;
  }
  return true;
}

// Variables (ux, uy, t); every safety row is relaxed by the same t >= 0.
Vec2 LeastViolating(const Vec2& u_ref, std::span<const SsaConstraint> constraints,
                    const ControlBox& bounds) {
  Eigen::Matrix3d h = 2.0 * Eigen::Matrix3d::Identity();
  h(2, 2) = 2.0 * kSlackWeight;
  Eigen::Vector3d f(-2.0 * u_ref.x(), -2.0 * u_ref.y(), 0.0);
  QpProblem qp = QpProblem::Unconstrained(h, f);
  const int m = static_cast<int>(constraints.size());
  qp.A = Eigen::MatrixXd::Zero(m, 3);
  qp.b.resize(m);
  for (int i = 0; i < m; ++i) {
    qp.A(i, 0) = constraints[i].lg.x();
    qp.A(i, 1) = constraints[i].lg.y();
    qp.A(i, 2) = -1.0;
    qp.b[i] = constraints[i].rhs - constraints[i].lf;
  }
  qp.lo = Eigen::Vector3d(bounds.lo.x(), bounds.lo.y(), 0.0);
  qp.hi = Eigen::Vector3d(bounds.hi.x(), bounds.hi.y(), kInf);
  const QpSolution sol = SolveQp(qp);
  if (sol.status != QpStatus::kOptimal) return bounds.Clamp(u_ref);
  return Vec2(sol.u[0], sol.u[1]);
}

}  // namespace

SafeControlResult SafeControl(const Vec2& u_ref, std::span<const SsaConstraint> constraints,
                              const ControlBox& bounds) {
  SafeControlResult out;
  out.telemetry.constraint_count = static_cast<int>(constraints.size());
  for (const SsaConstraint& c : constraints) out.telemetry.phi.push_back(c.phi);
  if (Satisfies(u_ref, constraints, bounds)) {
    out.u = u_ref;
    return out;
  }
  const QpSolution sol = SolveQp(SafeControlQp(u_ref, constraints, bounds));
  out.telemetry.qp_status = sol.status;
  if (sol.status == QpStatus::kOptimal) {
    out.u = Vec2(sol.u[0], sol.u[1]);
  } else {
    out.telemetry.fallback = true;
    out.u = LeastViolating(u_ref, constraints, bounds);
  }
  out.telemetry.correction = (out.u - u_ref).norm();
  return out;
}

}  // namespace crowdnav
