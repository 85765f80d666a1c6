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

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "qp_oracle.hpp"
#include "ssa_scenarios.hpp"

namespace crowdnav {
namespace {

RobotState MovingRobot(const Vec2& p, const Vec2& v, RobotModel model) {
  RobotState r;
  r.model = model;
  r.position = p;
  r.linear_speed = v.norm();
  r.heading = v.norm() > 0.0 ? Bearing(v) : 0.0;
  return r;
}

AgentEstimate KnownAgent(int id, const Vec2& p, const Vec2& v) {
  AgentEstimate a;
  a.agent_id = id;
  a.state << p.x(), p.y(), v.x(), v.y();
  a.covariance = Mat4::Zero();
  return a;
}

TEST(SafetyIndexTest, ApproachingIsUnsafe) {
  SafetyIndexParams p;
  p.d_min = 0.15;
  p.k_grad = 1.0;
  const RobotState r = MovingRobot(Vec2(0.2, 0.0), Vec2(-0.1, 0.0), RobotModel::kDoubleIntegrator);
  const SafetyIndexValue v = SafetyIndex(r, Vec2::Zero(), Vec2::Zero(), p);
  EXPECT_NEAR(v.d, 0.2, 1e-15);
  EXPECT_NEAR(v.d_dot, -0.1, 1e-15);
  EXPECT_NEAR(v.phi, 0.0825, 1e-15);
  const AgentEstimate a = KnownAgent(3, Vec2::Zero(), Vec2::Zero());
  const auto cs = EmitConstraints(r, std::span(&a, 1), p, ControlBounds(RobotModel::kDoubleIntegrator, {}));
  ASSERT_FALSE(cs.empty());
  EXPECT_EQ(cs[0].kind, SsaRowKind::kDecrease);
  EXPECT_EQ(cs[0].agent_id, 3);
  EXPECT_NEAR(cs[0].rhs, -0.5 * 0.0825, 1e-15);
}

TEST(SafetyIndexTest, SeparatingIsSafe) {
  SafetyIndexParams p;
  p.d_min = 0.15;
  p.k_grad = 1.0;
  const RobotState r = MovingRobot(Vec2(0.5, 0.0), Vec2(0.1, 0.0), RobotModel::kDoubleIntegrator);
  const SafetyIndexValue v = SafetyIndex(r, Vec2::Zero(), Vec2::Zero(), p);
  EXPECT_NEAR(v.phi, 0.0225 - 0.25 - 0.1, 1e-15);
  const AgentEstimate a = KnownAgent(3, Vec2::Zero(), Vec2::Zero());
  EXPECT_TRUE(EmitConstraints(r, std::span(&a, 1), p, ControlBounds(RobotModel::kDoubleIntegrator, {})).empty());
}

TEST(SafetyIndexTest, StaticReducesToDistanceTerm) {
  const SafetyIndexParams p;
  const RobotState r = MovingRobot(Vec2(0.03, 0.04), Vec2::Zero(), RobotModel::kDoubleIntegrator);
  const SafetyIndexValue v = SafetyIndex(r, Vec2::Zero(), Vec2::Zero(), p);
  EXPECT_DOUBLE_EQ(v.d_dot, 0.0);
  EXPECT_DOUBLE_EQ(v.phi, p.d_min * p.d_min - 0.0025);
}

TEST(SafetyIndexTest, ZeroThresholdEmitsAndContactIsReported) {
  SafetyIndexParams p;
  p.d_min = 0.5;
  const RobotState r = MovingRobot(Vec2(0.5, 0.0), Vec2::Zero(), RobotModel::kDoubleIntegrator);
  std::vector<AgentEstimate> as{KnownAgent(1, Vec2::Zero(), Vec2::Zero()),
                                KnownAgent(2, Vec2(0.5, 0.0), Vec2::Zero())};
  std::vector<int> contact;
  const auto cs = EmitConstraints(r, as, p, ControlBounds(RobotModel::kDoubleIntegrator, {}), &contact);
  ASSERT_FALSE(cs.empty());
  EXPECT_EQ(cs[0].kind, SsaRowKind::kDecrease);
  EXPECT_EQ(cs[0].phi, 0.0);
  for (const auto& c : cs) EXPECT_EQ(c.agent_id, 1);
  EXPECT_EQ(contact, std::vector<int>{2});
  EXPECT_THROW(SafetyIndex(r, Vec2(0.5, 0.0), Vec2::Zero(), p), Error);
  p.eta = 0.0;
  EXPECT_THROW(p.Validate(), Error);
}

void CheckLieDerivatives(RobotModel model) {
  const testing_scenarios::LieReport rep = testing_scenarios::CheckLieDerivatives(
      model, model == RobotModel::kDoubleIntegrator ? 11 : 12, 20);
  EXPECT_EQ(rep.violations, 0) << "worst relative error " << rep.worst_relative;
  EXPECT_GT(rep.checked, 500);
}

TEST(LieDerivativeTest, DoubleIntegratorMatchesFiniteDifference) {
  CheckLieDerivatives(RobotModel::kDoubleIntegrator);
}

TEST(LieDerivativeTest, UnicycleMatchesFiniteDifference) {
  CheckLieDerivatives(RobotModel::kSecondOrderUnicycle);
}

TEST(ReferenceControlTest, EquilibriumAndSymmetry) {
  const PdGains g;
  const ControlBox box = ControlBounds(RobotModel::kDoubleIntegrator, ControlLimits{});
  RobotState r;
  r.position = Vec2(0.1, 0.2);
  EXPECT_EQ(ReferenceControl(r, r.position, g, box), Vec2::Zero());
  const Vec2 east = ReferenceControl(r, r.position + Vec2(0.1, 0.0), g, box);
  EXPECT_GT(east.x(), 0.0);
  EXPECT_EQ(east.y(), 0.0);
  EXPECT_LE(east.x(), ControlLimits{}.u_max);
}

TEST(ReferenceControlTest, PdArithmetic) {
  PdGains g;
  g.kp = 0.3;
  g.kd = 0.7;
  const RobotState r = MovingRobot(Vec2::Zero(), Vec2(0.02, 0.0), RobotModel::kDoubleIntegrator);
  const Vec2 u = ReferenceControl(r, Vec2(0.1, 0.0), g, ControlBox{});
  EXPECT_NEAR(u.x(), 0.3 * 0.1 - 0.7 * 0.02, 1e-15);
  EXPECT_NEAR(u.y(), 0.0, 1e-15);
}

TEST(ReferenceControlTest, UnicycleTurnsTowardWaypoint) {
  const PdGains g;
  const ControlBox box = ControlBounds(RobotModel::kSecondOrderUnicycle, ControlLimits{});
  const RobotState r = MovingRobot(Vec2::Zero(), Vec2(0.01, 0.0), RobotModel::kSecondOrderUnicycle);
  const Vec2 u = ReferenceControl(r, Vec2(0.0, 0.1), g, box);
  EXPECT_GT(u.y(), 0.0);
  EXPECT_TRUE(box.Contains(u));
}

TEST(SafeControlTest, NoConstraintsPassesThrough) {
  const Vec2 u_ref(1e-3, -5e-4);
  const SafeControlResult r = SafeControl(u_ref, {}, ControlBounds(RobotModel::kDoubleIntegrator, {}));
  EXPECT_EQ(r.u, u_ref);
  EXPECT_EQ(r.telemetry.constraint_count, 0);
  EXPECT_FALSE(r.telemetry.fallback);
}

TEST(SafeControlTest, HalfspaceProjection) {
  const SsaConstraint c{1, 1.0, 0.0, Vec2(1.0, 0.0), -0.5};
  const SafeControlResult r = SafeControl(Vec2(1.0, 0.0), std::span(&c, 1), ControlBox{});
  EXPECT_NEAR(r.u.x(), -0.5, 1e-12);
  EXPECT_NEAR(r.u.y(), 0.0, 1e-12);
  EXPECT_NEAR(r.telemetry.correction, 1.5, 1e-12);
  EXPECT_EQ(r.telemetry.qp_status, QpStatus::kOptimal);
}

TEST(SafeControlTest, EmptyIntersectionFallsBack) {
  // u_x <= -1 and u_x >= 1 within |u| <= 2e-3.
  const std::vector<SsaConstraint> cs{{1, 0.1, 0.0, Vec2(1.0, 0.0), -1.0},
                                      {2, 0.1, 0.0, Vec2(-1.0, 0.0), -1.0}};
  const ControlBox box = ControlBounds(RobotModel::kDoubleIntegrator, {});
  const SafeControlResult r = SafeControl(Vec2(1e-3, 1e-3), cs, box);
  EXPECT_TRUE(r.telemetry.fallback);
  EXPECT_NE(r.telemetry.qp_status, QpStatus::kOptimal);
  EXPECT_TRUE(box.Contains(r.u));
  // Symmetric violations: the least-violating u_x is 0.
  EXPECT_NEAR(r.u.x(), 0.0, 1e-6);
}

TEST(SafeControlTest, NoOpWhenReferenceSatisfiesConstraints) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uu(-2e-3, 2e-3);
  const ControlBox box = ControlBounds(RobotModel::kDoubleIntegrator, {});
  int hits = 0;
  for (int t = 0; t < 5000; ++t) {
    const auto cs = testing_scenarios::RandomConstraints(rng, 1 + static_cast<int>(rng() % 3));
    const Vec2 u_ref(uu(rng), uu(rng));
    bool ok = true;
    for (const auto& c : cs) ok = ok && c.lf + c.lg.dot(u_ref) <= c.rhs;
    if (!ok) continue;
    ++hits;
    EXPECT_EQ(SafeControl(u_ref, cs, box).u, u_ref);
  }
  EXPECT_GT(hits, 100);
}

// Controls admitted by the speed rows are never rescaled by StepRobot, and
// u = 0 is always admitted.
TEST(SpeedRowsTest, AdmittedControlsKeepSpeed) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  const ControlLimits lim;
  const ControlBox box = ControlBounds(RobotModel::kDoubleIntegrator, lim);
  std::uniform_real_distribution<double> uu(-lim.u_max, lim.u_max);
  int admitted = 0;
  for (int t = 0; t < 20000; ++t) {
    const double speed = t % 4 == 0 ? lim.v_max : lim.v_max * unit(rng);
    const RobotState r =
        MovingRobot(Vec2::Zero(), speed * UnitFromAngle(angle(rng)), RobotModel::kDoubleIntegrator);
    const auto rows = SpeedRows(r, lim, 1.0, box);
    for (const auto& c : rows) {
      EXPECT_EQ(c.kind, SsaRowKind::kSpeed);
      EXPECT_LE(c.lf, c.rhs);
    }
    const Vec2 u(uu(rng), uu(rng));
    bool ok = true;
    for (const auto& c : rows) ok = ok && c.lf + c.lg.dot(u) <= c.rhs;
    if (!ok) continue;
    ++admitted;
    EXPECT_LE((r.velocity() + u).norm(), lim.v_max * (1.0 + 1e-12));
    const RobotState next = StepRobot(r, u, 1.0, lim);
    EXPECT_NEAR((next.velocity() - r.velocity() - u).norm(), 0.0, 1e-15);
  }
  EXPECT_GT(admitted, 1000);
}

TEST(SpeedRowsTest, UnicycleHasNone) {
  const ControlLimits lim;
  const RobotState r = MovingRobot(Vec2::Zero(), Vec2(lim.v_max, 0.0), RobotModel::kSecondOrderUnicycle);
  EXPECT_TRUE(SpeedRows(r, lim, 1.0, ControlBounds(r, lim, 1.0)).empty());
}

TEST(SafeControlTest, MatchesBruteForceAndKkt) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> uu(-4e-3, 4e-3);
  const ControlBox box = ControlBounds(RobotModel::kDoubleIntegrator, {});
  int solved = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto cs = testing_scenarios::RandomConstraints(rng, 1 + static_cast<int>(rng() % 4));
    const Vec2 u_ref(uu(rng), uu(rng));
    const QpProblem qp = SafeControlQp(u_ref, cs, box);
    const auto oracle = testing_oracle::EnumerateActiveSetsFull(qp);
    const SafeControlResult r = SafeControl(u_ref, cs, box);
    if (!oracle.feasible) {
      EXPECT_TRUE(r.telemetry.fallback);
      continue;
    }
    ASSERT_FALSE(r.telemetry.fallback);
    ++solved;
    EXPECT_LE((r.u - Vec2(oracle.u[0], oracle.u[1])).norm(), 1e-9);
    const QpSolution sol = SolveQp(qp);
    const KktResiduals k = ComputeKkt(qp, sol);
    EXPECT_LE(k.primal, 1e-8);
    EXPECT_LE(k.stationarity, 1e-8);
    EXPECT_LE(k.complementarity, 1e-8);
    EXPECT_LE(k.dual, 1e-8);
  }
  EXPECT_GT(solved, 1000);
}

// Only rollouts whose QP stays feasible at every step carry the guarantee.
int CheckInvariance(RobotModel model, double agent_speed) {
  testing_scenarios::InvarianceSetup setup;
  setup.agent_speed = agent_speed;
  int feasible = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const testing_scenarios::InvarianceReport rep =
        testing_scenarios::RunInvarianceRollout(seed, model, 2000, 1.0, setup);
    EXPECT_GT(rep.constrained_steps, 0);
    if (rep.fallbacks > 0) continue;
    ++feasible;
    EXPECT_EQ(rep.below_d_min, 0) << "seed " << seed << " min d " << rep.min_distance;
  }
  return feasible;
}

TEST(ForwardInvarianceTest, DoubleIntegratorMovingAgent) {
  EXPECT_GE(CheckInvariance(RobotModel::kDoubleIntegrator, 2e-3), 90);
}

TEST(ForwardInvarianceTest, UnicycleStaticAgent) {
  EXPECT_GE(CheckInvariance(RobotModel::kSecondOrderUnicycle, 0.0), 90);
}

// A forward-only robot cannot always escape a moving agent; the trials that
// stay feasible must still be safe.
TEST(ForwardInvarianceTest, UnicycleSlowAgent) {
  EXPECT_GT(CheckInvariance(RobotModel::kSecondOrderUnicycle, 5e-4), 0);
}

// On the phi = 0 boundary, closing head-on at any speed up to v_max, some
// admissible control satisfies the decrease row.
TEST(ForwardInvarianceTest, BoundaryIsControllableHeadOn) {
  const SafetyIndexParams p;
  const ControlLimits lim;
  for (int i = 1; i <= 100; ++i) {
    const double s = lim.v_max * i / 100.0;
    // Just inside the boundary so the row is emitted.
    const double d = std::sqrt(p.d_min * p.d_min + p.k_grad * s) * (1.0 - 1e-12);
    const RobotState r = MovingRobot(Vec2(d, 0.0), Vec2(-s, 0.0), RobotModel::kDoubleIntegrator);
    const AgentEstimate a = KnownAgent(0, Vec2::Zero(), Vec2::Zero());
    SafetyIndexParams lie = p;
    lie.step = 0.0;
    const ControlBox box = ControlBounds(RobotModel::kDoubleIntegrator, lim);
    const auto cs = EmitConstraints(r, std::span(&a, 1), lie, box);
    ASSERT_EQ(cs.size(), 1u);
    EXPECT_NEAR(cs[0].phi, 0.0, 1e-10);
    EXPECT_FALSE(SafeControl(Vec2::Zero(), cs, box).telemetry.fallback) << "speed " << s;
  }
}

// The rows are linear in u; the realized change differs by O(k |u|^2 dt^2 / d),
// so the rate is checked with a fine step.
TEST(DecreaseConditionTest, RealizedChangeTracksRate) {
  for (RobotModel model : {RobotModel::kDoubleIntegrator, RobotModel::kSecondOrderUnicycle}) {
    int checks = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const testing_scenarios::InvarianceReport rep =
          testing_scenarios::RunInvarianceRollout(seed, model, 4000, 0.05);
      checks += rep.decrease_checks;
      if (rep.decrease_checks == 0) continue;
      EXPECT_LE(rep.worst_decrease_excess, 1e-4) << "seed " << seed;
    }
    EXPECT_GT(checks, 0);
  }
}

}  // namespace
}  // namespace crowdnav
