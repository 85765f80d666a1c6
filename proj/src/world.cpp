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

#include "crowdnav/world.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

namespace crowdnav {

Rng MakeRng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

void ScenarioConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(Error::Kind::kConfig, what);
  };
  if (n_agents < 0) fail("n_agents must be >= 0");
  if (!(world_size.x() > 0.0 && world_size.y() > 0.0)) {
    fail("world_size must be positive");
  }
  if (!(agent_radius > 0.0)) fail("agent_radius must be positive");
  if (!(agent_speed_lo >= 0.0 && agent_speed_lo <= agent_speed_hi)) {
    fail("agent speed range must satisfy 0 <= lo <= hi");
  }
  if (!(robot_speed_lo >= 0.0 && robot_speed_lo <= robot_speed_hi)) {
    fail("robot speed range must satisfy 0 <= lo <= hi");
  }
  if (!(robot_speed_hi > 0.0)) fail("robot max speed must be positive");
  if (!(measurement_noise_std >= 0.0)) fail("measurement noise must be >= 0");
  if (!(sensing_range > 0.0)) fail("sensing_range must be positive");
  if (step_budget < 1) fail("step_budget must be >= 1");
  if (!(goal_radius > 0.0)) fail("goal_radius must be positive");
  if (!(heading_noise_std >= 0.0)) fail("heading noise must be >= 0");
  if (!(spawn_clearance >= 0.0)) fail("spawn_clearance must be >= 0");
  const Box b = bounds();
  if (!b.Contains(robot_start)) fail("robot start outside the world");
  if (!b.Contains(goal)) fail("goal outside the world");
}

WorldState SpawnScenario(const ScenarioConfig& config) {
  config.Validate();
  Rng rng = MakeRng(config.rng_seed, /*stream=*/1);
  const Box box = config.bounds();
  std::uniform_real_distribution<double> ux(box.lo.x(), box.hi.x());
  std::uniform_real_distribution<double> uy(box.lo.y(), box.hi.y());
  std::uniform_real_distribution<double> uheading(0.0, kTwoPi);
  std::uniform_real_distribution<double> uspeed(config.agent_speed_lo,
                                                config.agent_speed_hi);

  WorldState world;
  world.bounds = box;
  world.robot.position = config.robot_start;
  world.robot.model = config.robot_model;
  world.robot.heading = WrapAngle(Bearing(config.goal - config.robot_start));
  world.agents.reserve(static_cast<std::size_t>(config.n_agents));
  for (int i = 0; i < config.n_agents; ++i) {
    Vec2 p;
    // Rejection sampling keeps the start area clear; bounded so a
    // pathological clearance cannot spin forever.
    for (int attempt = 0; attempt < 1000; ++attempt) {
      p = Vec2(ux(rng), uy(rng));
      if ((p - config.robot_start).norm() >= config.spawn_clearance) break;
    }
    const double heading = uheading(rng);
    const double speed = config.agent_speed_lo == config.agent_speed_hi
                             ? config.agent_speed_lo
                             : uspeed(rng);
    world.agents.push_back(
        AgentTruth{i, p, speed * UnitFromAngle(heading), config.agent_radius});
  }
  return world;
}

namespace {

void ApplyBoundary(const Box& box, BoundaryPolicy policy, Vec2& p, Vec2& v) {
  for (int axis = 0; axis < 2; ++axis) {
    const double lo = box.lo[axis];
    const double hi = box.hi[axis];
    if (policy == BoundaryPolicy::kReflect) {
      if (p[axis] > hi) {
        p[axis] = 2.0 * hi - p[axis];
        v[axis] = -v[axis];
      } else if (p[axis] < lo) {
        p[axis] = 2.0 * lo - p[axis];
        v[axis] = -v[axis];
      }
      p[axis] = std::clamp(p[axis], lo, hi);
    } else {
      const double span = hi - lo;
      p[axis] = lo + std::fmod(std::fmod(p[axis] - lo, span) + span, span);
    }
  }
}

}  // namespace

WorldState StepAgents(const WorldState& world, const AgentMotion& motion,
                      Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  WorldState next = world;
  next.tick = world.tick + 1;
  for (AgentTruth& agent : next.agents) {
    agent.position += agent.velocity;
    ApplyBoundary(next.bounds, motion.boundary, agent.position,
                  agent.velocity);
    // One draw per agent per step, even with zero noise, so the random
    // stream does not depend on the noise setting.
    const double turn = motion.heading_noise_std * gauss(rng);
    if (turn != 0.0) {
      const double c = std::cos(turn);
      const double s = std::sin(turn);
      const Vec2 v = agent.velocity;
      agent.velocity = Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
    }
  }
  return next;
}

RobotState StepRobot(const RobotState& state, const Vec2& control, double dt,
                     const ControlLimits& limits) {
  RobotState next = state;
  if (state.model == RobotModel::kDoubleIntegrator) {
    Vec2 v = state.velocity() + control * dt;
    const double speed = v.norm();
    if (speed > limits.v_max) v *= limits.v_max / speed;
    next.position = state.position + v * dt;
    next.linear_speed = std::min(v.norm(), limits.v_max);
    if (next.linear_speed > 0.0) next.heading = WrapAngle(Bearing(v));
    next.angular_speed = 0.0;
  } else {
    next.linear_speed =
        std::clamp(state.linear_speed + control.x() * dt, 0.0, limits.v_max);
    next.angular_speed =
        std::clamp(state.angular_speed + control.y() * dt, -limits.omega_max,
                   limits.omega_max);
    next.heading = WrapAngle(state.heading + next.angular_speed * dt);
    next.position = state.position +
                    next.linear_speed * UnitFromAngle(next.heading) * dt;
  }
  return next;
}

CollisionReport CheckCollision(const WorldState& world) {
  CollisionReport report;
  for (const AgentTruth& agent : world.agents) {
    if ((world.robot.position - agent.position).norm() < agent.radius) {
      report.agent_ids.push_back(agent.id);
    }
  }
  return report;
}

void WriteTraceHeader(std::ostream& out) { out << "tick,id,x,y,vx,vy\n"; }

void WriteTraceRows(std::ostream& out, const WorldState& world) {
  char line[160];
  const Vec2 rv = world.robot.velocity();
  std::snprintf(line, sizeof(line), "%lld,-1,%.17g,%.17g,%.17g,%.17g\n",
                static_cast<long long>(world.tick), world.robot.position.x(),
                world.robot.position.y(), rv.x(), rv.y());
  out << line;
  for (const AgentTruth& a : world.agents) {
    std::snprintf(line, sizeof(line), "%lld,%d,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(world.tick), a.id, a.position.x(),
                  a.position.y(), a.velocity.x(), a.velocity.y());
    out << line;
  }
}

}  // namespace crowdnav
