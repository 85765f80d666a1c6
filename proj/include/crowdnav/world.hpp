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

// Ground-truth simulation of the benchmark world: randomly walking disc
// agents in an axis-aligned box and a robot with second-order dynamics.
// Velocities are expressed per simulation step.

#ifndef CROWDNAV_WORLD_HPP_
#define CROWDNAV_WORLD_HPP_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "crowdnav/geometry.hpp"

namespace crowdnav {

using Rng = std::mt19937_64;

/// Builds an independent generator for `stream` derived from `seed`.
Rng MakeRng(std::uint64_t seed, std::uint64_t stream);

enum class RobotModel { kSecondOrderUnicycle, kDoubleIntegrator };
enum class BoundaryPolicy { kReflect, kWrap };

struct AgentTruth {
  int id = 0;
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double radius = 0.05;
};

struct RobotState {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;       // (-pi, pi]
  double linear_speed = 0.0;  // [0, v_max]
  double angular_speed = 0.0;
  RobotModel model = RobotModel::kDoubleIntegrator;

  Vec2 velocity() const { return linear_speed * UnitFromAngle(heading); }
};

struct Box {
  Vec2 lo{-1.0, -1.0};
  Vec2 hi{1.0, 1.0};

  bool Contains(const Vec2& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() &&
           p.y() <= hi.y();
  }
};

struct WorldState {
  std::int64_t tick = 0;
  RobotState robot;
  std::vector<AgentTruth> agents;
  Box bounds;
};

/// Every benchmark constant of a scenario. The world is centered on the
/// origin with extent `world_size`.
struct ScenarioConfig {
  int n_agents = 20;
  Vec2 world_size{2.0, 2.0};
  double agent_radius = 0.05;
  double agent_speed_lo = 5e-3;
  double agent_speed_hi = 2e-2;
  double robot_speed_lo = 0.0;
  double robot_speed_hi = 2e-2;
  double measurement_noise_std = 0.01;
  double sensing_range = 0.2;
  int step_budget = 3500;
  std::uint64_t rng_seed = 0;

  Vec2 robot_start{0.0, -0.95};
  Vec2 goal{0.0, 0.95};
  double goal_radius = 0.05;
  RobotModel robot_model = RobotModel::kDoubleIntegrator;

  // Agent random walk: constant speed, heading perturbed each step.
  double heading_noise_std = 0.1;
  BoundaryPolicy boundary = BoundaryPolicy::kReflect;
  // Agents are not spawned closer than this to the robot start.
  double spawn_clearance = 0.2;

  double v_max() const { return robot_speed_hi; }
  Box bounds() const {
    return Box{-0.5 * world_size, 0.5 * world_size};
  }

  /// Throws Error(kConfig) on an inconsistent configuration.
  void Validate() const;
};

/// Robot actuation limits, shared by the dynamics and the controllers.
struct ControlLimits {
  double v_max = 2e-2;
  double u_max = 5e-3;       // per axis, or linear acceleration (unicycle)
  double alpha_max = 0.05;   // angular acceleration (unicycle)
  double omega_max = 0.5;    // angular speed (unicycle)
};

WorldState SpawnScenario(const ScenarioConfig& config);

struct AgentMotion {
  double heading_noise_std = 0.1;
  BoundaryPolicy boundary = BoundaryPolicy::kReflect;
};

/// Advances every agent one step. Agent-agent overlap is allowed.
WorldState StepAgents(const WorldState& world, const AgentMotion& motion,
                      Rng& rng);

/// Semi-implicit Euler step: velocity first, then position.
/// Control is (ax, ay) for the double integrator and (linear acc, angular
/// acc) for the unicycle.
RobotState StepRobot(const RobotState& state, const Vec2& control, double dt,
                     const ControlLimits& limits);

struct CollisionReport {
  std::vector<int> agent_ids;
  bool any() const { return !agent_ids.empty(); }
};

/// The robot is a point; agent j collides iff distance < radius_j.
CollisionReport CheckCollision(const WorldState& world);

/// Appends one CSV row per entity (robot id is -1):
/// tick,id,x,y,vx,vy
void WriteTraceRows(std::ostream& out, const WorldState& world);
void WriteTraceHeader(std::ostream& out);

}  // namespace crowdnav

#endif  // CROWDNAV_WORLD_HPP_
