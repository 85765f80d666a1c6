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

// Dynamic gap trajectory synthesis. Gaps are re-detected on the predicted
// agent positions at every horizon step; each open gap carries one
// trajectory that follows a potential field toward the gap goal. Closing
// gaps freeze their trajectory, opening gaps branch from the nearest
// existing one.

#ifndef CROWDNAV_DAGAP_HPP_
#define CROWDNAV_DAGAP_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "crowdnav/estimation.hpp"
#include "crowdnav/gaps.hpp"
#include "crowdnav/geometry.hpp"
#include "crowdnav/uncertainty.hpp"

namespace crowdnav {

enum class TrajectoryStatus { kActive, kClosed };

struct Trajectory {
  GapKey gap_key;
  // waypoints[0] is the robot position at plan time; one waypoint per step.
  std::vector<Vec2> waypoints;
  TrajectoryStatus status = TrajectoryStatus::kActive;
  double score = 0.0;
  bool feasible = true;
  Vec2 gap_goal = Vec2::Zero();  // world frame, last horizon step
  std::vector<int> flanking_ids;

  std::size_t size() const { return waypoints.size(); }
  const Vec2& back() const { return waypoints.back(); }
};

struct PlanningSnapshot {
  std::int64_t tick = 0;
  Vec2 robot_position = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  std::vector<AgentPrediction> predictions;
  int horizon = 20;
  double dt = 1.0;
};

struct PfmParams {
  double v_max = 2e-2;
  double dt = 1.0;
  // The field acts within influence_factor * inflation of a flanking agent.
  double influence_factor = 2.0;
  double repulsion_gain = 2.0;
  double circulation_gain = 1.0;
  // Every predicted agent repels, not only the gap's flanking agents.
  bool all_agents = false;
  // Synthesized trajectories step at cruise * v_max, leaving the optimizer
  // room below the speed limit.
  double cruise = 0.95;
};

/// Obstacle seen by the potential field, in world coordinates.
struct FieldAgent {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;  // inflation radius
};

/// One potential-field step from `current` toward `target`. The step has
/// length min(v_max * dt, |target - current|) and is zero at the target.
Vec2 PfmStep(const Vec2& current, const Vec2& target,
             std::span<const FieldAgent> flanking, const PfmParams& params);

struct DagapParams {
  GapParams gap;
  PfmParams pfm;
};

struct SynthesisResult {
  // Trajectories of gaps still open at the last horizon step, by gap key.
  std::vector<Trajectory> open;
  // Frozen trajectories of gaps that closed inside the horizon.
  std::vector<Trajectory> closed;
};

/// Runs the synthesis over snapshot.horizon steps. `schedules` is either
/// empty (inflate every agent by gap.r_ins) or parallel to
/// snapshot.predictions. Throws InvalidArgument when horizon < 1 or the
/// inputs disagree in size.
SynthesisResult Synthesize(const PlanningSnapshot& snapshot,
                           std::span<const SafetySchedule> schedules,
                           const DagapParams& params);

/// CSV rows "traj_id,step,x,y,status" for every trajectory, open first.
void WriteTrajectoryCsv(std::ostream& out, const SynthesisResult& result);

}  // namespace crowdnav

#endif  // CROWDNAV_DAGAP_HPP_
