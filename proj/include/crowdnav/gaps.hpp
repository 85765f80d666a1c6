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

// Gap detection on inflated agents.
//
// Each agent is grown to an inflation radius so the robot is a point. The
// tangent points from the robot to the grown circle bound the agent's
// angular sector; any point strictly between the sectors of two agents is
// at least the inflation radius away from both centers. A clockwise pass
// over the agents pairs the right tangent of each agent with the left
// tangent of the next one and keeps the pairs that are far apart both in
// range and in angle. Wide openings are first split by static virtual
// agents.
//
// All positions in this header are relative to the robot.

#ifndef CROWDNAV_GAPS_HPP_
#define CROWDNAV_GAPS_HPP_

#include <compare>
#include <span>
#include <vector>

#include "crowdnav/geometry.hpp"

namespace crowdnav {

struct GapObstacle {
  int id = 0;
  Vec2 center = Vec2::Zero();
  double radius = 0.0;  // inflation radius
};

struct InflatedAgent {
  int agent_id = 0;
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  double bearing = 0.0;
  double distance = 0.0;
  double half_angle = 0.0;     // asin(radius / distance)
  double left_angle = 0.0;     // bearing + half_angle
  double right_angle = 0.0;    // bearing - half_angle
  double tangent_range = 0.0;  // sqrt(distance^2 - radius^2)
  // Virtual agents split wide openings. They are points placed beyond the
  // sensing range and are owned by the real agent on their
  // counterclockwise side.
  bool is_virtual = false;
  int virtual_index = -1;
};

struct InflateResult {
  std::vector<InflatedAgent> agents;
  // Agents with distance <= radius. They are left to the safe controller.
  std::vector<int> excluded_ids;
};

InflateResult Inflate(std::span<const GapObstacle> obstacles);

/// Identity of one side of a gap: a real agent, or the k-th virtual agent
/// owned by a real agent.
struct FlankKey {
  int agent_id = -1;
  int virtual_index = -1;

  bool is_virtual() const { return virtual_index >= 0; }
  auto operator<=>(const FlankKey&) const = default;
};

/// Gaps are identified across time by their flanking pair.
struct GapKey {
  FlankKey right;
  FlankKey left;
  bool sentinel = false;

  auto operator<=>(const GapKey&) const = default;
  static GapKey Sentinel() { return GapKey{{}, {}, true}; }
};

struct GapEndpoint {
  double angle = 0.0;
  double range = 0.0;

  Vec2 point() const { return range * UnitFromAngle(angle); }
};

enum class GapStatus { kOpen, kClosed };

struct Gap {
  GapKey key;
  // Right endpoint: right tangent of the previous agent in the clockwise
  // pass. Left endpoint: left tangent of the next one.
  GapEndpoint right;
  GapEndpoint left;
  GapStatus status = GapStatus::kOpen;
  Vec2 goal = Vec2::Zero();
  // Real agents whose fields shape trajectories through this gap.
  std::vector<int> flanking_ids;

  bool sentinel() const { return key.sentinel; }
  /// Clockwise angular extent from the right to the left endpoint.
  double width() const;
};

struct GapParams {
  double r_ins = 0.05;
  double angle_threshold = 0.3;   // theta_thre, rad
  double virtual_interval = 0.8;  // rad
  double max_range = 0.2;         // d_max
};

/// Range test of a candidate pair: |L_l(next) - L_r(prev)| > 2 r_ins.
bool RangeCondition(const GapEndpoint& right, const GapEndpoint& left,
                    const GapParams& params);
/// Angle test: clockwise separation of the pair exceeds angle_threshold.
bool AngleCondition(double width, const GapParams& params);

/// Number of virtual agents placed in an opening of angular width `width`.
int VirtualAgentCount(double width, const GapParams& params);

/// Detects gaps among the inflated agents. Goals are not filled in. With
/// zero or one agent the single sentinel gap is returned; with more agents
/// the result may be empty.
std::vector<Gap> DetectGaps(std::span<const InflatedAgent> inflated,
                            const GapParams& params);

/// Same, but also returns the virtual agents inserted by the pass.
std::vector<Gap> DetectGaps(std::span<const InflatedAgent> inflated,
                            const GapParams& params,
                            std::vector<InflatedAgent>* virtual_agents);

/// Local goal inside `gap`: the angular midpoint at the nearer endpoint
/// range, pulled 30% toward the global goal bearing when that bearing lies
/// inside the gap. For the sentinel gap, the global goal clamped to the
/// sensing range.
Vec2 GapGoal(const Gap& gap, const Vec2& goal, const GapParams& params);

}  // namespace crowdnav

#endif  // CROWDNAV_GAPS_HPP_
