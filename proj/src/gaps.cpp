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

#include "crowdnav/gaps.hpp"

#include <algorithm>
#include <cmath>

namespace crowdnav {

InflateResult Inflate(std::span<const GapObstacle> obstacles) {
  InflateResult out;
  out.agents.reserve(obstacles.size());
  for (const GapObstacle& o : obstacles) {
    const double d = o.center.norm();
    if (!(d > o.radius)) {
      out.excluded_ids.push_back(o.id);
      continue;
    }
    InflatedAgent a;
    a.agent_id = o.id;
    a.center = o.center;
    a.radius = o.radius;
    a.distance = d;
    a.bearing = Bearing(o.center);
    a.half_angle = std::asin(o.radius / d);
    a.left_angle = WrapAngle(a.bearing + a.half_angle);
    a.right_angle = WrapAngle(a.bearing - a.half_angle);
    a.tangent_range = std::sqrt(d * d - o.radius * o.radius);
    out.agents.push_back(a);
  }
  return out;
}

double Gap::width() const {
  if (sentinel()) return kTwoPi;
  return WrapPositive(right.angle - left.angle);
}

bool RangeCondition(const GapEndpoint& right, const GapEndpoint& left,
                    const GapParams& params) {
  return std::abs(left.range - right.range) > 2.0 * params.r_ins;
}

bool AngleCondition(double width, const GapParams& params) {
  return width > params.angle_threshold;
}

int VirtualAgentCount(double width, const GapParams& params) {
  if (!(width > 0.0) || !(params.virtual_interval > 0.0)) return 0;
  return static_cast<int>(std::floor(width / params.virtual_interval));
}

namespace {

// Clockwise angular free space between the sectors of prev and next.
double OpeningWidth(const InflatedAgent& prev, const InflatedAgent& next) {
  return WrapPositive(prev.bearing - next.bearing) - prev.half_angle -
         next.half_angle;
}

InflatedAgent MakeVirtual(const InflatedAgent& owner, int index, double angle,
                          double range) {
  InflatedAgent v;
  v.agent_id = owner.agent_id;
  v.is_virtual = true;
  v.virtual_index = index;
  v.bearing = WrapAngle(angle);
  v.left_angle = v.bearing;
  v.right_angle = v.bearing;
  v.distance = range;
  v.tangent_range = range;
  v.center = range * UnitFromAngle(v.bearing);
  return v;
}

FlankKey KeyOf(const InflatedAgent& a) {
  return FlankKey{a.agent_id, a.is_virtual ? a.virtual_index : -1};
}

}  // namespace

std::vector<Gap> DetectGaps(std::span<const InflatedAgent> inflated,
                            const GapParams& params) {
  return DetectGaps(inflated, params, nullptr);
}

std::vector<Gap> DetectGaps(std::span<const InflatedAgent> inflated,
                            const GapParams& params,
                            std::vector<InflatedAgent>* virtual_agents) {
  std::vector<Gap> gaps;
  if (inflated.size() <= 1) {
    Gap g;
    g.key = GapKey::Sentinel();
    for (const InflatedAgent& a : inflated) g.flanking_ids.push_back(a.agent_id);
    gaps.push_back(std::move(g));
    return gaps;
  }

  // Clockwise order: decreasing bearing.
  std::vector<InflatedAgent> real(inflated.begin(), inflated.end());
  std::sort(real.begin(), real.end(),
            [](const InflatedAgent& a, const InflatedAgent& b) {
              if (a.bearing != b.bearing) return a.bearing > b.bearing;
              return a.agent_id < b.agent_id;
            });

  // Virtual agents sit beyond every real tangent point so that a real agent
  // and its neighbouring virtual agent always differ in range by more than
  // 2 r_ins; neighbouring virtual agents never form a gap.
  double far = params.max_range;
  for (const InflatedAgent& a : real) far = std::max(far, a.tangent_range);
  const double virtual_range = far + 2.0 * params.r_ins;
  std::vector<InflatedAgent> ring;
  const std::size_t n = real.size();
  for (std::size_t i = 0; i < n; ++i) {
    const InflatedAgent& prev = real[i];
    const InflatedAgent& next = real[(i + 1) % n];
    ring.push_back(prev);
    const double width = OpeningWidth(prev, next);
    const int m = VirtualAgentCount(width, params);
    for (int k = 1; k <= m; ++k) {
      const double angle = prev.right_angle - k * width / (m + 1);
      ring.push_back(MakeVirtual(prev, k - 1, angle, virtual_range));
      if (virtual_agents) virtual_agents->push_back(ring.back());
    }
  }

  const std::size_t c = ring.size();
  for (std::size_t j = 0; j < c; ++j) {
    const InflatedAgent& prev = ring[j];
    const InflatedAgent& next = ring[(j + 1) % c];
    const double width = OpeningWidth(prev, next);
    if (!(width > 0.0)) continue;
    const GapEndpoint right{prev.right_angle, prev.tangent_range};
    const GapEndpoint left{next.left_angle, next.tangent_range};
    if (!RangeCondition(right, left, params)) continue;
    if (!AngleCondition(width, params)) continue;
    Gap g;
    g.key = GapKey{KeyOf(prev), KeyOf(next), false};
    g.right = right;
    g.left = left;
    if (!prev.is_virtual) g.flanking_ids.push_back(prev.agent_id);
    if (!next.is_virtual && next.agent_id != prev.agent_id) {
      g.flanking_ids.push_back(next.agent_id);
    }
    gaps.push_back(std::move(g));
  }
  return gaps;
}

Vec2 GapGoal(const Gap& gap, const Vec2& goal, const GapParams& params) {
  if (gap.sentinel()) {
    const double d = goal.norm();
    if (d <= params.max_range) return goal;
    return goal * (params.max_range / d);
  }
  const double width = gap.width();
  const double mid = gap.right.angle - 0.5 * width;
  const double range = std::min(gap.right.range, gap.left.range);
  double angle = mid;
  if (goal.norm() > 0.0) {
    const double goal_bearing = Bearing(goal);
    if (WrapPositive(gap.right.angle - goal_bearing) <= width) {
      angle = mid + 0.3 * WrapAngle(goal_bearing - mid);
    }
  }
  return range * UnitFromAngle(angle);
}

}  // namespace crowdnav
