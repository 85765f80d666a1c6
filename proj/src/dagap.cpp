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

#include "crowdnav/dagap.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <unordered_map>

namespace crowdnav {

Vec2 PfmStep(const Vec2& current, const Vec2& target,
             std::span<const FieldAgent> flanking, const PfmParams& params) {
  const Vec2 to_target = target - current;
  const double dist = to_target.norm();
  if (dist <= 1e-12) return current;
  Vec2 dir = to_target / dist;
  for (const FieldAgent& a : flanking) {
    if (!(a.radius > 0.0)) continue;
    const Vec2 off = current - a.center;
    const double d = off.norm();
    const double influence = params.influence_factor * a.radius;
    if (d >= influence || d <= 1e-12) continue;
    // 1 on the inflated circle, 0 at the influence radius.
    const double w = std::min(
        1.0, (a.radius / d - a.radius / influence) / (1.0 - a.radius / influence));
    const Vec2 n = off / d;
    Vec2 t = Perp(n);
    if (t.dot(target - a.center) < 0.0) t = -t;
    dir += w * (params.repulsion_gain * n + params.circulation_gain * t);
  }
  const double len = dir.norm();
  if (len <= 1e-12) return current;
  return current + std::min(params.v_max * params.dt, dist) * (dir / len);
}

namespace {

struct Track {
  Trajectory traj;
  // Set once the trajectory has arrived at its gap goal; from then on it
  // heads for the global goal.
  bool passed = false;
};

class HorizonScene {
 public:
  HorizonScene(const PlanningSnapshot& snapshot,
               std::span<const SafetySchedule> schedules,
               const DagapParams& params)
      : snapshot_(snapshot), schedules_(schedules), params_(params) {
    for (std::size_t i = 0; i < snapshot.predictions.size(); ++i) {
      index_[snapshot.predictions[i].agent_id] = i;
    }
  }

  double Inflation(std::size_t agent, int step) const {
    if (schedules_.empty()) return params_.gap.r_ins;
    return schedules_[agent].at(step);
  }

  std::vector<Gap> GapsAt(int step) const {
    const Vec2& x0 = snapshot_.robot_position;
    std::vector<GapObstacle> obstacles;
    obstacles.reserve(snapshot_.predictions.size());
    for (std::size_t i = 0; i < snapshot_.predictions.size(); ++i) {
      const AgentPrediction& p = snapshot_.predictions[i];
      obstacles.push_back({p.agent_id, p.position(step) - x0, Inflation(i, step)});
    }
    const InflateResult inflated = Inflate(obstacles);
    std::vector<Gap> gaps = DetectGaps(inflated.agents, params_.gap);
    if (gaps.empty()) {
      Gap g;
      g.key = GapKey::Sentinel();
      for (const InflatedAgent& a : inflated.agents) {
        g.flanking_ids.push_back(a.agent_id);
      }
      gaps.push_back(std::move(g));
    }
    for (Gap& g : gaps) {
      g.goal = x0 + GapGoal(g, snapshot_.goal - x0, params_.gap);
    }
    return gaps;
  }

  std::vector<FieldAgent> Field(const std::vector<int>& ids, int step) const {
    if (params_.pfm.all_agents) {
      std::vector<FieldAgent> out;
      out.reserve(snapshot_.predictions.size());
      for (std::size_t i = 0; i < snapshot_.predictions.size(); ++i) {
        out.push_back({snapshot_.predictions[i].position(step), Inflation(i, step)});
      }
      return out;
    }
    std::vector<FieldAgent> out;
    out.reserve(ids.size());
    for (int id : ids) {
      const std::size_t i = index_.at(id);
      out.push_back({snapshot_.predictions[i].position(step), Inflation(i, step)});
    }
    return out;
  }

 private:
  const PlanningSnapshot& snapshot_;
  std::span<const SafetySchedule> schedules_;
  const DagapParams& params_;
  std::unordered_map<int, std::size_t> index_;
};

void Advance(Track& track, const HorizonScene& scene, const Vec2& goal,
             int step, const PfmParams& pfm) {
  const Vec2& x = track.traj.back();
  const Vec2 target = track.passed ? goal : track.traj.gap_goal;
  const std::vector<FieldAgent> field = scene.Field(track.traj.flanking_ids, step);
  Vec2 next = PfmStep(x, target, field, pfm);
  if (!track.passed && (next - target).norm() <= 1e-9) {
    track.passed = true;
    // Spend the rest of the step toward the goal; the step stays <= v_max dt.
    PfmParams rest = pfm;
    rest.v_max = pfm.v_max - (next - x).norm() / pfm.dt;
    if (rest.v_max > 0.0) next = PfmStep(next, goal, field, rest);
  }
  track.traj.waypoints.push_back(next);
}

}  // namespace

SynthesisResult Synthesize(const PlanningSnapshot& snapshot,
                           std::span<const SafetySchedule> schedules,
                           const DagapParams& params) {
  const int n = snapshot.horizon;
  if (n < 1) throw InvalidArgument("Synthesize: horizon must be >= 1");
  if (!schedules.empty() && schedules.size() != snapshot.predictions.size()) {
    throw InvalidArgument("Synthesize: schedules do not match predictions");
  }
  for (const AgentPrediction& p : snapshot.predictions) {
    if (static_cast<int>(p.positions.size()) < n) {
      throw InvalidArgument("Synthesize: prediction shorter than horizon");
    }
  }
  for (const SafetySchedule& s : schedules) {
    if (static_cast<int>(s.d_safe.size()) < n) {
      throw InvalidArgument("Synthesize: schedule shorter than horizon");
    }
  }

  const HorizonScene scene(snapshot, schedules, params);
  PfmParams step = params.pfm;
  step.v_max *= params.pfm.cruise;
  SynthesisResult result;
  std::map<GapKey, Track> active;

  for (const Gap& g : scene.GapsAt(0)) {
    Track t;
    t.traj.gap_key = g.key;
    t.traj.gap_goal = g.goal;
    t.traj.flanking_ids = g.flanking_ids;
    t.traj.waypoints.push_back(snapshot.robot_position);
    active.emplace(g.key, std::move(t));
  }

  for (int j = 1; j < n; ++j) {
    const std::vector<Gap> gaps = scene.GapsAt(j);
    std::map<GapKey, Track> next;
    for (const Gap& g : gaps) {
      auto it = active.find(g.key);
      Track t;
      if (it != active.end()) {
        t = it->second;
      } else {
        // Birth: branch from the trajectory whose latest waypoint is
        // nearest to the new gap goal; ties go to the smaller key.
        const Track* parent = nullptr;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [key, cand] : active) {
          const double d = (cand.traj.back() - g.goal).norm();
          if (d < best) {
            best = d;
            parent = &cand;
          }
        }
        t.traj.waypoints = parent->traj.waypoints;
        t.traj.gap_key = g.key;
      }
      t.traj.gap_goal = g.goal;
      t.traj.flanking_ids = g.flanking_ids;
      next.emplace(g.key, std::move(t));
    }
    for (auto& [key, t] : active) {
      if (next.count(key)) continue;
      t.traj.status = TrajectoryStatus::kClosed;
      result.closed.push_back(std::move(t.traj));
    }
    for (auto& [key, t] : next) Advance(t, scene, snapshot.goal, j, step);
    active = std::move(next);
  }

  result.open.reserve(active.size());
  for (auto& [key, t] : active) result.open.push_back(std::move(t.traj));
  return result;
}

void WriteTrajectoryCsv(std::ostream& out, const SynthesisResult& result) {
  out << "traj_id,step,x,y,status\n";
  char buf[128];
  int id = 0;
  auto emit = [&](const Trajectory& t) {
    const char* status =
        t.status == TrajectoryStatus::kActive ? "open" : "closed";
    for (std::size_t i = 0; i < t.waypoints.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%s\n", id, i,
                    t.waypoints[i].x(), t.waypoints[i].y(), status);
      out << buf;
    }
    ++id;
  };
  for (const Trajectory& t : result.open) emit(t);
  for (const Trajectory& t : result.closed) emit(t);
}

}  // namespace crowdnav
