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

// Navigation loop: sense and track, plan a trajectory through the crowd,
// then track it with a safe controller until the plan's replan step.

#ifndef CROWDNAV_PIPELINE_HPP_
#define CROWDNAV_PIPELINE_HPP_

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/cfs.hpp"
#include "crowdnav/dagap.hpp"
#include "crowdnav/estimation.hpp"
#include "crowdnav/ssa.hpp"
#include "crowdnav/uncertainty.hpp"
#include "crowdnav/world.hpp"

namespace crowdnav {

/// Planner and controller variants, from the static baseline to the full
/// stack.
enum class PipelineMode {
  kStaticGap,   // agents frozen at their current position during synthesis
  kDynamicGap,  // raw synthesis output, plain tracking
  kDynamicGapCfs,
  kFull,        // plus safe control
};

const char* ToString(PipelineMode mode);
/// Accepts "sgap", "dagap", "dagap-cfs" and "full". Throws Error(kConfig).
PipelineMode ParseMode(const std::string& name);

struct PipelineConfig {
  ScenarioConfig scenario;
  ControlLimits limits;
  KalmanParams kalman;
  DagapParams dagap;
  ConfidenceParams confidence;
  CfsWeights cfs_weights;
  CfsOptions cfs_options;
  SafetyIndexParams safety;
  PdGains gains;
  PipelineMode mode = PipelineMode::kFull;
  int horizon = 20;
  double dt = 1.0;
  // Number of preselected candidates refined by CFS.
  int preselect = 2;
  // Replan step of the modes without uncertainty schedules; 0 means the
  // horizon.
  int fixed_replan_step = 0;
  // Also replan as soon as a track the current plan did not predict
  // appears.
  bool replan_on_new_track = true;
  // Keep driving after a collision; the episode then ends at the goal or
  // the budget and still counts as a collision.
  bool continue_after_collision = false;
  // Planner on its own thread; the controller tracks the last published
  // plan. Off: plans are computed synchronously (bit-reproducible).
  bool threaded = false;
  // Controller tick period in threaded mode; 0 runs ticks back to back.
  int tick_period_us = 0;
  bool record_trace = false;

  /// Copies shared constants (v_max, sensing range, noise, radii) from the
  /// scenario into the module parameters.
  void Sync();
  /// Throws Error(kConfig) on an inconsistent configuration.
  void Validate() const;
};

/// Defaults for `mode` with every shared constant synced.
PipelineConfig DefaultPipelineConfig(PipelineMode mode = PipelineMode::kFull);

struct StageTimes {
  double dagap_s = 0.0;
  double cfs_s = 0.0;
};

struct PlanResult {
  Trajectory selected;
  int replan_step = 1;  // in [1, N]
  std::int64_t tick = 0;
  StageTimes times;
  int candidates = 0;
  bool cfs_feasible = false;  // some refined candidate passed
  int refined = 0;            // candidates sent through CFS
  int refined_feasible = 0;   // of those, passing the spacing check
  std::vector<int> agent_ids;  // tracks the plan predicted, ascending
};

/// Inputs of one planning call, copied from the controller side.
struct PlanningInput {
  std::int64_t tick = 0;
  RobotState robot;
  std::vector<AgentEstimate> estimates;
};

/// Synthesis, uncertainty schedules, preselection, one CFS pass per
/// candidate and scoring, as configured by `config.mode`. When every
/// refined candidate is infeasible, the best-scored reference is returned
/// with replan step 1.
PlanResult PlanOnce(const PlanningInput& input, const PipelineConfig& config);

enum class Outcome { kSuccess, kCollision, kTimeout };
const char* ToString(Outcome outcome);

struct PlanLogEntry {
  std::int64_t tick = 0;
  int replan_step = 0;
  int executed = 0;  // steps tracked before the next plan took over
};

struct EpisodeTrace {
  std::vector<WorldState> frames;  // one per tick, starting at spawn
  Vec2 goal = Vec2::Zero();
  double goal_radius = 0.05;
  std::int64_t collision_tick = -1;
};

struct RunRecord {
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::kTimeout;
  std::int64_t steps = 0;
  bool reached_goal = false;
  std::int64_t collision_tick = -1;
  int collision_agent = -1;
  int collision_count = 0;  // ticks in contact
  int plans = 0;
  int ssa_fallbacks = 0;
  double min_clearance = 0.0;  // min over ticks of distance minus radius
  // Sums over the episode; means follow from plans and steps.
  double dagap_s = 0.0;
  double cfs_s = 0.0;
  double ssa_s = 0.0;
  int cfs_refined = 0;
  int cfs_feasible = 0;
  std::vector<PlanLogEntry> plan_log;
  std::shared_ptr<const EpisodeTrace> trace;  // set when record_trace
};

/// One episode of `config.scenario` (its rng_seed included).
RunRecord RunEpisode(const PipelineConfig& config);

struct AblationSummary {
  PipelineMode mode = PipelineMode::kFull;
  int trials = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_steps = 0.0;
};

/// Derived per-trial seed; independent of scheduling.
inline std::uint64_t TrialSeed(std::uint64_t base, std::uint64_t trial) { return base ^ trial; }

AblationSummary Summarize(PipelineMode mode, std::span<const RunRecord> records);

/// `trials` episodes with seeds TrialSeed(base_seed, i), run serially.
/// Throws Error(kConfig) unless trials >= 1.
AblationSummary RunAblation(const PipelineConfig& config, PipelineMode mode, int trials,
                            std::uint64_t base_seed, std::vector<RunRecord>* records = nullptr);

/// Latest-value exchange between threads. Values are immutable once
/// published; readers hold their own reference.
template <typename T>
class SnapshotCell {
 public:
  void Publish(std::shared_ptr<const T> value) {
    std::lock_guard<std::mutex> lock(mu_);
    value_ = std::move(value);
    ++version_;
  }
  std::shared_ptr<const T> Load() const {
    std::lock_guard<std::mutex> lock(mu_);
    return value_;
  }
  std::uint64_t version() const {
    std::lock_guard<std::mutex> lock(mu_);
    return version_;
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const T> value_;
  std::uint64_t version_ = 0;
};

}  // namespace crowdnav

#endif  // CROWDNAV_PIPELINE_HPP_
