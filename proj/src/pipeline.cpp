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

#include "crowdnav/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <limits>
#include <thread>

namespace crowdnav {

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

void Fail(const std::string& what) { throw Error(Error::Kind::kConfig, what); }

bool UsesCfs(PipelineMode mode) {
  return mode == PipelineMode::kDynamicGapCfs || mode == PipelineMode::kFull;
}

// Robot holds its position for the whole horizon.
Trajectory HoldTrajectory(const Vec2& position, int horizon) {
  Trajectory t;
  t.gap_key = GapKey::Sentinel();
  t.waypoints.assign(static_cast<std::size_t>(horizon), position);
  t.gap_goal = position;
  return t;
}

}  // namespace

const char* ToString(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::kStaticGap:
      return "sgap";
    case PipelineMode::kDynamicGap:
      return "dagap";
    case PipelineMode::kDynamicGapCfs:
      return "dagap-cfs";
    case PipelineMode::kFull:
      return "full";
  }
  return "unknown";
}

PipelineMode ParseMode(const std::string& name) {
  for (PipelineMode m : {PipelineMode::kStaticGap, PipelineMode::kDynamicGap,
                         PipelineMode::kDynamicGapCfs, PipelineMode::kFull}) {
    if (name == ToString(m)) return m;
  }
  Fail("unknown mode '" + name + "'");
  return PipelineMode::kFull;
}

const char* ToString(Outcome outcome) {
  switch (outcome) {
    case Outcome::kSuccess:
      return "success";
    case Outcome::kCollision:
      return "collision";
    case Outcome::kTimeout:
      return "timeout";
  }
  return "unknown";
}

void PipelineConfig::Sync() {
  limits.v_max = scenario.v_max();
  dagap.pfm.v_max = scenario.v_max();
  dagap.pfm.dt = dt;
  dagap.gap.max_range = scenario.sensing_range;
  dagap.gap.r_ins = scenario.agent_radius;
  kalman.measurement_std = scenario.measurement_noise_std;
  safety.d_min = scenario.agent_radius + 0.02;
}

void PipelineConfig::Validate() const {
  scenario.Validate();
  safety.Validate();
  if (horizon < 1) Fail("horizon must be >= 1");
  if (!(dt > 0.0)) Fail("dt must be positive");
  if (preselect < 1) Fail("preselect must be >= 1");
  if (fixed_replan_step < 0) Fail("fixed_replan_step must be >= 0");
  if (!(limits.v_max > 0.0 && limits.u_max > 0.0 && limits.alpha_max > 0.0 &&
        limits.omega_max > 0.0)) {
    Fail("control limits must be positive");
  }
  if (!(dagap.gap.r_ins > 0.0)) Fail("r_ins must be positive");
  if (!(dagap.pfm.cruise > 0.0 && dagap.pfm.cruise <= 1.0)) Fail("cruise must be in (0, 1]");
  if (!(confidence.epsilon > 0.0 && confidence.epsilon < 1.0)) Fail("epsilon must be in (0, 1)");
  if (!(kalman.measurement_std > 0.0)) Fail("measurement std must be positive");
  if (!(kalman.process_noise >= 0.0)) Fail("process noise must be >= 0");
  if (!(cfs_weights.w_r >= 0.0 && cfs_weights.w_v >= 0.0 && cfs_weights.w_a >= 0.0)) {
    Fail("CFS weights must be >= 0");
  }
  if (tick_period_us < 0) Fail("tick_period_us must be >= 0");
}

PipelineConfig DefaultPipelineConfig(PipelineMode mode) {
  PipelineConfig c;
  c.mode = mode;
  c.Sync();
  return c;
}

PlanResult PlanOnce(const PlanningInput& input, const PipelineConfig& config) {
  const int n = config.horizon;
  const double r_ins = config.dagap.gap.r_ins;
  const bool cfs = UsesCfs(config.mode);
  const Vec2& goal = config.scenario.goal;

  PlanResult out;
  out.tick = input.tick;
  for (const AgentEstimate& e : input.estimates) out.agent_ids.push_back(e.agent_id);
  std::sort(out.agent_ids.begin(), out.agent_ids.end());
  const auto t0 = Clock::now();

  PlanningSnapshot snap;
  snap.tick = input.tick;
  snap.robot_position = input.robot.position;
  snap.goal = goal;
  snap.horizon = n;
  snap.dt = config.dt;
  snap.predictions.reserve(input.estimates.size());
  for (const AgentEstimate& e : input.estimates) {
    snap.predictions.push_back(config.mode == PipelineMode::kStaticGap
                                   ? FrozenPrediction(e, n)
                                   : Predict(e, n, config.dt, config.kalman));
  }
  std::vector<SafetySchedule> schedules;
  schedules.reserve(snap.predictions.size());
  for (const AgentPrediction& p : snap.predictions) {
    schedules.push_back(cfs ? BuildSchedule(p, config.confidence, r_ins) : FixedSchedule(p, r_ins));
  }
  int k = config.fixed_replan_step > 0 ? config.fixed_replan_step : n;
  if (cfs) {
    k = n;
    for (const SafetySchedule& s : schedules) k = std::min(k, s.replan_step);
  }

  SynthesisResult syn = Synthesize(snap, schedules, config.dagap);
  std::vector<Trajectory> candidates = std::move(syn.open);
  if (candidates.empty()) candidates = std::move(syn.closed);
  // Closed trajectories can be a single waypoint; those cannot be tracked.
  std::erase_if(candidates, [](const Trajectory& t) { return t.size() < 2; });
  if (candidates.empty()) candidates.push_back(HoldTrajectory(input.robot.position, n));
  out.candidates = static_cast<int>(candidates.size());
  const auto t1 = Clock::now();
  out.times.dagap_s = Seconds(t0, t1);

  if (!cfs) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto& w = candidates[i].waypoints;
      const double s = Score(w, w, goal, config.cfs_weights);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    out.selected = std::move(candidates[best]);
    out.selected.score = best_score;
    out.replan_step = std::clamp(k, 1, n);
    return out;
  }

  const std::vector<std::size_t> pre =
      Preselect(candidates, goal, static_cast<std::size_t>(config.preselect));
  double best_score = -std::numeric_limits<double>::infinity();
  Trajectory best;
  double fallback_score = -std::numeric_limits<double>::infinity();
  std::size_t fallback = pre.front();
  for (std::size_t idx : pre) {
    const Trajectory& ref = candidates[idx];
    CfsProblem problem;
    problem.reference = ref.waypoints;
    problem.predictions = snap.predictions;
    problem.schedules = schedules;
    problem.weights = config.cfs_weights;
    problem.v_max = config.limits.v_max;
    problem.dt = config.dt;
    const CfsResult r = CfsIterate(problem, config.cfs_options);
    ++out.refined;
    out.refined_feasible += r.status != CfsStatus::kInfeasible && r.spacing_ok;
    const double ref_score = Score(ref.waypoints, ref.waypoints, goal, config.cfs_weights);
    if (ref_score > fallback_score) {
      fallback_score = ref_score;
      fallback = idx;
    }
    if (!r.feasible) continue;
    const double s = Score(r.waypoints, ref.waypoints, goal, config.cfs_weights);
    if (s > best_score) {
      best_score = s;
      best = ref;
      best.waypoints = r.waypoints;
      best.score = s;
      best.feasible = true;
    }
  }
  out.times.cfs_s = Seconds(t1, Clock::now());
  if (best_score > -std::numeric_limits<double>::infinity()) {
    out.selected = std::move(best);
    out.cfs_feasible = true;
    out.replan_step = std::clamp(k, 1, n);
  } else {
    out.selected = std::move(candidates[fallback]);
    out.selected.score = fallback_score;
    out.selected.feasible = false;
    out.replan_step = 1;
  }
  return out;
}

namespace {

struct ControlStep {
  Vec2 u = Vec2::Zero();
  bool fallback = false;
  double ssa_s = 0.0;
};

// Tracks waypoint (tick - plan.tick + 1), the one the plan assigned to the
// next tick, clamped to the last waypoint.
ControlStep Control(const RobotState& robot, const PlanResult& plan, std::int64_t tick,
                    std::span<const AgentEstimate> estimates, const PipelineConfig& config) {
  const auto& w = plan.selected.waypoints;
  const auto last = static_cast<std::int64_t>(w.size()) - 1;
  const auto i = static_cast<std::size_t>(std::clamp<std::int64_t>(tick - plan.tick + 1, 0, last));
  const Vec2 wp_velocity = i > 0 ? Vec2((w[i] - w[i - 1]) / config.dt) : Vec2::Zero();
  const ControlBox box = ControlBounds(robot, config.limits, config.dt);
  ControlStep out;
  out.u = ReferenceControl(robot, w[i], config.gains, box, wp_velocity);
  if (config.mode != PipelineMode::kFull) return out;
  const auto t0 = Clock::now();
  SafetyIndexParams params = config.safety;
  params.step = config.dt;
  std::vector<SsaConstraint> cs = EmitConstraints(robot, estimates, params, box);
  if (!cs.empty()) {
    const std::vector<SsaConstraint> speed = SpeedRows(robot, config.limits, config.dt, box);
    cs.insert(cs.end(), speed.begin(), speed.end());
  }
  const SafeControlResult sc = SafeControl(out.u, cs, box);
  out.ssa_s = Seconds(t0, Clock::now());
  out.u = sc.u;
  out.fallback = sc.telemetry.fallback;
  return out;
}

// World stepping, sensing and outcome bookkeeping shared by both modes.
class Episode {
 public:
  explicit Episode(const PipelineConfig& config)
      : config_(config),
        world_(SpawnScenario(config.scenario)),
        agent_rng_(MakeRng(config.scenario.rng_seed, 2)),
        sense_rng_(MakeRng(config.scenario.rng_seed, 3)),
        tracker_(config.kalman) {
    record_.seed = config.scenario.rng_seed;
    record_.min_clearance = std::numeric_limits<double>::infinity();
    if (config.record_trace) {
      trace_ = std::make_shared<EpisodeTrace>();
      trace_->goal = config.scenario.goal;
      trace_->goal_radius = config.scenario.goal_radius;
      trace_->frames.push_back(world_);
    }
  }

  bool Done() const { return done_; }
  std::int64_t tick() const { return world_.tick; }

  PlanningInput Sense() {
    const Scan scan = crowdnav::Sense(world_, config_.scenario.measurement_noise_std,
                                      config_.scenario.sensing_range, sense_rng_);
    tracker_.Update(scan, world_.robot.position, world_.tick);
    PlanningInput in;
    in.tick = world_.tick;
    in.robot = world_.robot;
    in.estimates = tracker_.Estimates();
    return in;
  }

  void AddPlan(const PlanResult& plan) {
    ++record_.plans;
    record_.dagap_s += plan.times.dagap_s;
    record_.cfs_s += plan.times.cfs_s;
    record_.cfs_refined += plan.refined;
    record_.cfs_feasible += plan.refined_feasible;
    record_.plan_log.push_back({plan.tick, plan.replan_step, 0});
  }

  void Step(const ControlStep& c) {
    if (!record_.plan_log.empty()) ++record_.plan_log.back().executed;
    if (c.fallback) ++record_.ssa_fallbacks;
    record_.ssa_s += c.ssa_s;
    const RobotState robot = StepRobot(world_.robot, c.u, config_.dt, config_.limits);
    AgentMotion motion;
    motion.heading_noise_std = config_.scenario.heading_noise_std;
    motion.boundary = config_.scenario.boundary;
    world_ = StepAgents(world_, motion, agent_rng_);
    world_.robot = robot;
    if (trace_) trace_->frames.push_back(world_);
    Evaluate();
  }

  RunRecord Finish() {
    record_.steps = world_.tick;
    if (!done_) record_.outcome = record_.collision_count > 0 ? Outcome::kCollision : Outcome::kTimeout;
    if (trace_) {
      trace_->collision_tick = record_.collision_tick;
      record_.trace = trace_;
    }
    return record_;
  }

 private:
  void Evaluate() {
    for (const AgentTruth& a : world_.agents) {
      record_.min_clearance =
          std::min(record_.min_clearance, (world_.robot.position - a.position).norm() - a.radius);
    }
    const CollisionReport hit = CheckCollision(world_);
    if (hit.any()) {
      if (record_.collision_count == 0) {
        record_.collision_tick = world_.tick;
        record_.collision_agent = hit.agent_ids.front();
      }
      ++record_.collision_count;
      if (!config_.continue_after_collision) {
        record_.outcome = Outcome::kCollision;
        done_ = true;
        return;
      }
    }
    if ((world_.robot.position - config_.scenario.goal).norm() <= config_.scenario.goal_radius) {
      record_.reached_goal = true;
      record_.outcome = record_.collision_count > 0 ? Outcome::kCollision : Outcome::kSuccess;
      done_ = true;
      return;
    }
    if (world_.tick >= config_.scenario.step_budget) {
      record_.outcome = record_.collision_count > 0 ? Outcome::kCollision : Outcome::kTimeout;
      done_ = true;
    }
  }

  const PipelineConfig& config_;
  WorldState world_;
  Rng agent_rng_;
  Rng sense_rng_;
  Tracker tracker_;
  RunRecord record_;
  std::shared_ptr<EpisodeTrace> trace_;
  bool done_ = false;
};

bool NeedsPlan(const PlanResult* plan, const PlanningInput& in, const PipelineConfig& config) {
  if (!plan) return true;
  const std::int64_t executed = in.tick - plan->tick;
  if (executed >= plan->replan_step ||
      executed + 1 >= static_cast<std::int64_t>(plan->selected.size())) {
    return true;
  }
  if (!config.replan_on_new_track) return false;
  return std::any_of(in.estimates.begin(), in.estimates.end(), [&](const AgentEstimate& e) {
    return !std::binary_search(plan->agent_ids.begin(), plan->agent_ids.end(), e.agent_id);
  });
}

RunRecord RunSerial(const PipelineConfig& config) {
  Episode ep(config);
  std::unique_ptr<PlanResult> plan;
  while (!ep.Done()) {
    const PlanningInput in = ep.Sense();
    if (NeedsPlan(plan.get(), in, config)) {
      plan = std::make_unique<PlanResult>(PlanOnce(in, config));
      ep.AddPlan(*plan);
    }
    ep.Step(Control(in.robot, *plan, in.tick, in.estimates, config));
  }
  return ep.Finish();
}

// Planner thread: replans on request from the latest published input.
class Planner {
 public:
  explicit Planner(const PipelineConfig& config)
      : config_(config), thread_([this] { Loop(); }) {}
  ~Planner() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

  SnapshotCell<PlanningInput>& inputs() { return inputs_; }
  SnapshotCell<PlanResult>& plans() { return plans_; }

  // Returns the publication count at the time of the request.
  int Request() {
    int count = 0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      requested_ = true;
      count = published_;
    }
    cv_.notify_all();
    return count;
  }

  // Blocks until more than `count` plans are published.
  std::shared_ptr<const PlanResult> WaitPast(int count) {
    std::unique_lock<std::mutex> lock(mu_);
    published_cv_.wait(lock, [&] { return published_ > count; });
    return plans_.Load();
  }

 private:
  void Loop() {
    for (;;) {
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return requested_ || stop_; });
        if (stop_) return;
        requested_ = false;
      }
      const std::shared_ptr<const PlanningInput> in = inputs_.Load();
      if (!in) continue;
      plans_.Publish(std::make_shared<const PlanResult>(PlanOnce(*in, config_)));
      {
        std::lock_guard<std::mutex> lock(mu_);
        ++published_;
      }
      published_cv_.notify_all();
    }
  }

  const PipelineConfig& config_;
  SnapshotCell<PlanningInput> inputs_;
  SnapshotCell<PlanResult> plans_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable published_cv_;
  bool requested_ = false;
  bool stop_ = false;
  int published_ = 0;
  std::thread thread_;  // last: starts after every member above exists
};

RunRecord RunThreaded(const PipelineConfig& config) {
  Episode ep(config);
  Planner planner(config);
  std::shared_ptr<const PlanResult> plan;
  bool pending = false;
  int requested_at = 0;
  const auto period = std::chrono::microseconds(config.tick_period_us);
  auto next_tick = Clock::now();
  auto adopt = [&](std::shared_ptr<const PlanResult> p) {
    plan = std::move(p);
    pending = false;
    ep.AddPlan(*plan);
  };
  while (!ep.Done()) {
    auto in = std::make_shared<const PlanningInput>(ep.Sense());
    planner.inputs().Publish(in);
    if (!plan) {
      adopt(planner.WaitPast(planner.Request()));
    } else {
      std::shared_ptr<const PlanResult> latest = planner.plans().Load();
      if (latest != plan) adopt(std::move(latest));
    }
    if (!pending && NeedsPlan(plan.get(), *in, config)) {
      requested_at = planner.Request();
      pending = true;
    }
    // Never track past the end of the active plan.
    if (pending && in->tick - plan->tick + 1 >= static_cast<std::int64_t>(plan->selected.size())) {
      adopt(planner.WaitPast(requested_at));
    }
    ep.Step(Control(in->robot, *plan, in->tick, in->estimates, config));
    if (config.tick_period_us > 0) {
      next_tick += period;
      std::this_thread::sleep_until(next_tick);
    }
  }
  return ep.Finish();
}

}  // namespace

RunRecord RunEpisode(const PipelineConfig& config) {
  config.Validate();
  return config.threaded ? RunThreaded(config) : RunSerial(config);
}

AblationSummary Summarize(PipelineMode mode, std::span<const RunRecord> records) {
  AblationSummary s;
  s.mode = mode;
  s.trials = static_cast<int>(records.size());
  if (records.empty()) return s;
  int success = 0;
  int collision = 0;
  int timeout = 0;
  double steps = 0.0;
  for (const RunRecord& r : records) {
    success += r.outcome == Outcome::kSuccess;
    collision += r.outcome == Outcome::kCollision;
    timeout += r.outcome == Outcome::kTimeout;
    steps += static_cast<double>(r.steps);
  }
  const double n = static_cast<double>(records.size());
  s.success_rate = success / n;
  s.collision_rate = collision / n;
  s.timeout_rate = timeout / n;
  s.mean_steps = steps / n;
  return s;
}

AblationSummary RunAblation(const PipelineConfig& config, PipelineMode mode, int trials,
                            std::uint64_t base_seed, std::vector<RunRecord>* records) {
  if (trials < 1) Fail("trials must be >= 1");
  PipelineConfig c = config;
  c.mode = mode;
  std::vector<RunRecord> out;
  out.reserve(static_cast<std::size_t>(trials));
  for (int i = 0; i < trials; ++i) {
    c.scenario.rng_seed = TrialSeed(base_seed, static_cast<std::uint64_t>(i));
    out.push_back(RunEpisode(c));
  }
  const AblationSummary s = Summarize(mode, out);
  if (records) *records = std::move(out);
  return s;
}

}  // namespace crowdnav
