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

#include "crowdnav/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace crowdnav {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

void ConfigFail(const std::string& what) { throw Error(Error::Kind::kConfig, what); }
void IoFail(const std::string& what) { throw Error(Error::Kind::kIo, what); }

bool UsesCfs(PipelineMode mode) {
  return mode == PipelineMode::kDynamicGapCfs || mode == PipelineMode::kFull;
}

// ---- config values ----

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) ConfigFail("bad number '" + v + "'");
  return out;
}

double ParseDouble(const std::string& v) {
  const double d = ParseNumber<double>(v);
  if (!std::isfinite(d)) ConfigFail("non-finite value '" + v + "'");
  return d;
}
int ParseInt(const std::string& v) { return ParseNumber<int>(v); }
std::uint64_t ParseU64(const std::string& v) { return ParseNumber<std::uint64_t>(v); }

bool ParseBool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  ConfigFail("bad boolean '" + v + "'");
  return false;
}

// "x, y"
Vec2 ParseVec2(const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) ConfigFail("expected 'x, y', got '" + v + "'");
  return Vec2(ParseDouble(Trim(v.substr(0, comma))), ParseDouble(Trim(v.substr(comma + 1))));
}

RobotModel ParseRobotModel(const std::string& v) {
  if (v == "double-integrator") return RobotModel::kDoubleIntegrator;
  if (v == "unicycle") return RobotModel::kSecondOrderUnicycle;
  ConfigFail("unknown robot model '" + v + "'");
  return RobotModel::kDoubleIntegrator;
}

BoundaryPolicy ParseBoundary(const std::string& v) {
  if (v == "reflect") return BoundaryPolicy::kReflect;
  if (v == "wrap") return BoundaryPolicy::kWrap;
  ConfigFail("unknown boundary policy '" + v + "'");
  return BoundaryPolicy::kReflect;
}

using Setter = std::function<void(PipelineConfig&, const std::string&)>;
using KeyTable = std::map<std::string, Setter>;

#define CROWDNAV_KEY(name, field, parse) \
  {name, [](PipelineConfig& c, const std::string& v) { c.field = parse(v); }}

// Keys feeding Sync.
const KeyTable& SourceKeys() {
  static const KeyTable table = {
      CROWDNAV_KEY("scenario.n_agents", scenario.n_agents, ParseInt),
      CROWDNAV_KEY("scenario.world_size", scenario.world_size, ParseVec2),
      CROWDNAV_KEY("scenario.agent_radius", scenario.agent_radius, ParseDouble),
      CROWDNAV_KEY("scenario.agent_speed_lo", scenario.agent_speed_lo, ParseDouble),
      CROWDNAV_KEY("scenario.agent_speed_hi", scenario.agent_speed_hi, ParseDouble),
      CROWDNAV_KEY("scenario.robot_speed_lo", scenario.robot_speed_lo, ParseDouble),
      CROWDNAV_KEY("scenario.robot_speed_hi", scenario.robot_speed_hi, ParseDouble),
      CROWDNAV_KEY("scenario.measurement_noise_std", scenario.measurement_noise_std, ParseDouble),
      CROWDNAV_KEY("scenario.sensing_range", scenario.sensing_range, ParseDouble),
      CROWDNAV_KEY("scenario.step_budget", scenario.step_budget, ParseInt),
      CROWDNAV_KEY("scenario.rng_seed", scenario.rng_seed, ParseU64),
      CROWDNAV_KEY("scenario.robot_start", scenario.robot_start, ParseVec2),
      CROWDNAV_KEY("scenario.goal", scenario.goal, ParseVec2),
      CROWDNAV_KEY("scenario.goal_radius", scenario.goal_radius, ParseDouble),
      CROWDNAV_KEY("scenario.robot_model", scenario.robot_model, ParseRobotModel),
      CROWDNAV_KEY("scenario.heading_noise_std", scenario.heading_noise_std, ParseDouble),
      CROWDNAV_KEY("scenario.boundary", scenario.boundary, ParseBoundary),
      CROWDNAV_KEY("scenario.spawn_clearance", scenario.spawn_clearance, ParseDouble),
      CROWDNAV_KEY("dt", dt, ParseDouble),
  };
  return table;
}

const KeyTable& ModuleKeys() {
  static const KeyTable table = {
      CROWDNAV_KEY("mode", mode, ParseMode),
      CROWDNAV_KEY("horizon", horizon, ParseInt),
      CROWDNAV_KEY("preselect", preselect, ParseInt),
      CROWDNAV_KEY("fixed_replan_step", fixed_replan_step, ParseInt),
      CROWDNAV_KEY("replan_on_new_track", replan_on_new_track, ParseBool),
      CROWDNAV_KEY("continue_after_collision", continue_after_collision, ParseBool),
      CROWDNAV_KEY("threaded", threaded, ParseBool),
      CROWDNAV_KEY("tick_period_us", tick_period_us, ParseInt),
      CROWDNAV_KEY("limits.v_max", limits.v_max, ParseDouble),
      CROWDNAV_KEY("limits.u_max", limits.u_max, ParseDouble),
      CROWDNAV_KEY("limits.alpha_max", limits.alpha_max, ParseDouble),
      CROWDNAV_KEY("limits.omega_max", limits.omega_max, ParseDouble),
      CROWDNAV_KEY("kalman.process_noise", kalman.process_noise, ParseDouble),
      CROWDNAV_KEY("kalman.measurement_std", kalman.measurement_std, ParseDouble),
      CROWDNAV_KEY("kalman.init_velocity_var", kalman.init_velocity_var, ParseDouble),
      CROWDNAV_KEY("kalman.max_missed", kalman.max_missed, ParseInt),
      CROWDNAV_KEY("gap.r_ins", dagap.gap.r_ins, ParseDouble),
      CROWDNAV_KEY("gap.angle_threshold", dagap.gap.angle_threshold, ParseDouble),
      CROWDNAV_KEY("gap.virtual_interval", dagap.gap.virtual_interval, ParseDouble),
      CROWDNAV_KEY("gap.max_range", dagap.gap.max_range, ParseDouble),
      CROWDNAV_KEY("pfm.v_max", dagap.pfm.v_max, ParseDouble),
      CROWDNAV_KEY("pfm.influence_factor", dagap.pfm.influence_factor, ParseDouble),
      CROWDNAV_KEY("pfm.repulsion_gain", dagap.pfm.repulsion_gain, ParseDouble),
      CROWDNAV_KEY("pfm.circulation_gain", dagap.pfm.circulation_gain, ParseDouble),
      CROWDNAV_KEY("pfm.all_agents", dagap.pfm.all_agents, ParseBool),
      CROWDNAV_KEY("pfm.cruise", dagap.pfm.cruise, ParseDouble),
      CROWDNAV_KEY("confidence.epsilon", confidence.epsilon, ParseDouble),
      CROWDNAV_KEY("confidence.d_safe_max", confidence.d_safe_max, ParseDouble),
      CROWDNAV_KEY("cfs.w_r", cfs_weights.w_r, ParseDouble),
      CROWDNAV_KEY("cfs.w_v", cfs_weights.w_v, ParseDouble),
      CROWDNAV_KEY("cfs.w_a", cfs_weights.w_a, ParseDouble),
      CROWDNAV_KEY("cfs.converge", cfs_options.converge, ParseBool),
      CROWDNAV_KEY("cfs.converge_tol", cfs_options.converge_tol, ParseDouble),
      CROWDNAV_KEY("cfs.max_outer", cfs_options.max_outer, ParseInt),
      CROWDNAV_KEY("cfs.qp_tol", cfs_options.qp.tol, ParseDouble),
      CROWDNAV_KEY("cfs.qp_max_iter", cfs_options.qp.max_iter, ParseInt),
      CROWDNAV_KEY("safety.d_min", safety.d_min, ParseDouble),
      CROWDNAV_KEY("safety.k_grad", safety.k_grad, ParseDouble),
      CROWDNAV_KEY("safety.eta", safety.eta, ParseDouble),
      CROWDNAV_KEY("safety.step", safety.step, ParseDouble),
      CROWDNAV_KEY("gains.kp", gains.kp, ParseDouble),
      CROWDNAV_KEY("gains.kd", gains.kd, ParseDouble),
      CROWDNAV_KEY("gains.k_heading", gains.k_heading, ParseDouble),
      CROWDNAV_KEY("gains.k_omega", gains.k_omega, ParseDouble),
  };
  return table;
}

#undef CROWDNAV_KEY

// ---- JSON ----

Outcome ParseOutcome(const std::string& s) {
  for (Outcome o : {Outcome::kSuccess, Outcome::kCollision, Outcome::kTimeout}) {
    if (s == ToString(o)) return o;
  }
  ConfigFail("unknown outcome '" + s + "'");
  return Outcome::kTimeout;
}

// inf <-> null
Json Finite(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
double FromFinite(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

double Ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

// ---- SVG ----

class Canvas {
 public:
  Canvas(const Box& bounds, const PlotStyle& style) : bounds_(bounds), style_(style) {
    const Vec2 size = bounds.hi - bounds.lo;
    width_ = size.x() * style.scale + 2.0 * style.margin;
    height_ = size.y() * style.scale + 2.0 * style.margin;
    out_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    Printf("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.5f\" height=\"%.5f\" "
           "viewBox=\"0 0 %.5f %.5f\">\n",
           width_, height_, width_, height_);
    Printf("<rect x=\"0\" y=\"0\" width=\"%.5f\" height=\"%.5f\" fill=\"white\"/>\n", width_,
           height_);
    const Vec2 a = Map(Vec2(bounds.lo.x(), bounds.hi.y()));
    Printf("<rect x=\"%.5f\" y=\"%.5f\" width=\"%.5f\" height=\"%.5f\" fill=\"none\" "
           "stroke=\"black\" stroke-width=\"1\"/>\n",
           a.x(), a.y(), size.x() * style.scale, size.y() * style.scale);
  }

  Vec2 Map(const Vec2& p) const {
    return Vec2(style_.margin + (p.x() - bounds_.lo.x()) * style_.scale,
                style_.margin + (bounds_.hi.y() - p.y()) * style_.scale);
  }
  double Length(double l) const { return l * style_.scale; }

  void Goal(const Vec2& goal, double radius) {
    const Vec2 c = Map(goal);
    const double h = Length(radius);
    Printf("<rect x=\"%.5f\" y=\"%.5f\" width=\"%.5f\" height=\"%.5f\" fill=\"#2e7d32\" "
           "fill-opacity=\"0.5\" stroke=\"#1b5e20\" stroke-width=\"1\"/>\n",
           c.x() - h, c.y() - h, 2.0 * h, 2.0 * h);
  }

  void Disc(const Vec2& p, double radius, const char* fill, double opacity) {
    const Vec2 c = Map(p);
    Printf("<circle cx=\"%.5f\" cy=\"%.5f\" r=\"%.5f\" fill=\"%s\" fill-opacity=\"%.5f\" "
           "stroke=\"#424242\" stroke-width=\"0.5\" stroke-opacity=\"%.5f\"/>\n",
           c.x(), c.y(), Length(radius), fill, opacity, opacity);
  }

  void Path(const std::vector<Vec2>& points, double width) {
    if (points.empty()) return;
    out_ += "<polyline fill=\"none\" stroke=\"#d32f2f\" stroke-linejoin=\"round\" ";
    Printf("stroke-width=\"%.5f\" points=\"", width);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec2 c = Map(points[i]);
      Printf(i == 0 ? "%.5f,%.5f" : " %.5f,%.5f", c.x(), c.y());
    }
    out_ += "\"/>\n";
  }

  void Cross(const Vec2& p, double half) {
    const Vec2 c = Map(p);
    Printf("<g stroke=\"black\" stroke-width=\"2\">"
           "<line x1=\"%.5f\" y1=\"%.5f\" x2=\"%.5f\" y2=\"%.5f\"/>"
           "<line x1=\"%.5f\" y1=\"%.5f\" x2=\"%.5f\" y2=\"%.5f\"/></g>\n",
           c.x() - half, c.y() - half, c.x() + half, c.y() + half, c.x() - half, c.y() + half,
           c.x() + half, c.y() - half);
  }

  std::string Finish() {
    out_ += "</svg>\n";
    return std::move(out_);
  }

 private:
  template <typename... Args>
  void Printf(const char* format, Args... args) {
    const int n = std::snprintf(nullptr, 0, format, args...);
    std::string buf(static_cast<std::size_t>(n) + 1, '\0');
    std::snprintf(buf.data(), buf.size(), format, args...);
    buf.pop_back();
    out_ += buf;
  }

  Box bounds_;
  PlotStyle style_;
  double width_ = 0.0;
  double height_ = 0.0;
  std::string out_;
};

void RequireFrames(const EpisodeTrace& trace) {
  if (trace.frames.empty()) throw InvalidArgument("trace has no frames");
}

// Frame index of the first collision, or the last frame.
std::size_t EndFrame(const EpisodeTrace& trace) {
  if (trace.collision_tick >= 0) {
    for (std::size_t i = 0; i < trace.frames.size(); ++i) {
      if (trace.frames[i].tick == trace.collision_tick) return i;
    }
  }
  return trace.frames.size() - 1;
}

std::vector<Vec2> RobotPath(const EpisodeTrace& trace, std::size_t last) {
  std::vector<Vec2> path;
  path.reserve(last + 1);
  for (std::size_t i = 0; i <= last; ++i) path.push_back(trace.frames[i].robot.position);
  return path;
}

constexpr double kRobotRadius = 0.012;  // drawing only

// ---- files ----

void EnsureDirectory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) IoFail("cannot create directory " + dir.string());
}

void WriteFile(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.flush();
  if (!out) IoFail("cannot write " + path.string());
}

std::string TrialName(int trial, const char* suffix) {
  char name[64];
  std::snprintf(name, sizeof(name), "trial_%04d%s", trial, suffix);
  return name;
}

}  // namespace

void ExperimentSpec::Validate() const {
  if (trials < 1) ConfigFail("trials must be >= 1");
  if (workers < 1) ConfigFail("workers must be >= 1");
  if (emit_plots && out_dir.empty()) ConfigFail("plots need an output directory");
  PipelineConfig c = config;
  c.mode = mode;
  c.Validate();
}

ModeSummary Aggregate(PipelineMode mode, int agents, std::span<const RunRecord> records) {
  const AblationSummary base = Summarize(mode, records);
  ModeSummary s;
  s.mode = mode;
  s.agents = agents;
  s.trials = base.trials;
  s.success_rate = base.success_rate;
  s.collision_rate = base.collision_rate;
  s.timeout_rate = base.timeout_rate;
  s.mean_steps = base.mean_steps;
  if (records.empty()) return s;
  const StageTimings t = ReportTimings(records);
  s.mean_dagap_s = t.dagap_s;
  s.mean_cfs_s = t.cfs_s;
  s.mean_ssa_s = t.ssa_s;
  double refined = 0.0;
  double feasible = 0.0;
  for (const RunRecord& r : records) {
    refined += r.cfs_refined;
    feasible += r.cfs_feasible;
  }
  s.cfs_feasibility_rate = Ratio(feasible, refined);
  return s;
}

StageTimings ReportTimings(std::span<const RunRecord> records) {
  if (records.empty()) throw InvalidArgument("no records to time");
  double plans = 0.0;
  double steps = 0.0;
  StageTimings sum;
  for (const RunRecord& r : records) {
    plans += r.plans;
    steps += static_cast<double>(r.steps);
    sum.dagap_s += r.dagap_s;
    sum.cfs_s += r.cfs_s;
    sum.ssa_s += r.ssa_s;
  }
  return StageTimings{Ratio(sum.dagap_s, plans), Ratio(sum.cfs_s, plans),
                      Ratio(sum.ssa_s, steps)};
}

std::string TrialJson(const RunRecord& r, int trial, bool with_timings) {
  Json j;
  j["trial"] = trial;
  j["seed"] = r.seed;
  j["outcome"] = ToString(r.outcome);
  j["steps"] = r.steps;
  j["reached_goal"] = r.reached_goal;
  j["collision_tick"] = r.collision_tick;
  j["collision_agent"] = r.collision_agent;
  j["collision_count"] = r.collision_count;
  j["plans"] = r.plans;
  j["ssa_fallbacks"] = r.ssa_fallbacks;
  j["min_clearance"] = Finite(r.min_clearance);
  j["cfs_refined"] = r.cfs_refined;
  j["cfs_feasible"] = r.cfs_feasible;
  if (with_timings) {
    j["dagap_s"] = r.dagap_s;
    j["cfs_s"] = r.cfs_s;
    j["ssa_s"] = r.ssa_s;
  }
  return j.dump();
}

RunRecord ParseTrialJson(const std::string& line, int* trial) {
  RunRecord r;
  try {
    const Json j = Json::parse(line);
    if (trial) *trial = j.at("trial").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.outcome = ParseOutcome(j.at("outcome").get<std::string>());
    r.steps = j.at("steps").get<std::int64_t>();
    r.reached_goal = j.at("reached_goal").get<bool>();
    r.collision_tick = j.at("collision_tick").get<std::int64_t>();
    r.collision_agent = j.at("collision_agent").get<int>();
    r.collision_count = j.at("collision_count").get<int>();
    r.plans = j.at("plans").get<int>();
    r.ssa_fallbacks = j.at("ssa_fallbacks").get<int>();
    r.min_clearance = FromFinite(j.at("min_clearance"));
    r.cfs_refined = j.at("cfs_refined").get<int>();
    r.cfs_feasible = j.at("cfs_feasible").get<int>();
    r.dagap_s = j.value("dagap_s", 0.0);
    r.cfs_s = j.value("cfs_s", 0.0);
    r.ssa_s = j.value("ssa_s", 0.0);
  } catch (const Json::exception& e) {
    ConfigFail(std::string("malformed trial row: ") + e.what());
  }
  return r;
}

std::string SummaryJson(const ModeSummary& s) {
  Json j;
  j["mode"] = ToString(s.mode);
  j["agents"] = s.agents;
  j["trials"] = s.trials;
  j["success_rate"] = s.success_rate;
  j["collision_rate"] = s.collision_rate;
  j["timeout_rate"] = s.timeout_rate;
  j["mean_steps"] = s.mean_steps;
  j["mean_dagap_s"] = s.mean_dagap_s;
  j["mean_cfs_s"] = s.mean_cfs_s;
  j["mean_ssa_s"] = s.mean_ssa_s;
  j["cfs_feasibility_rate"] = s.cfs_feasibility_rate;
  return j.dump(2);
}

void WriteSummaryCsv(std::ostream& out, std::span<const ModeSummary> rows) {
  out << "agents,mode,trials,success_rate,collision_rate,timeout_rate,mean_steps,"
         "mean_dagap_s,mean_cfs_s,mean_ssa_s,cfs_feasibility_rate\n";
  char line[512];
  for (const ModeSummary& s : rows) {
    std::snprintf(line, sizeof(line), "%d,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  s.agents, ToString(s.mode), s.trials, s.success_rate, s.collision_rate,
                  s.timeout_rate, s.mean_steps, s.mean_dagap_s, s.mean_cfs_s, s.mean_ssa_s,
                  s.cfs_feasibility_rate);
    out << line;
  }
}

std::string FormatSummaryTable(std::span<const ModeSummary> rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-7s %-10s %6s %8s %9s %8s %9s %9s %9s %9s %8s\n", "agents",
                "mode", "trials", "success", "collision", "timeout", "steps", "dagap_ms",
                "cfs_ms", "ssa_ms", "cfs_feas");
  out += line;
  for (const ModeSummary& s : rows) {
    std::snprintf(line, sizeof(line),
                  "%-7d %-10s %6d %7.1f%% %8.1f%% %7.1f%% %9.1f %9.3f %9.3f %9.4f %7.1f%%\n",
                  s.agents, ToString(s.mode), s.trials, 100.0 * s.success_rate,
                  100.0 * s.collision_rate, 100.0 * s.timeout_rate, s.mean_steps,
                  1e3 * s.mean_dagap_s, 1e3 * s.mean_cfs_s, 1e3 * s.mean_ssa_s,
                  UsesCfs(s.mode) ? 100.0 * s.cfs_feasibility_rate : 0.0);
    out += line;
  }
  return out;
}

std::string RenderPathSvg(const EpisodeTrace& trace, const PlotStyle& style) {
  RequireFrames(trace);
  const WorldState& first = trace.frames.front();
  const WorldState& last = trace.frames.back();
  Canvas canvas(first.bounds, style);
  canvas.Goal(trace.goal, trace.goal_radius);
  canvas.Disc(first.robot.position, kRobotRadius, "#1565c0", 1.0);
  for (const AgentTruth& a : last.agents) canvas.Disc(a.position, a.radius, "#9e9e9e", 0.6);
  canvas.Path(RobotPath(trace, trace.frames.size() - 1), 1.5);
  if (trace.collision_tick >= 0) {
    canvas.Cross(trace.frames[EndFrame(trace)].robot.position, 5.0);
  }
  return canvas.Finish();
}

std::string RenderSnapshotSvg(const EpisodeTrace& trace, const PlotStyle& style) {
  RequireFrames(trace);
  const std::size_t end = EndFrame(trace);
  const std::size_t stride = static_cast<std::size_t>(std::max(1, style.snapshot_stride));
  std::vector<std::size_t> picks;
  for (int j = std::max(1, style.snapshot_count) - 1; j >= 0; --j) {
    const std::size_t back = static_cast<std::size_t>(j) * stride;
    if (back <= end) picks.push_back(end - back);
  }
  Canvas canvas(trace.frames.front().bounds, style);
  canvas.Goal(trace.goal, trace.goal_radius);
  canvas.Path(RobotPath(trace, end), 1.0);
  const double m = static_cast<double>(picks.size());
  for (std::size_t r = 0; r < picks.size(); ++r) {
    // darkest first
    const double opacity = m > 1.0 ? 0.9 - 0.7 * static_cast<double>(r) / (m - 1.0) : 0.9;
    const WorldState& f = trace.frames[picks[r]];
    for (const AgentTruth& a : f.agents) canvas.Disc(a.position, a.radius, "#37474f", opacity);
    canvas.Disc(f.robot.position, kRobotRadius, "#d32f2f", opacity);
  }
  if (trace.collision_tick >= 0) canvas.Cross(trace.frames[end].robot.position, 5.0);
  return canvas.Finish();
}

void WriteTraceCsv(std::ostream& out, const EpisodeTrace& trace) {
  WriteTraceHeader(out);
  for (const WorldState& f : trace.frames) WriteTraceRows(out, f);
}

ExperimentResult RunExperiment(const ExperimentSpec& spec) {
  spec.Validate();
  PipelineConfig config = spec.config;
  config.mode = spec.mode;
  config.record_trace = spec.emit_plots;
  const fs::path dir = spec.out_dir;
  const fs::path plots = dir / "plots";
  if (!spec.out_dir.empty()) EnsureDirectory(dir);
  if (spec.emit_plots) EnsureDirectory(plots);

  ExperimentResult result;
  result.records.resize(static_cast<std::size_t>(spec.trials));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    PipelineConfig c = config;
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= spec.trials || failed.load()) return;
      try {
        c.scenario.rng_seed = TrialSeed(spec.base_seed, static_cast<std::uint64_t>(i));
        RunRecord r = RunEpisode(c);
        if (spec.emit_plots && r.trace) {
          WriteFile(plots / TrialName(i, ".svg"), RenderPathSvg(*r.trace));
          if (r.trace->collision_tick >= 0) {
            WriteFile(plots / TrialName(i, "_snapshots.svg"), RenderSnapshotSvg(*r.trace));
          }
          std::ostringstream csv;
          WriteTraceCsv(csv, *r.trace);
          WriteFile(plots / TrialName(i, ".csv"), csv.str());
        }
        r.trace.reset();
        result.records[static_cast<std::size_t>(i)] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  const int workers = std::min(spec.workers, spec.trials);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  result.summary = Aggregate(spec.mode, config.scenario.n_agents, result.records);
  if (!spec.out_dir.empty()) {
    std::string rows;
    for (int i = 0; i < spec.trials; ++i) {
      rows += TrialJson(result.records[static_cast<std::size_t>(i)], i);
      rows += '\n';
    }
    WriteFile(dir / "trials.jsonl", rows);
    WriteFile(dir / "summary.json", SummaryJson(result.summary) + "\n");
    std::ostringstream csv;
    WriteSummaryCsv(csv, std::span<const ModeSummary>(&result.summary, 1));
    WriteFile(dir / "summary.csv", csv.str());
  }
  return result;
}

void ApplyConfig(std::istream& in, PipelineConfig* config) {
  std::vector<std::pair<std::string, std::string>> source;
  std::vector<std::pair<std::string, std::string>> module;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      ConfigFail("line " + std::to_string(number) + ": expected key = value");
    }
    std::string key = Trim(line.substr(0, eq));
    std::string value = Trim(line.substr(eq + 1));
    if (SourceKeys().count(key)) {
      source.emplace_back(std::move(key), std::move(value));
    } else if (ModuleKeys().count(key)) {
      module.emplace_back(std::move(key), std::move(value));
    } else {
      ConfigFail("line " + std::to_string(number) + ": unknown key '" + key + "'");
    }
  }
  PipelineConfig c = *config;
  for (const auto& [key, value] : source) SourceKeys().at(key)(c, value);
  c.Sync();
  for (const auto& [key, value] : module) ModuleKeys().at(key)(c, value);
  *config = c;
}

PipelineConfig LoadConfig(const std::string& path, const PipelineConfig& base) {
  std::ifstream in(path);
  if (!in) IoFail("cannot open config " + path);
  PipelineConfig c = base;
  ApplyConfig(in, &c);
  return c;
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const auto& [key, setter] : SourceKeys()) keys.push_back(key);
  for (const auto& [key, setter] : ModuleKeys()) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace crowdnav
