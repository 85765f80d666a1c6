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

#include <gtest/gtest.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace crowdnav {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() /
              ("crowdnav_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

ExperimentSpec Spec(int agents, int trials, int workers) {
  ExperimentSpec s;
  s.config = DefaultPipelineConfig();
  s.config.scenario.n_agents = agents;
  s.mode = PipelineMode::kFull;
  s.trials = trials;
  s.workers = workers;
  s.base_seed = 4242;
  return s;
}

RunRecord RandomRecord(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> small(0, 400);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RunRecord r;
  r.seed = rng();
  r.outcome = static_cast<Outcome>(small(rng) % 3);
  r.steps = small(rng) * 7;
  r.reached_goal = r.outcome == Outcome::kSuccess;
  r.collision_tick = r.outcome == Outcome::kCollision ? small(rng) : -1;
  r.collision_agent = r.outcome == Outcome::kCollision ? small(rng) % 50 : -1;
  r.collision_count = r.outcome == Outcome::kCollision ? 1 : 0;
  r.plans = small(rng) + 1;
  r.ssa_fallbacks = small(rng) % 5;
  r.min_clearance = small(rng) % 10 == 0 ? std::numeric_limits<double>::infinity()
                                          : unit(rng) * 0.3 - 0.05;
  r.cfs_refined = 2 * r.plans;
  r.cfs_feasible = small(rng) % (r.cfs_refined + 1);
  r.dagap_s = unit(rng) * 1e-2;
  r.cfs_s = unit(rng) * 1e-2;
  r.ssa_s = unit(rng) * 1e-4;
  return r;
}

void ExpectSameOutcomes(const RunRecord& a, const RunRecord& b) {
  EXPECT_EQ(TrialJson(a, 0, false), TrialJson(b, 0, false));
}

void ExpectSameSummary(const ModeSummary& a, const ModeSummary& b) {
  EXPECT_EQ(a.mode, b.mode);
  EXPECT_EQ(a.agents, b.agents);
  EXPECT_EQ(a.trials, b.trials);
  EXPECT_EQ(a.success_rate, b.success_rate);
  EXPECT_EQ(a.collision_rate, b.collision_rate);
  EXPECT_EQ(a.timeout_rate, b.timeout_rate);
  EXPECT_EQ(a.mean_steps, b.mean_steps);
  EXPECT_EQ(a.mean_dagap_s, b.mean_dagap_s);
  EXPECT_EQ(a.mean_cfs_s, b.mean_cfs_s);
  EXPECT_EQ(a.mean_ssa_s, b.mean_ssa_s);
  EXPECT_EQ(a.cfs_feasibility_rate, b.cfs_feasibility_rate);
}

Error::Kind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return Error::Kind::kInternal;
}

TEST(ExperimentSpecTest, RejectsInvalidSpecs) {
  ExperimentSpec s = Spec(0, 1, 1);
  EXPECT_NO_THROW(s.Validate());
  s.trials = 0;
  EXPECT_EQ(KindOf([&] { s.Validate(); }), Error::Kind::kConfig);
  s = Spec(0, 1, 0);
  EXPECT_EQ(KindOf([&] { s.Validate(); }), Error::Kind::kConfig);
  s = Spec(0, 1, 1);
  s.emit_plots = true;
  EXPECT_EQ(KindOf([&] { s.Validate(); }), Error::Kind::kConfig);
  s = Spec(0, 1, 1);
  s.config.horizon = 0;
  EXPECT_EQ(KindOf([&] { RunExperiment(s); }), Error::Kind::kConfig);
}

TEST(ReportTimingsTest, MeansPerPlanAndPerStep) {
  std::vector<RunRecord> records(2);
  records[0].plans = 1;
  records[0].steps = 10;
  records[0].dagap_s = 1.0;
  records[0].cfs_s = 1.0;
  records[0].ssa_s = 1.0;
  records[1].plans = 1;
  records[1].steps = 30;
  records[1].dagap_s = 3.0;
  records[1].cfs_s = 5.0;
  records[1].ssa_s = 3.0;
  const StageTimings t = ReportTimings(records);
  EXPECT_EQ(t.dagap_s, 2.0);
  EXPECT_EQ(t.cfs_s, 3.0);
  EXPECT_EQ(t.ssa_s, 0.1);
  EXPECT_EQ(KindOf([] { ReportTimings({}); }), Error::Kind::kInvalidArgument);
}

TEST(AggregateTest, RatesPartitionTrials) {
  std::mt19937_64 rng(3);
  for (int n : {1, 2, 7, 100}) {
    std::vector<RunRecord> records;
    for (int i = 0; i < n; ++i) records.push_back(RandomRecord(rng));
    const ModeSummary s = Aggregate(PipelineMode::kFull, 20, records);
    EXPECT_EQ(s.trials, n);
    EXPECT_NEAR(s.success_rate + s.collision_rate + s.timeout_rate, 1.0, 1e-15);
    if (n == 1) {
      for (double r : {s.success_rate, s.collision_rate, s.timeout_rate}) {
        EXPECT_TRUE(r == 0.0 || r == 1.0);
      }
    }
    EXPECT_GE(s.cfs_feasibility_rate, 0.0);
    EXPECT_LE(s.cfs_feasibility_rate, 1.0);
  }
}

TEST(TrialJsonTest, RowsRoundTripAndReaggregateExactly) {
  std::mt19937_64 rng(11);
  std::vector<RunRecord> records;
  for (int i = 0; i < 200; ++i) records.push_back(RandomRecord(rng));
  std::vector<RunRecord> parsed;
  for (int i = 0; i < 200; ++i) {
    const std::string row = TrialJson(records[i], i);
    EXPECT_EQ(row.find('\n'), std::string::npos);
    int trial = -1;
    parsed.push_back(ParseTrialJson(row, &trial));
    EXPECT_EQ(trial, i);
    EXPECT_EQ(TrialJson(parsed.back(), i), row);
  }
  ExpectSameSummary(Aggregate(PipelineMode::kDynamicGap, 50, records),
                    Aggregate(PipelineMode::kDynamicGap, 50, parsed));
  EXPECT_EQ(TrialJson(records[0], 0, false).find("dagap_s"), std::string::npos);
}

TEST(TrialJsonTest, MalformedRowsAreRejected) {
  EXPECT_EQ(KindOf([] { ParseTrialJson("{not json"); }), Error::Kind::kConfig);
  EXPECT_EQ(KindOf([] { ParseTrialJson("{\"trial\": 1}"); }), Error::Kind::kConfig);
  std::mt19937_64 rng(1);
  std::string row = TrialJson(RandomRecord(rng), 0);
  const auto at = row.find("\"outcome\":\"");
  row.insert(at + 11, "x");
  EXPECT_EQ(KindOf([&] { ParseTrialJson(row); }), Error::Kind::kConfig);
}

TEST(SummaryTableTest, OneLinePerRow) {
  std::vector<ModeSummary> rows(8);
  const std::string table = FormatSummaryTable(rows);
  EXPECT_EQ(Lines(table).size(), 9u);
  std::ostringstream csv;
  WriteSummaryCsv(csv, rows);
  const std::vector<std::string> lines = Lines(csv.str());
  ASSERT_EQ(lines.size(), 9u);
  EXPECT_EQ(lines[0].rfind("agents,mode,trials,", 0), 0u);
}

TEST(RunExperimentTest, WorkerCountDoesNotChangeOutcomes) {
  const ExperimentResult serial = RunExperiment(Spec(20, 8, 1));
  const ExperimentResult parallel = RunExperiment(Spec(20, 8, 4));
  ASSERT_EQ(serial.records.size(), 8u);
  ASSERT_EQ(parallel.records.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(serial.records[i].seed, TrialSeed(4242, i));
    ExpectSameOutcomes(serial.records[i], parallel.records[i]);
  }
  EXPECT_EQ(serial.summary.success_rate, parallel.summary.success_rate);
  EXPECT_EQ(serial.summary.collision_rate, parallel.summary.collision_rate);
  EXPECT_EQ(serial.summary.mean_steps, parallel.summary.mean_steps);
}

TEST(RunExperimentTest, WritesRowsThatReaggregateToTheSummary) {
  TempDir dir("experiment");
  ExperimentSpec spec = Spec(20, 6, 3);
  spec.out_dir = (dir.path() / "run").string();
  const ExperimentResult result = RunExperiment(spec);
  const std::vector<std::string> rows = Lines(ReadAll(dir.path() / "run" / "trials.jsonl"));
  ASSERT_EQ(rows.size(), 6u);
  std::vector<RunRecord> parsed;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int trial = -1;
    parsed.push_back(ParseTrialJson(rows[i], &trial));
    EXPECT_EQ(trial, static_cast<int>(i));
  }
  ExpectSameSummary(Aggregate(spec.mode, 20, parsed), result.summary);
  EXPECT_EQ(ReadAll(dir.path() / "run" / "summary.json"), SummaryJson(result.summary) + "\n");
  EXPECT_EQ(Lines(ReadAll(dir.path() / "run" / "summary.csv")).size(), 2u);
  EXPECT_FALSE(fs::exists(dir.path() / "run" / "plots"));

  // Rerun: identical rows once timings are dropped.
  const ExperimentResult again = RunExperiment(spec);
  for (std::size_t i = 0; i < 6; ++i) ExpectSameOutcomes(parsed[i], again.records[i]);
}

TEST(RunExperimentTest, UnwritableDirectoryIsAnIoError) {
  TempDir dir("blocked");
  const fs::path file = dir.path() / "file";
  std::ofstream(file) << "x";
  ExperimentSpec spec = Spec(0, 1, 1);
  spec.out_dir = (file / "run").string();
  EXPECT_EQ(KindOf([&] { RunExperiment(spec); }), Error::Kind::kIo);
}

TEST(RunExperimentTest, PlotsEveryTrial) {
  TempDir dir("plots");
  ExperimentSpec spec = Spec(50, 3, 2);
  spec.mode = PipelineMode::kStaticGap;
  spec.out_dir = dir.path().string();
  spec.emit_plots = true;
  const ExperimentResult result = RunExperiment(spec);
  for (int i = 0; i < 3; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%04d", i);
    const fs::path base = dir.path() / "plots" / name;
    const std::string svg = ReadAll(base.string() + ".svg");
    EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
    const std::vector<std::string> csv = Lines(ReadAll(base.string() + ".csv"));
    const RunRecord& r = result.records[static_cast<std::size_t>(i)];
    EXPECT_EQ(csv.size(), 1u + static_cast<std::size_t>(r.steps + 1) * 51u);
    EXPECT_EQ(fs::exists(base.string() + "_snapshots.svg"), r.outcome == Outcome::kCollision);
    EXPECT_EQ(r.trace, nullptr);
  }
}

// Robot moving up the y axis past two agents; the third frame collides.
EpisodeTrace SyntheticTrace(bool collide) {
  EpisodeTrace t;
  t.goal = Vec2(0.0, 0.95);
  t.goal_radius = 0.05;
  for (int k = 0; k < 8; ++k) {
    WorldState w;
    w.tick = k;
    w.bounds = Box{Vec2(-1.0, -1.0), Vec2(1.0, 1.0)};
    w.robot.position = Vec2(0.01 * std::sin(0.5 * k), -0.95 + 0.1 * k);
    w.agents.push_back({0, Vec2(0.3 - 0.02 * k, -0.5), Vec2(-0.02, 0.0), 0.05});
    w.agents.push_back({1, Vec2(-0.4, 0.1 * k), Vec2(0.0, 0.1), 0.05});
    t.frames.push_back(w);
    if (collide && k == 3) {
      t.collision_tick = 3;
      break;
    }
  }
  return t;
}

void ExpectGolden(const std::string& name, const std::string& content) {
  const std::string path = std::string(CROWDNAV_GOLDEN_DIR) + "/" + name;
  const char* update = std::getenv("CROWDNAV_UPDATE_GOLDEN");
  if (update && std::string(update) == "1") {
    std::ofstream(path, std::ios::binary) << content;
    return;
  }
  std::ifstream in(path, std::ios::binary);
  ASSERT_TRUE(in.good()) << "missing " << path;
  std::stringstream golden;
  golden << in.rdbuf();
  EXPECT_EQ(content, golden.str()) << name;
}

TEST(PlotTest, OutputIsByteStable) {
  PlotStyle style;
  style.snapshot_count = 3;
  style.snapshot_stride = 2;
  ExpectGolden("plot_path.svg", RenderPathSvg(SyntheticTrace(false)));
  ExpectGolden("plot_collision.svg", RenderPathSvg(SyntheticTrace(true)));
  ExpectGolden("plot_snapshots.svg", RenderSnapshotSvg(SyntheticTrace(true), style));
  EXPECT_EQ(RenderPathSvg(SyntheticTrace(true)), RenderPathSvg(SyntheticTrace(true)));
}

TEST(PlotTest, CollisionPathEndsAtTheMarker) {
  const std::string svg = RenderPathSvg(SyntheticTrace(true));
  const auto start = svg.find("points=\"") + 8;
  const std::string points = svg.substr(start, svg.find('"', start) - start);
  const std::string last = points.substr(points.rfind(' ') + 1);
  double px = 0.0;
  double py = 0.0;
  ASSERT_EQ(std::sscanf(last.c_str(), "%lf,%lf", &px, &py), 2);
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  const auto line = svg.find("<line ");
  ASSERT_NE(line, std::string::npos);
  ASSERT_EQ(std::sscanf(svg.c_str() + line, "<line x1=\"%lf\" y1=\"%lf\" x2=\"%lf\" y2=\"%lf\"",
                        &x1, &y1, &x2, &y2),
            4);
  EXPECT_NEAR(0.5 * (x1 + x2), px, 1e-5);
  EXPECT_NEAR(0.5 * (y1 + y2), py, 1e-5);
  EXPECT_EQ(RenderPathSvg(SyntheticTrace(false)).find("<line "), std::string::npos);
}

TEST(PlotTest, EmptyWorldPathIsStraight) {
  PipelineConfig c = DefaultPipelineConfig();
  c.scenario.n_agents = 0;
  c.record_trace = true;
  const RunRecord r = RunEpisode(c);
  ASSERT_EQ(r.outcome, Outcome::kSuccess);
  const std::string svg = RenderPathSvg(*r.trace);
  EXPECT_EQ(svg.find("<line "), std::string::npos);
  const auto start = svg.find("points=\"") + 8;
  std::istringstream points(svg.substr(start, svg.find('"', start) - start));
  const PlotStyle style;
  const double center_x = style.margin + 1.0 * style.scale;
  int count = 0;
  for (std::string p; points >> p; ++count) {
    double x = 0.0;
    double y = 0.0;
    ASSERT_EQ(std::sscanf(p.c_str(), "%lf,%lf", &x, &y), 2);
    EXPECT_NEAR(x, center_x, 1e-5);
  }
  EXPECT_EQ(count, static_cast<int>(r.steps) + 1);
  EXPECT_EQ(KindOf([] { RenderPathSvg(EpisodeTrace{}); }), Error::Kind::kInvalidArgument);
}

TEST(ConfigTest, ScenarioKeysSyncBeforeModuleKeys) {
  std::istringstream in(
      "# module keys first on purpose\n"
      "gap.r_ins = 0.06\n"
      "limits.u_max=0.004   # trailing comment\n"
      "scenario.agent_radius = 0.04\n"
      "scenario.sensing_range = 0.3\n"
      "scenario.goal = 0.1, 0.9\n"
      "scenario.robot_model = unicycle\n"
      "scenario.boundary = wrap\n"
      "\n"
      "mode = dagap-cfs\n"
      "pfm.all_agents = true\n");
  PipelineConfig c = DefaultPipelineConfig();
  ApplyConfig(in, &c);
  EXPECT_EQ(c.scenario.agent_radius, 0.04);
  EXPECT_EQ(c.dagap.gap.r_ins, 0.06);
  EXPECT_EQ(c.dagap.gap.max_range, 0.3);
  EXPECT_DOUBLE_EQ(c.safety.d_min, 0.06);
  EXPECT_EQ(c.limits.u_max, 0.004);
  EXPECT_EQ(c.scenario.goal, Vec2(0.1, 0.9));
  EXPECT_EQ(c.scenario.robot_model, RobotModel::kSecondOrderUnicycle);
  EXPECT_EQ(c.scenario.boundary, BoundaryPolicy::kWrap);
  EXPECT_EQ(c.mode, PipelineMode::kDynamicGapCfs);
  EXPECT_TRUE(c.dagap.pfm.all_agents);
}

TEST(ConfigTest, RejectsBadInput) {
  for (const char* text : {"nonsense.key = 1\n", "horizon = 2.5\n", "horizon\n",
                           "scenario.goal = 1\n", "threaded = maybe\n", "dt = inf\n",
                           "mode = fast\n", "scenario.robot_model = car\n"}) {
    std::istringstream in(text);
    PipelineConfig c = DefaultPipelineConfig();
    EXPECT_EQ(KindOf([&] { ApplyConfig(in, &c); }), Error::Kind::kConfig) << text;
  }
  EXPECT_EQ(KindOf([] { LoadConfig("/nonexistent/crowdnav.conf"); }), Error::Kind::kIo);
}

TEST(ConfigTest, EveryKeyIsAccepted) {
  const std::vector<std::string> keys = ConfigKeys();
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_GE(keys.size(), 60u);
  for (const std::string& key : keys) {
    std::string value = "1";
    if (key == "scenario.world_size" || key == "scenario.robot_start" || key == "scenario.goal") {
      value = "0.5, 0.5";
    } else if (key == "mode") {
      value = "sgap";
    } else if (key == "scenario.robot_model") {
      value = "double-integrator";
    } else if (key == "scenario.boundary") {
      value = "reflect";
    }
    std::istringstream in(key + " = " + value + "\n");
    PipelineConfig c = DefaultPipelineConfig();
    EXPECT_NO_THROW(ApplyConfig(in, &c)) << key;
  }
}

TEST(ConfigTest, LoadsFromFile) {
  TempDir dir("config");
  const fs::path path = dir.path() / "run.conf";
  std::ofstream(path) << "scenario.n_agents = 7\nhorizon = 12\n";
  const PipelineConfig c = LoadConfig(path.string());
  EXPECT_EQ(c.scenario.n_agents, 7);
  EXPECT_EQ(c.horizon, 12);
}

}  // namespace
}  // namespace crowdnav
