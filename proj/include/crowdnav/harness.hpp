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

// Experiment runner: seeded trials over a worker pool, per-trial JSONL,
// summary tables, trace CSV and SVG plots, and flat key=value configs.

#ifndef CROWDNAV_HARNESS_HPP_
#define CROWDNAV_HARNESS_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/pipeline.hpp"

namespace crowdnav {

struct ExperimentSpec {
  PipelineConfig config;  // config.mode is overridden by `mode`
  PipelineMode mode = PipelineMode::kFull;
  int trials = 1;
  int workers = 1;
  std::uint64_t base_seed = 0;
  std::string out_dir;  // empty: nothing is written
  bool emit_plots = false;

  /// Throws Error(kConfig) unless trials >= 1, workers >= 1, plots have a
  /// directory and the pipeline config is valid.
  void Validate() const;
};

struct ModeSummary {
  PipelineMode mode = PipelineMode::kFull;
  int agents = 0;
  int trials = 0;
  double success_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double mean_steps = 0.0;
  // Per plan for the planner stages, per step for safe control.
  double mean_dagap_s = 0.0;
  double mean_cfs_s = 0.0;
  double mean_ssa_s = 0.0;
  // Refined candidates passing the spacing check; 0 without CFS.
  double cfs_feasibility_rate = 0.0;
};

struct ExperimentResult {
  ModeSummary summary;
  std::vector<RunRecord> records;  // trial order; traces dropped
};

/// Runs every trial with seed TrialSeed(base_seed, i). With an output
/// directory, writes trials.jsonl (trial order), summary.json and
/// summary.csv, and with plots a path SVG and trace CSV per trial plus a
/// snapshot SVG per collision. Prints nothing. Throws Error(kIo) when the
/// directory cannot be created or written.
ExperimentResult RunExperiment(const ExperimentSpec& spec);

ModeSummary Aggregate(PipelineMode mode, int agents, std::span<const RunRecord> records);

/// One JSON object on one line. Doubles round-trip exactly.
std::string TrialJson(const RunRecord& record, int trial, bool with_timings = true);

/// Inverse of TrialJson for the summary fields. Throws Error(kConfig) on a
/// malformed row.
RunRecord ParseTrialJson(const std::string& line, int* trial = nullptr);

std::string SummaryJson(const ModeSummary& summary);
void WriteSummaryCsv(std::ostream& out, std::span<const ModeSummary> rows);
/// Fixed-width text table, one row per summary.
std::string FormatSummaryTable(std::span<const ModeSummary> rows);

struct StageTimings {
  double dagap_s = 0.0;  // per plan
  double cfs_s = 0.0;    // per plan
  double ssa_s = 0.0;    // per step
};

/// Throws Error(kInvalidArgument) on an empty list.
StageTimings ReportTimings(std::span<const RunRecord> records);

struct PlotStyle {
  double scale = 250.0;   // pixels per world unit
  double margin = 10.0;   // pixels
  int snapshot_count = 6;
  int snapshot_stride = 10;  // ticks between snapshots
};

/// World box, goal square, start, final agent discs and the robot path;
/// a cross marks the robot at the first collision.
std::string RenderPathSvg(const EpisodeTrace& trace, const PlotStyle& style = {});

/// The last snapshot_count frames, snapshot_stride apart, ending at the
/// collision (or the last frame). Earlier frames are drawn darker.
std::string RenderSnapshotSvg(const EpisodeTrace& trace, const PlotStyle& style = {});

void WriteTraceCsv(std::ostream& out, const EpisodeTrace& trace);

/// Flat `key = value` lines; `#` starts a comment. Scenario keys are applied
/// first, then PipelineConfig::Sync, then every other key, so module keys
/// override the synced constants. Throws Error(kConfig) on an unknown key or
/// a malformed value.
void ApplyConfig(std::istream& in, PipelineConfig* config);
/// ApplyConfig on a file; Error(kIo) when it cannot be opened.
PipelineConfig LoadConfig(const std::string& path,
                          const PipelineConfig& base = DefaultPipelineConfig());
/// Every accepted key, sorted.
std::vector<std::string> ConfigKeys();

}  // namespace crowdnav

#endif  // CROWDNAV_HARNESS_HPP_
