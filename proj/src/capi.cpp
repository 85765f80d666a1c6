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

#include "crowdnav/crowdnav.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "crowdnav/harness.hpp"

struct cn_config {
  std::string text;  // accumulated key = value lines
};

struct cn_spec {
  crowdnav::ExperimentSpec spec;
};

struct cn_result {
  crowdnav::ExperimentResult result;
};

namespace {

crowdnav::Error IoError(const std::string& what) {
  return crowdnav::Error(crowdnav::Error::Kind::kIo, what);
}

thread_local std::string g_last_error;

cn_status Record(cn_status status, const std::string& what) {
  g_last_error = what;
  return status;
}

cn_status FromKind(crowdnav::Error::Kind kind) {
  switch (kind) {
    case crowdnav::Error::Kind::kInvalidArgument:
      return CN_ERR_INVALID_ARGUMENT;
    case crowdnav::Error::Kind::kConfig:
      return CN_ERR_CONFIG;
    case crowdnav::Error::Kind::kIo:
      return CN_ERR_IO;
    case crowdnav::Error::Kind::kNumeric:
      return CN_ERR_NUMERIC;
    case crowdnav::Error::Kind::kInternal:
      return CN_ERR_INTERNAL;
  }
  return CN_ERR_INTERNAL;
}

// Runs `f`, mapping exceptions to status codes; nothing escapes.
template <typename F>
cn_status Guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return CN_OK;
  } catch (const crowdnav::Error& e) {
    return Record(FromKind(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return Record(CN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Record(CN_ERR_INTERNAL, e.what());
  } catch (...) {
    return Record(CN_ERR_INTERNAL, "unknown error");
  }
}

cn_status Null(const char* what) {
  return Record(CN_ERR_INVALID_ARGUMENT, std::string(what) + " is null");
}

crowdnav::PipelineConfig Materialize(const std::string& text) {
  crowdnav::PipelineConfig c = crowdnav::DefaultPipelineConfig();
  std::istringstream in(text);
  crowdnav::ApplyConfig(in, &c);
  return c;
}

std::vector<crowdnav::ModeSummary> Rows(const cn_result* const* results, int count) {
  if (count < 0) throw crowdnav::InvalidArgument("negative result count");
  if (count > 0 && !results) throw crowdnav::InvalidArgument("results is null");
  std::vector<crowdnav::ModeSummary> rows;
  for (int i = 0; i < count; ++i) {
    if (!results[i]) throw crowdnav::InvalidArgument("result is null");
    rows.push_back(results[i]->result.summary);
  }
  return rows;
}

}  // namespace

extern "C" {

const char* cn_version(void) { return "1.0.0"; }

const char* cn_last_error(void) { return g_last_error.c_str(); }

const char* cn_status_name(cn_status status) {
  switch (status) {
    case CN_OK:
      return "ok";
    case CN_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case CN_ERR_CONFIG:
      return "config error";
    case CN_ERR_IO:
      return "io error";
    case CN_ERR_NUMERIC:
      return "numeric error";
    case CN_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

cn_status cn_config_create(cn_config** out) {
  if (!out) return Null("out");
  return Guard([&] { *out = new cn_config(); });
}

void cn_config_destroy(cn_config* config) { delete config; }

cn_status cn_config_load(cn_config* config, const char* path) {
  if (!config) return Null("config");
  if (!path) return Null("path");
  return Guard([&] {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open config ") + path);
    std::stringstream s;
    s << in.rdbuf();
    std::string text = config->text + s.str() + "\n";
    Materialize(text);  // validates
    config->text = std::move(text);
  });
}

cn_status cn_config_set(cn_config* config, const char* key, const char* value) {
  if (!config) return Null("config");
  if (!key) return Null("key");
  if (!value) return Null("value");
  return Guard([&] {
    const std::string line = std::string(key) + " = " + value;
    if (line.find_first_of("\n#") != std::string::npos) {
      throw crowdnav::Error(crowdnav::Error::Kind::kConfig,
                            "key or value contains '#' or a newline");
    }
    std::string text = config->text + line + "\n";
    Materialize(text);
    config->text = std::move(text);
  });
}

cn_status cn_spec_create(const cn_config* config, const char* mode, cn_spec** out) {
  if (!config) return Null("config");
  if (!mode) return Null("mode");
  if (!out) return Null("out");
  return Guard([&] {
    auto s = std::make_unique<cn_spec>();
    s->spec.config = Materialize(config->text);
    s->spec.mode = crowdnav::ParseMode(mode);
    *out = s.release();
  });
}

void cn_spec_destroy(cn_spec* spec) { delete spec; }

cn_status cn_spec_set_agents(cn_spec* spec, int agents) {
  if (!spec) return Null("spec");
  if (agents < 0) return Record(CN_ERR_CONFIG, "agents must be >= 0");
  spec->spec.config.scenario.n_agents = agents;
  g_last_error.clear();
  return CN_OK;
}

cn_status cn_spec_set_trials(cn_spec* spec, int trials) {
  if (!spec) return Null("spec");
  if (trials < 1) return Record(CN_ERR_CONFIG, "trials must be >= 1");
  spec->spec.trials = trials;
  g_last_error.clear();
  return CN_OK;
}

cn_status cn_spec_set_seed(cn_spec* spec, uint64_t base_seed) {
  if (!spec) return Null("spec");
  spec->spec.base_seed = base_seed;
  g_last_error.clear();
  return CN_OK;
}

cn_status cn_spec_set_workers(cn_spec* spec, int workers) {
  if (!spec) return Null("spec");
  if (workers < 1) return Record(CN_ERR_CONFIG, "workers must be >= 1");
  spec->spec.workers = workers;
  g_last_error.clear();
  return CN_OK;
}

cn_status cn_spec_set_output(cn_spec* spec, const char* dir, int emit_plots) {
  if (!spec) return Null("spec");
  const std::string d = dir ? dir : "";
  if (emit_plots && d.empty()) return Record(CN_ERR_CONFIG, "plots need an output directory");
  return Guard([&] {
    spec->spec.out_dir = d;
    spec->spec.emit_plots = emit_plots != 0;
  });
}

cn_status cn_spec_set_continue_after_collision(cn_spec* spec, int enabled) {
  if (!spec) return Null("spec");
  spec->spec.config.continue_after_collision = enabled != 0;
  g_last_error.clear();
  return CN_OK;
}

cn_status cn_run(const cn_spec* spec, cn_result** out) {
  if (!spec) return Null("spec");
  if (!out) return Null("out");
  return Guard([&] {
    auto r = std::make_unique<cn_result>();
    r->result = crowdnav::RunExperiment(spec->spec);
    *out = r.release();
  });
}

void cn_result_destroy(cn_result* result) { delete result; }

cn_status cn_result_summary(const cn_result* result, cn_summary* out) {
  if (!result) return Null("result");
  if (!out) return Null("out");
  const crowdnav::ModeSummary& s = result->result.summary;
  out->agents = s.agents;
  out->trials = s.trials;
  out->success_rate = s.success_rate;
  out->collision_rate = s.collision_rate;
  out->timeout_rate = s.timeout_rate;
  out->mean_steps = s.mean_steps;
  out->mean_dagap_s = s.mean_dagap_s;
  out->mean_cfs_s = s.mean_cfs_s;
  out->mean_ssa_s = s.mean_ssa_s;
  out->cfs_feasibility_rate = s.cfs_feasibility_rate;
  g_last_error.clear();
  return CN_OK;
}

cn_status cn_result_mode(const cn_result* result, const char** out) {
  if (!result) return Null("result");
  if (!out) return Null("out");
  *out = crowdnav::ToString(result->result.summary.mode);
  g_last_error.clear();
  return CN_OK;
}

cn_status cn_result_trial_count(const cn_result* result, int* out) {
  if (!result) return Null("result");
  if (!out) return Null("out");
  *out = static_cast<int>(result->result.records.size());
  g_last_error.clear();
  return CN_OK;
}

cn_status cn_result_trial(const cn_result* result, int index, cn_trial* out) {
  if (!result) return Null("result");
  if (!out) return Null("out");
  const auto& records = result->result.records;
  if (index < 0 || static_cast<std::size_t>(index) >= records.size()) {
    return Record(CN_ERR_INVALID_ARGUMENT, "trial index out of range");
  }
  const crowdnav::RunRecord& r = records[static_cast<std::size_t>(index)];
  out->seed = r.seed;
  out->outcome = static_cast<cn_outcome>(r.outcome);
  out->steps = r.steps;
  out->collision_tick = r.collision_tick;
  out->collision_agent = r.collision_agent;
  out->plans = r.plans;
  out->min_clearance = r.min_clearance;
  g_last_error.clear();
  return CN_OK;
}

cn_status cn_format_table(const cn_result* const* results, int count, char* buffer,
                          size_t capacity, size_t* needed) {
  if (!buffer && capacity > 0) return Null("buffer");
  return Guard([&] {
    const std::string table = crowdnav::FormatSummaryTable(Rows(results, count));
    if (needed) *needed = table.size() + 1;
    if (capacity == 0) return;
    const std::size_t n = std::min(capacity - 1, table.size());
    std::memcpy(buffer, table.data(), n);
    buffer[n] = '\0';
  });
}

cn_status cn_write_summary_csv(const cn_result* const* results, int count, const char* path) {
  if (!path) return Null("path");
  return Guard([&] {
    const std::vector<crowdnav::ModeSummary> rows = Rows(results, count);
    std::ofstream out(path, std::ios::binary);
    crowdnav::WriteSummaryCsv(out, rows);
    out.flush();
    if (!out) throw IoError(std::string("cannot write ") + path);
  });
}

}  // extern "C"
