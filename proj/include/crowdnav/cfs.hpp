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

// Convex feasible set refinement of reference trajectories.
//
// Each keep-out constraint |x_i - o_ij| >= d_ij is replaced by the
// halfspace g^T (x_i - o_ij) >= d_ij, with g the unit vector from the agent
// to the reference waypoint. The halfspace lies outside the disc, so any
// solution of the resulting QP is feasible for the original constraints.

#ifndef CROWDNAV_CFS_HPP_
#define CROWDNAV_CFS_HPP_

#include <span>
#include <vector>

#include "crowdnav/dagap.hpp"
#include "crowdnav/estimation.hpp"
#include "crowdnav/geometry.hpp"
#include "crowdnav/qp.hpp"
#include "crowdnav/uncertainty.hpp"

namespace crowdnav {

struct CfsWeights {
  double w_r = 1.0;  // deviation from the reference
  double w_v = 0.5;  // first differences
  double w_a = 0.5;  // second differences
};

/// The data referenced by the spans must outlive the problem.
struct CfsProblem {
  std::vector<Vec2> reference;  // s_r; front and back are pinned
  std::span<const AgentPrediction> predictions;
  std::span<const SafetySchedule> schedules;  // parallel to predictions
  CfsWeights weights;
  double v_max = 2e-2;
  double dt = 1.0;
};

struct CfsOptions {
  // Re-linearize around the previous solution until the objective changes
  // by less than converge_tol. Off: exactly one iteration.
  bool converge = false;
  double converge_tol = 1e-6;
  int max_outer = 50;
  QpOptions qp;
};

enum class CfsStatus { kOptimized, kUnchanged, kInfeasible };

struct CfsResult {
  std::vector<Vec2> waypoints;
  CfsStatus status = CfsStatus::kUnchanged;
  QpStatus qp_status = QpStatus::kOptimal;
  int outer_iterations = 0;
  int constraint_count = 0;
  double objective = 0.0;
  bool spacing_ok = false;
  bool safe = false;
  // QP solved, spacing within v_max * dt and every keep-out distance met.
  bool feasible = false;
};

/// w_r |s - s_r|^2 + w_v |V s|^2 + w_a |A s|^2.
double CfsObjective(std::span<const Vec2> waypoints,
                    std::span<const Vec2> reference, const CfsWeights& w);

/// Largest consecutive displacement is at most v_max * dt * (1 + 1e-6).
bool SpacingFeasible(std::span<const Vec2> waypoints, double v_max, double dt);

/// max over i >= 1 and agents j of d_safe_ij - |x_i - o_ij|. Waypoint 0 is
/// the measured robot position and is not checked. Returns -inf when there
/// is nothing to check.
double WorstViolation(std::span<const Vec2> waypoints,
                      std::span<const AgentPrediction> predictions,
                      std::span<const SafetySchedule> schedules);

/// Runs one CFS iteration (or iterates to convergence). An infeasible QP
/// keeps the reference waypoints.
CfsResult CfsIterate(const CfsProblem& problem, const CfsOptions& options = {});

/// J = -|target - x_last| - w_r |s - s_r|^2 - (w_v |V s|^2 + w_a |A s|^2).
double Score(std::span<const Vec2> waypoints, std::span<const Vec2> reference,
             const Vec2& target, const CfsWeights& w);

/// Indices of the `count` trajectories whose last waypoint is nearest the
/// target, nearest first, ties by gap key. Throws InvalidArgument on empty
/// input.
std::vector<std::size_t> Preselect(std::span<const Trajectory> trajectories,
                                   const Vec2& target, std::size_t count = 2);

}  // namespace crowdnav

#endif  // CROWDNAV_CFS_HPP_
