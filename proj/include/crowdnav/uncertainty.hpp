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

// Robust safety distances from predicted position covariances.
//
// With probability 1 - eps the position error lies in the chi-square
// ellipse of level k_eps. Bounding the error along each eigenvector by
// sqrt(k_eps * lambda_n) and summing gives a radius
//   r = sum_n sqrt(k_eps * lambda_n)
// that contains the ellipse, so inflating the keep-out distance by r keeps
// the collision probability below eps.

#ifndef CROWDNAV_UNCERTAINTY_HPP_
#define CROWDNAV_UNCERTAINTY_HPP_

#include <vector>

#include "crowdnav/estimation.hpp"
#include "crowdnav/geometry.hpp"

namespace crowdnav {

struct ConfidenceParams {
  double epsilon = 0.01;
  // Cap on the inflated distance; non-positive means 2 * r_ins.
  double d_safe_max = 0.0;
};

/// Inverse chi-square CDF at 1 - eps. Exact -2 ln(eps) for dof 2.
double Chi2Bound(double epsilon, int dof = 2);

/// r = sum over eigenvalues of sqrt(k_eps * lambda). Throws NumericError
/// when the covariance has an eigenvalue below -1e-12.
double Margin(const Mat2& position_covariance, double k_eps);

struct SafetySchedule {
  int agent_id = 0;
  std::vector<double> margin;  // r^i, steps 0..N
  std::vector<double> d_safe;  // min(r_ins + r^i, d_safe_max)
  int replan_step = 1;         // in [1, N]

  double at(int step) const { return d_safe[static_cast<std::size_t>(step)]; }
};

/// Per-step inflated distances for one agent. The replan step is the first
/// step i >= 1 at which the cap is reached, else N.
SafetySchedule BuildSchedule(const AgentPrediction& prediction,
                             const ConfidenceParams& params, double r_ins);

/// Constant r_ins schedule, used when uncertainty handling is disabled.
SafetySchedule FixedSchedule(const AgentPrediction& prediction, double r_ins);

}  // namespace crowdnav

#endif  // CROWDNAV_UNCERTAINTY_HPP_
