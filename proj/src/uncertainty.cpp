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

#include "crowdnav/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>

namespace crowdnav {

double Chi2Bound(double epsilon, int dof) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw InvalidArgument("epsilon must lie in (0, 1)");
  }
  if (dof < 1) throw InvalidArgument("dof must be >= 1");
  if (dof == 2) return -2.0 * std::log(epsilon);
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(boost::math::complement(dist, epsilon));
}

double Margin(const Mat2& position_covariance, double k_eps) {
  const Mat2 sym = 0.5 * (position_covariance + position_covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Mat2> eig(sym, Eigen::EigenvaluesOnly);
  double r = 0.0;
  for (int n = 0; n < 2; ++n) {
    const double lambda = eig.eigenvalues()[n];
    if (lambda < -1e-12) {
      throw NumericError("position covariance is not positive semi-definite");
    }
    r += std::sqrt(k_eps * std::max(lambda, 0.0));
  }
  return r;
}

SafetySchedule BuildSchedule(const AgentPrediction& prediction,
                             const ConfidenceParams& params, double r_ins) {
  const double k_eps = Chi2Bound(params.epsilon, 2);
  const double cap = params.d_safe_max > 0.0 ? params.d_safe_max : 2.0 * r_ins;
  SafetySchedule s;
  s.agent_id = prediction.agent_id;
  s.replan_step = prediction.horizon;
  bool capped = false;
  for (int i = 0; i <= prediction.horizon; ++i) {
    const double r = Margin(prediction.covariance(i), k_eps);
    s.margin.push_back(r);
    s.d_safe.push_back(std::min(r_ins + r, cap));
    if (!capped && i >= 1 && r_ins + r >= cap) {
      s.replan_step = i;
      capped = true;
    }
  }
  return s;
}

SafetySchedule FixedSchedule(const AgentPrediction& prediction, double r_ins) {
  SafetySchedule s;
  s.agent_id = prediction.agent_id;
  s.replan_step = prediction.horizon;
  s.margin.assign(static_cast<std::size_t>(prediction.horizon) + 1, 0.0);
  s.d_safe.assign(static_cast<std::size_t>(prediction.horizon) + 1, r_ins);
  return s;
}

}  // namespace crowdnav
