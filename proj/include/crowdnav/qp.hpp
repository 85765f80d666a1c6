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

// Small dense convex QP:
//
//   minimize    1/2 u^T H u + f^T u
//   subject to  A u <= b,  Aeq u = beq,  lo <= u <= hi
//
// Solved with the Goldfarb-Idnani dual active-set method. The solver keeps
// no state between calls and is safe to use from several threads.

#ifndef CROWDNAV_QP_HPP_
#define CROWDNAV_QP_HPP_

#include <vector>

#include <Eigen/Core>

namespace crowdnav {

struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A;  // m x n, may have zero rows
  Eigen::VectorXd b;
  Eigen::MatrixXd Aeq;
  Eigen::VectorXd beq;
  // Empty vectors mean unbounded. Infinite entries are skipped.
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  /// Allocates an unconstrained problem of dimension n.
  static QpProblem Unconstrained(const Eigen::MatrixXd& H,
                                 const Eigen::VectorXd& f);
  int dim() const { return static_cast<int>(f.size()); }
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIter };

const char* ToString(QpStatus status);

struct QpOptions {
  double tol = 1e-8;
  int max_iter = 200;
  // Constraint indices to try first (see QpSolution::active_set).
  std::vector<int> warm_start;
};

struct QpSolution {
  Eigen::VectorXd u;
  QpStatus status = QpStatus::kInfeasible;
  double objective = 0.0;
  // Indices into the stacked constraint list: rows of A first, then rows of
  // Aeq, then lower bounds, then upper bounds.
  std::vector<int> active_set;
  Eigen::VectorXd ineq_multipliers;  // for rows of A, >= 0
  Eigen::VectorXd eq_multipliers;    // for rows of Aeq
  Eigen::VectorXd lo_multipliers;    // for lower bounds, >= 0
  Eigen::VectorXd hi_multipliers;    // for upper bounds, >= 0
  int iterations = 0;
};

/// Throws InvalidArgument on dimension mismatch and NumericError when H is
/// not positive semi-definite (Cholesky fails even after 1e-10 jitter).
QpSolution SolveQp(const QpProblem& problem, const QpOptions& options = {});

struct KktResiduals {
  double primal = 0.0;          // max constraint violation
  double stationarity = 0.0;    // ||H u + f + A^T mu + Aeq^T nu + ...||_inf
  double complementarity = 0.0; // max |mu_i * slack_i|
  double dual = 0.0;            // max(0, -mu_i)
};

KktResiduals ComputeKkt(const QpProblem& problem, const QpSolution& solution);

}  // namespace crowdnav

#endif  // CROWDNAV_QP_HPP_
