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

#include "crowdnav/cfs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

namespace crowdnav {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double CfsObjective(std::span<const Vec2> waypoints,
                    std::span<const Vec2> reference, const CfsWeights& w) {
  const std::size_t n = waypoints.size();
  double dev = 0.0;
  for (std::size_t i = 0; i < n && i < reference.size(); ++i) {
    dev += (waypoints[i] - reference[i]).squaredNorm();
  }
  double vel = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    vel += (waypoints[i + 1] - waypoints[i]).squaredNorm();
  }
  double acc = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    acc += (waypoints[i + 1] - 2.0 * waypoints[i] + waypoints[i - 1]).squaredNorm();
  }
  return w.w_r * dev + w.w_v * vel + w.w_a * acc;
}

bool SpacingFeasible(std::span<const Vec2> waypoints, double v_max, double dt) {
  const double bound = v_max * dt * (1.0 + 1e-6);
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    if ((waypoints[i + 1] - waypoints[i]).norm() > bound) return false;
  }
  return true;
}

double WorstViolation(std::span<const Vec2> waypoints,
                      std::span<const AgentPrediction> predictions,
                      std::span<const SafetySchedule> schedules) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    for (std::size_t i = 1; i < waypoints.size(); ++i) {
      const int step = static_cast<int>(i);
      const double d = (waypoints[i] - predictions[j].position(step)).norm();
      worst = std::max(worst, schedules[j].at(step) - d);
    }
  }
  return worst;
}

namespace {

// Quadratic form M of the objective along one axis, so that the full
// objective is sum over axes of s_a^T M s_a - 2 w_r r_a^T s_a + const.
MatrixXd AxisHessian(int n, const CfsWeights& w) {
  MatrixXd m = w.w_r * MatrixXd::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    m(i, i) += w.w_v;
    m(i + 1, i + 1) += w.w_v;
    m(i, i + 1) -= w.w_v;
    m(i + 1, i) -= w.w_v;
  }
  const double c[3] = {1.0, -2.0, 1.0};
  for (int i = 1; i + 1 < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        m(i - 1 + a, i - 1 + b) += w.w_a * c[a] * c[b];
      }
    }
  }
  return m;
}

Vec2 FallbackNormal(const std::vector<Vec2>& ref) {
  const Vec2 d = ref.back() - ref.front();
  if (d.norm() > 1e-12) return d.normalized();
  return Vec2(1.0, 0.0);
}

// Interior waypoints 1..n-2 are the decision variables; variable 2(i-1)+a
// is axis a of waypoint i.
QpProblem BuildQp(const CfsProblem& p, const std::vector<Vec2>& lin,
                  const MatrixXd& axis_h) {
  const int n = static_cast<int>(p.reference.size());
  const int interior = n - 2;
  const int dim = 2 * interior;
  QpProblem qp;
  qp.H = MatrixXd::Zero(dim, dim);
  qp.f = VectorXd::Zero(dim);
  for (int i = 0; i < interior; ++i) {
    for (int k = 0; k < interior; ++k) {
      const double h = 2.0 * axis_h(i + 1, k + 1);
      qp.H(2 * i, 2 * k) = h;
      qp.H(2 * i + 1, 2 * k + 1) = h;
    }
    for (int a = 0; a < 2; ++a) {
      double f = -2.0 * p.weights.w_r * p.reference[i + 1][a];
      // Coupling with the pinned endpoints.
      f += 2.0 * axis_h(i + 1, 0) * p.reference.front()[a];
      f += 2.0 * axis_h(i + 1, n - 1) * p.reference.back()[a];
      qp.f[2 * i + a] = f;
    }
  }

  const int rows = interior * static_cast<int>(p.predictions.size());
  qp.A = MatrixXd::Zero(rows, dim);
  qp.b = VectorXd::Zero(rows);
  const Vec2 fallback = FallbackNormal(p.reference);
  int r = 0;
  for (std::size_t j = 0; j < p.predictions.size(); ++j) {
    Vec2 prev_normal = fallback;
    for (int i = 1; i <= interior; ++i) {
      const Vec2& o = p.predictions[j].position(i);
      const Vec2 off = lin[static_cast<std::size_t>(i)] - o;
      const double len = off.norm();
      const Vec2 g = len > 1e-12 ? Vec2(off / len) : prev_normal;
      prev_normal = g;
      // g^T (x - o) >= d  <=>  -g^T x <= -d - g^T o
      qp.A(r, 2 * (i - 1)) = -g.x();
      qp.A(r, 2 * (i - 1) + 1) = -g.y();
      qp.b[r] = -p.schedules[j].at(i) - g.dot(o);
      ++r;
    }
  }
  qp.Aeq = MatrixXd::Zero(0, dim);
  qp.beq = VectorXd::Zero(0);
  return qp;
}

void Finalize(const CfsProblem& p, CfsResult& out) {
  out.objective = CfsObjective(out.waypoints, p.reference, p.weights);
  out.spacing_ok = SpacingFeasible(out.waypoints, p.v_max, p.dt);
  out.safe = WorstViolation(out.waypoints, p.predictions, p.schedules) <= 0.0;
  out.feasible = out.status != CfsStatus::kInfeasible && out.spacing_ok && out.safe;
}

}  // namespace

CfsResult CfsIterate(const CfsProblem& p, const CfsOptions& options) {
  if (p.reference.empty()) throw InvalidArgument("CfsIterate: empty reference");
  if (p.predictions.size() != p.schedules.size()) {
    throw InvalidArgument("CfsIterate: schedules do not match predictions");
  }
  const int n = static_cast<int>(p.reference.size());
  for (std::size_t j = 0; j < p.predictions.size(); ++j) {
    if (static_cast<int>(p.predictions[j].positions.size()) < n ||
        static_cast<int>(p.schedules[j].d_safe.size()) < n) {
      throw InvalidArgument("CfsIterate: prediction shorter than reference");
    }
  }

  CfsResult out;
  out.waypoints = p.reference;
  if (n < 3) {
    Finalize(p, out);
    return out;
  }

  const MatrixXd axis_h = AxisHessian(n, p.weights);
  QpOptions qp_opts = options.qp;
  qp_opts.max_iter = std::max(qp_opts.max_iter, 4 * n * static_cast<int>(p.predictions.size() + 2));
  std::vector<Vec2> lin = p.reference;
  double prev_obj = CfsObjective(lin, p.reference, p.weights);
  const int outer = options.converge ? std::max(1, options.max_outer) : 1;
  for (int it = 0; it < outer; ++it) {
    const QpProblem qp = BuildQp(p, lin, axis_h);
    out.constraint_count = static_cast<int>(qp.A.rows());
    const QpSolution sol = SolveQp(qp, qp_opts);
    out.qp_status = sol.status;
    out.outer_iterations = it + 1;
    if (sol.status != QpStatus::kOptimal) {
      if (it == 0) {
        out.status = CfsStatus::kInfeasible;
        out.waypoints = p.reference;
      }
      break;
    }
    for (int i = 1; i + 1 < n; ++i) {
      lin[static_cast<std::size_t>(i)] =
          Vec2(sol.u[2 * (i - 1)], sol.u[2 * (i - 1) + 1]);
    }
    out.waypoints = lin;
    out.status = CfsStatus::kOptimized;
    const double obj = CfsObjective(lin, p.reference, p.weights);
    if (std::abs(prev_obj - obj) < options.converge_tol && it > 0) break;
    prev_obj = obj;
  }
  Finalize(p, out);
  return out;
}

double Score(std::span<const Vec2> waypoints, std::span<const Vec2> reference,
             const Vec2& target, const CfsWeights& w) {
  if (waypoints.empty()) throw InvalidArgument("Score: empty trajectory");
  return -(target - waypoints.back()).norm() -
         CfsObjective(waypoints, reference, w);
}

std::vector<std::size_t> Preselect(std::span<const Trajectory> trajectories,
                                   const Vec2& target, std::size_t count) {
  if (trajectories.empty()) {
    throw InvalidArgument("Preselect: no trajectories; replan with sentinel");
  }
  std::vector<std::size_t> idx(trajectories.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<double> dist(trajectories.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    dist[i] = (target - trajectories[i].back()).norm();
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return trajectories[a].gap_key < trajectories[b].gap_key;
  });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

}  // namespace crowdnav
