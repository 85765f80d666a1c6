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

#include "crowdnav/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "crowdnav/geometry.hpp"

namespace crowdnav {

using Eigen::MatrixXd;
using Eigen::VectorXd;

QpProblem QpProblem::Unconstrained(const MatrixXd& H, const VectorXd& f) {
  QpProblem p;
  p.H = H;
  p.f = f;
  const auto n = f.size();
  p.A = MatrixXd::Zero(0, n);
  p.b = VectorXd::Zero(0);
  p.Aeq = MatrixXd::Zero(0, n);
  p.beq = VectorXd::Zero(0);
  return p;
}

const char* ToString(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal:
      return "optimal";
    case QpStatus::kInfeasible:
      return "infeasible";
    case QpStatus::kMaxIter:
      return "max_iter";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relative size below which a step direction counts as zero.
constexpr double kDirectionTol = 1e-9;

// Every constraint in the normalized form n^T u >= rhs (or == rhs).
struct Row {
  VectorXd normal;
  double rhs = 0.0;
  double scale = 1.0;  // norm of the original row
  bool equality = false;
  int source = 0;      // index in the stacked constraint numbering
};

void CheckDimensions(const QpProblem& p) {
  const auto n = p.f.size();
  if (n == 0) throw InvalidArgument("QP has no variables");
  if (p.H.rows() != n || p.H.cols() != n) {
    throw InvalidArgument("QP: H must be n x n");
  }
  if (p.A.rows() != p.b.size() || (p.A.rows() > 0 && p.A.cols() != n)) {
    throw InvalidArgument("QP: A/b dimension mismatch");
  }
  if (p.Aeq.rows() != p.beq.size() || (p.Aeq.rows() > 0 && p.Aeq.cols() != n)) {
    throw InvalidArgument("QP: Aeq/beq dimension mismatch");
  }
  if ((p.lo.size() != 0 && p.lo.size() != n) ||
      (p.hi.size() != 0 && p.hi.size() != n)) {
    throw InvalidArgument("QP: bound dimension mismatch");
  }
  if ((p.H - p.H.transpose()).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, p.H.cwiseAbs().maxCoeff())) {
    throw InvalidArgument("QP: H must be symmetric");
  }
}

class Solver {
 public:
  Solver(const QpProblem& p, const QpOptions& o) : p_(p), opt_(o) {}

  QpSolution Run();

 private:
  bool Factor();
  void BuildRows();
  // Step directions for adding `normal` given the current active set.
  void Directions(const VectorXd& normal, VectorXd& z, VectorXd& r) const;
  // Solves the equality-constrained problem on the active set.
  void SolveOnActive();
  double Slack(int row) const {
    return rows_[row].normal.dot(x_) - rows_[row].rhs;
  }
  bool Independent(const VectorXd& normal) const;

  const QpProblem& p_;
  const QpOptions& opt_;
  Eigen::LLT<MatrixXd> llt_;
  std::vector<Row> rows_;
  std::vector<int> active_;  // indices into rows_
  std::vector<double> mult_;  // multipliers parallel to active_
  VectorXd x_;
  bool trivially_infeasible_ = false;
};

bool Solver::Factor() {
  llt_.compute(p_.H);
  if (llt_.info() == Eigen::Success) return true;
  const auto n = p_.H.rows();
  llt_.compute(p_.H + 1e-10 * MatrixXd::Identity(n, n));
  return llt_.info() == Eigen::Success;
}

void Solver::BuildRows() {
  const auto n = p_.f.size();
  const int m = static_cast<int>(p_.A.rows());
  const int meq = static_cast<int>(p_.Aeq.rows());
  for (int i = 0; i < m; ++i) {
    const double s = p_.A.row(i).norm();
    if (s == 0.0) {
      if (p_.b[i] < -opt_.tol) trivially_infeasible_ = true;
      continue;
    }
    rows_.push_back({-p_.A.row(i).transpose() / s, -p_.b[i] / s, s, false, i});
  }
  for (int i = 0; i < meq; ++i) {
    const double s = p_.Aeq.row(i).norm();
    if (s == 0.0) {
      if (std::abs(p_.beq[i]) > opt_.tol) trivially_infeasible_ = true;
      continue;
    }
    rows_.push_back({p_.Aeq.row(i).transpose() / s, p_.beq[i] / s, s, true,
                     m + i});
  }
  for (int j = 0; j < p_.lo.size(); ++j) {
    if (!std::isfinite(p_.lo[j])) continue;
    rows_.push_back({VectorXd::Unit(n, j), p_.lo[j], 1.0, false,
                     m + meq + j});
  }
  for (int j = 0; j < p_.hi.size(); ++j) {
    if (!std::isfinite(p_.hi[j])) continue;
    rows_.push_back({-VectorXd::Unit(n, j), -p_.hi[j], 1.0, false,
                     m + meq + static_cast<int>(n) + j});
  }
}

void Solver::Directions(const VectorXd& normal, VectorXd& z,
                        VectorXd& r) const {
  const VectorXd hinv_n = llt_.solve(normal);
  const auto q = static_cast<Eigen::Index>(active_.size());
  if (q == 0) {
    z = hinv_n;
    r.resize(0);
    return;
  }
  MatrixXd nmat(normal.size(), q);
  for (Eigen::Index k = 0; k < q; ++k) nmat.col(k) = rows_[active_[k]].normal;
  const MatrixXd b = llt_.solve(nmat);
  const MatrixXd m = nmat.transpose() * b;
  r = m.ldlt().solve(b.transpose() * normal);
  // A full active set spans the space; the residual is rounding only.
  if (q >= normal.size()) {
    z = VectorXd::Zero(normal.size());
  } else {
    z = hinv_n - b * r;
  }
}

bool Solver::Independent(const VectorXd& normal) const {
  VectorXd z, r;
  Directions(normal, z, r);
  const double full = normal.dot(llt_.solve(normal));
  return z.dot(normal) > kDirectionTol * full;
}

void Solver::SolveOnActive() {
  const VectorXd free = -llt_.solve(p_.f);
  const auto q = static_cast<Eigen::Index>(active_.size());
  if (q == 0) {
    x_ = free;
    mult_.clear();
    return;
  }
  MatrixXd nmat(free.size(), q);
  VectorXd c(q);
  for (Eigen::Index k = 0; k < q; ++k) {
    nmat.col(k) = rows_[active_[k]].normal;
    c[k] = rows_[active_[k]].rhs;
  }
  const MatrixXd b = llt_.solve(nmat);
  const MatrixXd m = nmat.transpose() * b;
  const VectorXd u = m.ldlt().solve(c - nmat.transpose() * free);
  x_ = free + b * u;
  mult_.assign(u.data(), u.data() + q);
}

QpSolution Solver::Run() {
  CheckDimensions(p_);
  if (!Factor()) {
    throw NumericError("QP: H is not positive semi-definite");
  }
  BuildRows();
  QpSolution sol;
  const auto n = p_.f.size();
  sol.ineq_multipliers = VectorXd::Zero(p_.A.rows());
  sol.eq_multipliers = VectorXd::Zero(p_.Aeq.rows());
  sol.lo_multipliers = VectorXd::Zero(p_.lo.size());
  sol.hi_multipliers = VectorXd::Zero(p_.hi.size());
  if (trivially_infeasible_) {
    sol.u = -llt_.solve(p_.f);
    sol.status = QpStatus::kInfeasible;
    return sol;
  }

  // Initial active set: all equalities, then the warm-start hints, keeping
  // only linearly independent normals.
  std::vector<int> skipped_eq;
  std::vector<bool> is_active(rows_.size(), false);
  auto try_add = [&](int row) {
    if (is_active[row]) return;
    if (Independent(rows_[row].normal)) {
      active_.push_back(row);
      is_active[row] = true;
    } else if (rows_[row].equality) {
      skipped_eq.push_back(row);
    }
  };
  for (int i = 0; i < static_cast<int>(rows_.size()); ++i) {
    if (rows_[i].equality) try_add(i);
  }
  for (int src : opt_.warm_start) {
    for (int i = 0; i < static_cast<int>(rows_.size()); ++i) {
      if (rows_[i].source == src && !rows_[i].equality) try_add(i);
    }
  }
  for (;;) {
    SolveOnActive();
    int worst = -1;
    double worst_u = 0.0;
    for (std::size_t k = 0; k < active_.size(); ++k) {
      if (rows_[active_[k]].equality) continue;
      if (mult_[k] < worst_u) {
        worst_u = mult_[k];
        worst = static_cast<int>(k);
      }
    }
    if (worst < 0) break;
    is_active[active_[worst]] = false;
    active_.erase(active_.begin() + worst);
  }
  for (int row : skipped_eq) {
    if (std::abs(Slack(row)) > opt_.tol) {
      sol.u = x_;
      sol.status = QpStatus::kInfeasible;
      return sol;
    }
  }

  int iter = 0;
  sol.status = QpStatus::kOptimal;
  for (;;) {
    // Most violated inactive inequality (rows are unit-normalized, so this
    // choice does not depend on row scaling).
    int p = -1;
    double sp = -opt_.tol;
    for (int i = 0; i < static_cast<int>(rows_.size()); ++i) {
      if (is_active[i] || rows_[i].equality) continue;
      const double s = Slack(i);
      if (s < sp) {
        sp = s;
        p = i;
      }
    }
    if (p < 0) break;

    double u_plus = 0.0;
    bool added = false;
    while (!added) {
      if (++iter > opt_.max_iter) {
        sol.status = QpStatus::kMaxIter;
        break;
      }
      VectorXd z, r;
      Directions(rows_[p].normal, z, r);
      double t1 = kInf;
      int drop = -1;
      for (std::size_t k = 0; k < active_.size(); ++k) {
        if (rows_[active_[k]].equality) continue;
        if (r[static_cast<Eigen::Index>(k)] > 1e-14) {
          const double ratio = mult_[k] / r[static_cast<Eigen::Index>(k)];
          if (ratio < t1) {
            t1 = ratio;
            drop = static_cast<int>(k);
          }
        }
      }
      const double zn = z.dot(rows_[p].normal);
      const double full = rows_[p].normal.dot(llt_.solve(rows_[p].normal));
      const double t2 = zn > kDirectionTol * full ? -Slack(p) / zn : kInf;
      if (t1 == kInf && t2 == kInf) {
        sol.status = QpStatus::kInfeasible;
        break;
      }
      const double t = std::min(t1, t2);
      for (std::size_t k = 0; k < active_.size(); ++k) {
        mult_[k] -= t * r[static_cast<Eigen::Index>(k)];
      }
      u_plus += t;
      if (t2 != kInf) x_ += t * z;
      if (t2 <= t1) {
        active_.push_back(p);
        mult_.push_back(u_plus);
        is_active[p] = true;
        added = true;
      } else {
        is_active[active_[drop]] = false;
        active_.erase(active_.begin() + drop);
        mult_.erase(mult_.begin() + drop);
      }
    }
    if (sol.status != QpStatus::kOptimal) break;
  }

  sol.u = x_;
  sol.iterations = iter;
  sol.objective = 0.5 * x_.dot(p_.H * x_) + p_.f.dot(x_);
  const int m = static_cast<int>(p_.A.rows());
  const int meq = static_cast<int>(p_.Aeq.rows());
  for (std::size_t k = 0; k < active_.size(); ++k) {
    const Row& row = rows_[active_[k]];
    sol.active_set.push_back(row.source);
    const double u = mult_[k];
    if (row.source < m) {
      sol.ineq_multipliers[row.source] = u / row.scale;
    } else if (row.source < m + meq) {
      sol.eq_multipliers[row.source - m] = -u / row.scale;
    } else if (row.source < m + meq + n) {
      sol.lo_multipliers[row.source - m - meq] = u;
    } else {
      sol.hi_multipliers[row.source - m - meq - n] = u;
    }
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  return sol;
}

}  // namespace

QpSolution SolveQp(const QpProblem& problem, const QpOptions& options) {
  Solver solver(problem, options);
  return solver.Run();
}

KktResiduals ComputeKkt(const QpProblem& p, const QpSolution& s) {
  KktResiduals k;
  const VectorXd& u = s.u;
  VectorXd grad = p.H * u + p.f;
  if (p.A.rows() > 0) {
    grad += p.A.transpose() * s.ineq_multipliers;
    const VectorXd slack = p.b - p.A * u;
    for (Eigen::Index i = 0; i < slack.size(); ++i) {
      k.primal = std::max(k.primal, -slack[i]);
      k.complementarity =
          std::max(k.complementarity, std::abs(s.ineq_multipliers[i] * slack[i]));
      k.dual = std::max(k.dual, -s.ineq_multipliers[i]);
    }
  }
  if (p.Aeq.rows() > 0) {
    grad += p.Aeq.transpose() * s.eq_multipliers;
    k.primal = std::max(k.primal, (p.Aeq * u - p.beq).cwiseAbs().maxCoeff());
  }
  for (Eigen::Index j = 0; j < p.lo.size(); ++j) {
    if (!std::isfinite(p.lo[j])) continue;
    grad[j] -= s.lo_multipliers[j];
    const double slack = u[j] - p.lo[j];
    k.primal = std::max(k.primal, -slack);
    k.complementarity =
        std::max(k.complementarity, std::abs(s.lo_multipliers[j] * slack));
    k.dual = std::max(k.dual, -s.lo_multipliers[j]);
  }
  for (Eigen::Index j = 0; j < p.hi.size(); ++j) {
    if (!std::isfinite(p.hi[j])) continue;
    grad[j] += s.hi_multipliers[j];
    const double slack = p.hi[j] - u[j];
    k.primal = std::max(k.primal, -slack);
    k.complementarity =
        std::max(k.complementarity, std::abs(s.hi_multipliers[j] * slack));
    k.dual = std::max(k.dual, -s.hi_multipliers[j]);
  }
  k.stationarity = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  return k;
}

}  // namespace crowdnav
