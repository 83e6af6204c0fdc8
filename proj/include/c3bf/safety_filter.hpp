#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "c3bf/barriers.hpp"
#include "c3bf/core.hpp"

namespace c3bf {

/// Linear extended class-K function kappa(h) = gamma h.
struct ClassK {
  double gamma = 1.0;
};

inline double kappa(const ClassK& k, double h) { return k.gamma * h; }

/// a u >= b
struct LinearConstraint {
  Eigen::RowVectorXd a;
  double b = 0.0;
};

struct Bounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct FilterProblem {
  Eigen::VectorXd u_ref;
  std::vector<LinearConstraint> constraints;
  std::optional<Bounds> bounds;
  /// Diagonal objective weights; identity when absent.
  std::optional<Eigen::VectorXd> weights;
};

enum class FilterStatus { Optimal, Infeasible };

inline std::string to_string(FilterStatus s) {
  return s == FilterStatus::Optimal ? "OPTIMAL" : "INFEASIBLE";
}

/// Solution of min 1/2 |u - u_ref|_W^2 s.t. constraints and bounds.
/// Multipliers follow that 1/2-scaled objective:
///   W (u* - u_ref) = sum_i lambda_i a_i^T + mu_lo - mu_hi.
struct FilterResult {
  Eigen::VectorXd u_star;
  std::vector<double> multipliers;  // one per constraint, zero when inactive
  Eigen::VectorXd bound_lo_multipliers;
  Eigen::VectorXd bound_hi_multipliers;
  std::vector<int> active_set;  // constraint indices with nonzero activity
  FilterStatus status = FilterStatus::Optimal;
  int iterations = 0;
};

inline constexpr double kZeroRowNorm = 1e-12;
inline constexpr int kMaxPivots = 1000;

template <int D, int M>
LinearConstraint constraint_from_barrier(const BarrierEval<D, M>& e, const ClassK& k) {
  LinearConstraint c;
  c.a = e.lgh;
  c.b = -(e.lfh + kappa(k, e.h));
  return c;
}

/// Euclidean projection of u_ref onto the half-space a u >= b.
inline Eigen::VectorXd solve_single_constraint(const Eigen::VectorXd& u_ref,
                                               const LinearConstraint& c) {
  const double slack = c.a.dot(u_ref.transpose()) - c.b;
  if (slack >= 0.0) return u_ref;
  const double nn = c.a.squaredNorm();
  if (nn == 0.0) throw DegenerateConstraintError("zero constraint row with positive right-hand side");
  return u_ref + ((c.b - c.a.dot(u_ref.transpose())) / nn) * c.a.transpose();
}

namespace detail {

struct Row {
  Eigen::VectorXd n;
  double b = 0.0;
  int source = 0;  // >= 0: constraint index; -1 - j: lower bound j; -1 - n - j: upper bound j
};

inline double violation_tolerance(const Row& r, const Eigen::VectorXd& x) {
  return 1e-12 * std::max({1.0, std::abs(r.b), r.n.norm() * x.norm()});
}

}  // namespace detail

/// Dual active-set (Goldfarb-Idnani) solver for the identity-Hessian QP.
/// Starts from the unconstrained minimizer u_ref and adds violated
/// constraints one at a time, so a feasible u_ref is returned unchanged.
inline FilterResult solve_active_set(const FilterProblem& prob) {
  const Eigen::Index n = prob.u_ref.size();
  const int m = static_cast<int>(prob.constraints.size());

  FilterResult res;
  res.multipliers.assign(m, 0.0);
  res.bound_lo_multipliers = Eigen::VectorXd::Zero(n);
  res.bound_hi_multipliers = Eigen::VectorXd::Zero(n);
  res.u_star = prob.u_ref;

  // Scaled variables y = sqrt(W) u turn the weighted problem into a projection.
  Eigen::VectorXd sw = Eigen::VectorXd::Ones(n);
  if (prob.weights) {
    if (prob.weights->size() != n || (prob.weights->array() <= 0.0).any()) {
      throw DomainError("solve_active_set: weights must be positive, one per input");
    }
    sw = prob.weights->cwiseSqrt();
  }

  std::vector<detail::Row> rows;
  for (int i = 0; i < m; ++i) {
    const auto& c = prob.constraints[i];
    if (c.a.size() != n) throw DomainError("solve_active_set: constraint dimension mismatch");
    if (c.a.norm() <= kZeroRowNorm) {
      if (c.b > 0.0) {
        res.status = FilterStatus::Infeasible;
        return res;
      }
      continue;  // vacuous
    }
    rows.push_back({c.a.transpose().cwiseQuotient(sw), c.b, i});
  }
  if (prob.bounds) {
    const auto& bd = *prob.bounds;
    if (bd.lo.size() != n || bd.hi.size() != n) throw DomainError("solve_active_set: bounds dimension mismatch");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (bd.lo(j) > bd.hi(j)) {
        res.status = FilterStatus::Infeasible;
        return res;
      }
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(j) = 1.0 / sw(j);
      if (std::isfinite(bd.lo(j))) rows.push_back({e, bd.lo(j), -1 - static_cast<int>(j)});
      if (std::isfinite(bd.hi(j))) rows.push_back({-e, -bd.hi(j), -1 - static_cast<int>(n + j)});
    }
  }

  Eigen::VectorXd x = prob.u_ref.cwiseProduct(sw);
  std::vector<int> active;    // indices into rows
  std::vector<double> lam;    // multipliers of `active`
  std::vector<char> is_active(rows.size(), 0);
  int pivots = 0;

  while (true) {
    // most violated inactive row
    int p = -1;
    double worst = 0.0;
    for (int k = 0; k < static_cast<int>(rows.size()); ++k) {
      if (is_active[k]) continue;
      const double s = rows[k].n.dot(x) - rows[k].b;
      if (s < -detail::violation_tolerance(rows[k], x) && s < worst) {
        worst = s;
        p = k;
      }
    }
    if (p < 0) break;

    double lam_p = 0.0;
    while (true) {
      if (++pivots > kMaxPivots) throw IterationLimitError("solve_active_set: pivot limit exceeded");
      const auto& np = rows[p].n;
      const int q = static_cast<int>(active.size());
      Eigen::VectorXd r(q);
      Eigen::VectorXd z = np;
      if (q > 0) {
        Eigen::MatrixXd N(n, q);
        for (int j = 0; j < q; ++j) N.col(j) = rows[active[j]].n;
        r = N.colPivHouseholderQr().solve(np);
        z = np - N * r;
      }

      double t1 = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (int j = 0; j < q; ++j) {
        if (r(j) > 1e-12) {
          const double ratio = lam[j] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            drop = j;
          }
        }
      }
      double t2 = std::numeric_limits<double>::infinity();
      const double zz = z.squaredNorm();
      if (zz > 1e-20 * np.squaredNorm()) t2 = -(np.dot(x) - rows[p].b) / z.dot(np);

      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        res.status = FilterStatus::Infeasible;
        res.u_star = prob.u_ref;
        res.iterations = pivots;
        return res;
      }
      if (std::isfinite(t2)) x += t * z;
      for (int j = 0; j < q; ++j) lam[j] -= t * r(j);
      lam_p += t;

      if (std::isfinite(t2) && t2 <= t1) {
        active.push_back(p);
        lam.push_back(lam_p);
        is_active[p] = 1;
        break;
      }
      is_active[active[drop]] = 0;
      active.erase(active.begin() + drop);
      lam.erase(lam.begin() + drop);
    }
  }

  res.u_star = x.cwiseQuotient(sw);
  res.iterations = pivots;
  for (std::size_t j = 0; j < active.size(); ++j) {
    const int src = rows[active[j]].source;
    const double l = std::max(0.0, lam[j]);
    if (src >= 0) {
      res.multipliers[src] = l;
    } else if (-1 - src < n) {
      res.bound_lo_multipliers(-1 - src) = l;
    } else {
      res.bound_hi_multipliers(-1 - src - n) = l;
    }
  }
  for (int i = 0; i < m; ++i) {
    if (res.multipliers[i] > 0.0) res.active_set.push_back(i);
  }
  return res;
}

struct KktResiduals {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double primal_violation = 0.0;  // largest constraint/bound violation (>= 0)
  double min_multiplier = 0.0;
};

inline KktResiduals kkt_residuals(const FilterProblem& prob, const FilterResult& res) {
  const Eigen::Index n = prob.u_ref.size();
  Eigen::VectorXd w = prob.weights ? *prob.weights : Eigen::VectorXd::Ones(n);
  Eigen::VectorXd g = w.cwiseProduct(res.u_star - prob.u_ref);
  KktResiduals k;
  k.min_multiplier = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prob.constraints.size(); ++i) {
    const auto& c = prob.constraints[i];
    const double lam = res.multipliers[i];
    const double s = c.a.dot(res.u_star.transpose()) - c.b;
    g -= lam * c.a.transpose();
    k.complementarity = std::max(k.complementarity, std::abs(lam * s));
    k.primal_violation = std::max(k.primal_violation, -s);
    k.min_multiplier = std::min(k.min_multiplier, lam);
  }
  if (prob.bounds) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double sl = res.u_star(j) - prob.bounds->lo(j);
      const double sh = prob.bounds->hi(j) - res.u_star(j);
      const double ml = res.bound_lo_multipliers(j), mh = res.bound_hi_multipliers(j);
      g(j) -= ml - mh;
      if (ml != 0.0) k.complementarity = std::max(k.complementarity, std::abs(ml * sl));
      if (mh != 0.0) k.complementarity = std::max(k.complementarity, std::abs(mh * sh));
      k.primal_violation = std::max({k.primal_violation, -sl, -sh});
      k.min_multiplier = std::min({k.min_multiplier, ml, mh});
    }
  }
  if (!std::isfinite(k.min_multiplier)) k.min_multiplier = 0.0;
  k.stationarity = g.norm();
  return k;
}

template <class Model>
struct FilterOutput {
  FilterResult result;
  std::vector<BarrierEvalFor<Model>> evals;
};

/// One CBF-QP step: a constraint per obstacle from the selected barrier, then
/// the minimal-intervention QP around u_ref.
template <class Model>
FilterOutput<Model> filter(const typename Model::State& s, const typename Model::Params& p,
                           const std::vector<Obstacle>& obstacles, const BarrierKind& kind,
                           const typename Model::InputVector& u_ref, const ClassK& k,
                           const std::optional<Bounds>& bounds = std::nullopt,
                           const std::optional<Eigen::VectorXd>& weights = std::nullopt) {
  FilterOutput<Model> out;
  FilterProblem prob;
  prob.u_ref = u_ref;
  prob.bounds = bounds;
  prob.weights = weights;
  out.evals.reserve(obstacles.size());
  for (const auto& o : obstacles) {
    out.evals.push_back(evaluate_barrier<Model>(kind, s, p, o));
    prob.constraints.push_back(constraint_from_barrier(out.evals.back(), k));
  }
  out.result = solve_active_set(prob);
  return out;
}

}  // namespace c3bf
