// Centralized reference solver: multi-start accelerated proximal gradient on
// the full objective F + G over K.  Used to produce the reference objectives
// and stationary points the network runs are compared against; it shares no
// code path with the distributed loop.
#pragma once

#include "nextsca/core.hpp"
#include "nextsca/problem.hpp"

#include <vector>

namespace nextsca {

struct CentralizedOptions {
  double tol = 1e-9;          // unit-step proximal residual target (inf norm)
  int restarts = 20;
  long max_iterations = 200000;
  std::uint64_t seed = 0;
  double tie_tol = 1e-10;     // objective ties broken lexicographically
};

struct OracleSolution {
  Vector point;
  double objective = 0.0;
  double residual = 0.0;  // achieved stationarity residual
  int restarts_used = 0;
};

namespace detail {

// Monotone accelerated proximal gradient with Lipschitz backtracking.  The
// momentum candidate is kept only while the objective decreases; otherwise
// the step is retaken from the last accepted iterate, which keeps the scheme
// safe on nonconvex costs.
inline Vector proximal_descent(const DistributedProblem& p, const Vector& x0, double tol,
                               long max_iterations) {
  const Regularizer& reg = p.regularizer;
  const FeasibleSet* set = &p.feasible;
  double lip = 1.0;
  for (const auto& c : p.costs)
    if (c.lipschitz_hint) lip = std::max(lip, *c.lipschitz_hint);
  Vector x = set->project(x0);
  Vector y = x;
  double obj_x = p.objective(x);
  double t = 1.0;
  long stalled = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  for (long it = 0; it < max_iterations; ++it) {
    auto prox_from = [&](const Vector& base) -> Vector {
      const Vector g = p.sum_gradient(base);
      const double fb = p.sum_value(base);
      while (true) {
        const Vector cand = reg.prox(base - g / lip, 1.0 / lip, set);
        const Vector d = cand - base;
        const double bound = fb + g.dot(d) + 0.5 * lip * d.squaredNorm();
        if (p.sum_value(cand) <= bound + 1e-12 * (1.0 + std::abs(bound))) return cand;
        lip *= 2.0;
        if (lip > 1e18) throw NumericalError("centralized solve line search diverged");
      }
    };
    Vector cand = prox_from(y);
    double obj_cand = p.objective(cand);
    if (obj_cand > obj_x + 1e-12 * (1.0 + std::abs(obj_x))) {
      cand = prox_from(x);  // momentum overshot; plain step keeps descent
      obj_cand = p.objective(cand);
      t = 1.0;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = cand + ((t - 1.0) / t_next) * (cand - x);
    const double moved = (cand - x).lpNorm<Eigen::Infinity>();
    x = cand;
    obj_x = obj_cand;
    t = t_next;
    const double res = stationarity_residual(p, x);
    if (res <= tol) return x;
    if (res < 0.9 * best_residual) {
      best_residual = res;
      stalled = 0;
    } else if (++stalled > 500 && moved <= 1e-15 * (1.0 + x.norm())) {
      break;  // machine-precision floor before the requested tolerance
    }
    lip = std::max(lip * 0.97, 1e-12);
  }
  return x;
}

inline bool lexicographically_smaller(const Vector& a, const Vector& b) {
  for (int k = 0; k < a.size(); ++k) {
    if (a[k] < b[k]) return true;
    if (a[k] > b[k]) return false;
  }
  return false;
}

}  // namespace detail

inline OracleSolution centralized_solve(const DistributedProblem& p,
                                        const CentralizedOptions& opts = {}) {
  validate_problem(p);
  if (opts.restarts < 1) throw InvalidInput("centralized solve needs at least one restart");
  auto rng = make_rng(combine_seed(opts.seed, 0x0'5acULL));
  OracleSolution best;
  bool have = false;
  for (int r = 0; r < opts.restarts; ++r) {
    const Vector x0 = sample_feasible(p.feasible, rng);
    const Vector x = detail::proximal_descent(p, x0, opts.tol, opts.max_iterations);
    const double obj = p.objective(x);
    const bool better =
        !have || obj < best.objective - opts.tie_tol ||
        (std::abs(obj - best.objective) <= opts.tie_tol &&
         detail::lexicographically_smaller(x, best.point));
    if (better) {
      best.point = x;
      best.objective = obj;
      best.residual = stationarity_residual(p, x);
      have = true;
    }
  }
  best.restarts_used = opts.restarts;
  return best;
}

}  // namespace nextsca
