// Bulk-synchronous driver for the distributed successive convex approximation
// method with dynamic gradient tracking, plus the projected-gradient consensus
// baseline.  One iteration of the main method:
//
//   S1  each agent solves its convexified subproblem at x_i[n] (exactly or to
//       accuracy eps_i[n]) and steps z_i = x_i + alpha[n] (xt_i - x_i)
//   S2  x_i[n+1]  = sum_j w_ij[n] z_j                  (first exchange)
//       y_i[n+1]  = sum_j w_ij[n] y_j + grad_i[n+1] - grad_i[n]   (second)
//       pi_i[n+1] = I y_i[n+1] - grad_i[n+1]
//
// All S1 solves read the same snapshot of the states and all S2 mixes finish
// before any gradient at x[n+1] is taken, so the loop is deterministic no
// matter how the per-agent work would be scheduled.
#pragma once

#include "nextsca/core.hpp"
#include "nextsca/graph.hpp"
#include "nextsca/metrics.hpp"
#include "nextsca/problem.hpp"
#include "nextsca/surrogate.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace nextsca {

// Diminishing step size sequences.  All kinds keep alpha[n] in (0,1]; the two
// diminishing kinds have divergent sums and summable squares, which is what
// the convergence results and the inexact-solve schedules require.
struct StepSizeRule {
  enum class Kind {
    DiminishingPower,  // alpha0 / (n+1)^beta, beta in (0.5, 1]
    Recursive,         // alpha[n] = alpha[n-1] (1 - mu alpha[n-1])
    Constant,
  };
  Kind kind = Kind::DiminishingPower;
  double alpha0 = 0.1;
  double beta = 1.0;  // DiminishingPower only
  double mu = 0.01;   // Recursive only

  void validate() const {
    if (alpha0 <= 0.0 || alpha0 > 1.0) throw InvalidInput("step size alpha0 must be in (0,1]");
    if (kind == Kind::DiminishingPower && (beta <= 0.5 || beta > 1.0))
      throw InvalidInput("step size exponent beta must be in (0.5,1]");
    if (kind == Kind::Recursive && (mu <= 0.0 || mu >= 1.0))
      throw InvalidInput("step size decay mu must be in (0,1)");
  }

  // Whether sum alpha[n]^2 < inf holds for this kind (by its parameter
  // constraints); the inexact schedules eps_i[n] = c_i alpha[n] need it.
  bool square_summable() const { return kind != Kind::Constant; }

  std::vector<double> sequence(long count) const {
    validate();
    std::vector<double> a(count);
    switch (kind) {
      case Kind::DiminishingPower:
        for (long n = 0; n < count; ++n) a[n] = alpha0 / std::pow(n + 1.0, beta);
        break;
      case Kind::Recursive: {
        double cur = alpha0;
        for (long n = 0; n < count; ++n) {
          a[n] = cur;
          cur = cur * (1.0 - mu * cur);
        }
        break;
      }
      case Kind::Constant:
        for (long n = 0; n < count; ++n) a[n] = alpha0;
        break;
    }
    return a;
  }
};

inline StepSizeRule power_step(double alpha0, double beta) {
  StepSizeRule s;
  s.kind = StepSizeRule::Kind::DiminishingPower;
  s.alpha0 = alpha0;
  s.beta = beta;
  s.validate();
  return s;
}

inline StepSizeRule recursive_step(double alpha0, double mu) {
  StepSizeRule s;
  s.kind = StepSizeRule::Kind::Recursive;
  s.alpha0 = alpha0;
  s.mu = mu;
  s.validate();
  return s;
}

inline StepSizeRule constant_step(double alpha) {
  StepSizeRule s;
  s.kind = StepSizeRule::Kind::Constant;
  s.alpha0 = alpha;
  s.validate();
  return s;
}

struct AgentState {
  Vector x;     // local copy of the shared variable
  Vector y;     // dynamic average of the network gradient
  Vector pi;    // I y - own gradient: estimate of sum_{j != i} grad f_j
  Vector grad;  // own gradient at x
};

struct RunConfig {
  long iterations = 0;
  StepSizeRule step;
  std::uint64_t seed = 0;
  long cadence = 1;  // metric rows every this many iterations
  std::optional<double> early_stop_j;
  // inexact subproblem schedule eps_i[n] = c[i] * alpha[n]; empty = exact
  std::optional<Vector> inexact_c;
  std::optional<std::vector<Vector>> initial_points;
  std::optional<Vector> truth;  // enables the NMSE column
  bool record_tracking = true;  // tracking error costs I^2 gradient evals per row
  std::function<void(long, const std::vector<AgentState>&)> observer;
};

struct RunTrace {
  std::vector<MetricRow> rows;
  std::vector<AgentState> final_states;
  long iterations_run = 0;
};

// Relative gap of the tracking conservation law: the average of the y_i must
// equal the average of the gradients at the current iterates, exactly, at
// every iteration, because the mixing matrices are doubly stochastic.
inline double tracking_conservation_gap(const std::vector<AgentState>& states) {
  Vector ymean = Vector::Zero(states.front().y.size());
  Vector gmean = ymean;
  for (const auto& s : states) {
    ymean += s.y;
    gmean += s.grad;
  }
  ymean /= static_cast<double>(states.size());
  gmean /= static_cast<double>(states.size());
  return (ymean - gmean).norm() / (1.0 + gmean.norm());
}

namespace detail {

inline void check_states_finite(const std::vector<AgentState>& states, long n) {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (!all_finite(states[i].x) || !all_finite(states[i].y) || !all_finite(states[i].grad))
      throw NumericalError("iterate of agent " + std::to_string(i) +
                           " became non-finite at iteration " + std::to_string(n));
}

inline std::vector<Vector> initial_points(const DistributedProblem& p, const RunConfig& cfg) {
  if (cfg.initial_points) {
    if (static_cast<int>(cfg.initial_points->size()) != p.agent_count())
      throw InvalidInput("initial point count does not match the agent count");
    for (const auto& x : *cfg.initial_points)
      if (!p.feasible.contains(x, 1e-9)) throw InvalidInput("initial point is infeasible");
    return *cfg.initial_points;
  }
  auto rng = make_rng(combine_seed(cfg.seed, 0xA110ULL));
  std::vector<Vector> xs;
  for (int i = 0; i < p.agent_count(); ++i) xs.push_back(sample_feasible(p.feasible, rng));
  return xs;
}

inline double max_tracking_error(const DistributedProblem& p,
                                 const std::vector<AgentState>& states) {
  const int agents = p.agent_count();
  double worst = 0.0;
  for (int i = 0; i < agents; ++i) {
    Vector avg = Vector::Zero(p.dimension);
    for (int j = 0; j < agents; ++j) avg += p.checked_gradient(j, states[i].x);
    avg /= static_cast<double>(agents);
    worst = std::max(worst, (states[i].y - avg).norm());
  }
  return worst;
}

inline MetricRow make_row(const DistributedProblem& p, const std::vector<AgentState>& states,
                          long n, long comm, const RunConfig& cfg, bool has_tracking) {
  std::vector<Vector> xs;
  xs.reserve(states.size());
  for (const auto& s : states) xs.push_back(s.x);
  const Vector mean = consensus_mean(xs);
  MetricRow row;
  row.n = n;
  row.comm = comm;
  row.j = stationarity_gap(p, mean);
  row.d = disagreement(xs);
  if (cfg.truth) row.nmse = nmse(mean, *cfg.truth);
  row.u = p.objective(mean);
  row.track_err =
      (has_tracking && cfg.record_tracking) ? max_tracking_error(p, states) : 0.0;
  return row;
}

}  // namespace detail

// One full iteration; pure in (states, alpha), so callers can replay or fork.
inline std::vector<AgentState> next_iteration(const DistributedProblem& p,
                                              const std::vector<SurrogateModel>& models,
                                              const WeightMatrix& w,
                                              const std::vector<AgentState>& states, double alpha,
                                              const Vector* inexact_eps, long n) {
  const int agents = p.agent_count();
  std::vector<Vector> z(agents);
  for (int i = 0; i < agents; ++i) {
    const Subproblem sub =
        make_subproblem(models[i], states[i].x, states[i].pi, p.regularizer, p.feasible);
    Vector xt;
    if (inexact_eps) {
      const double eps = std::max((*inexact_eps)[i], 1e-12);
      xt = solve_inexact(sub, eps).solution;
    } else {
      xt = solve_exact(sub).solution;
    }
    z[i] = states[i].x + alpha * (xt - states[i].x);
  }
  std::vector<AgentState> next(agents);
  for (int i = 0; i < agents; ++i) {
    Vector xi = Vector::Zero(p.dimension);
    for (int j = 0; j < agents; ++j)
      if (w.entries(i, j) != 0.0) xi += w.entries(i, j) * z[j];
    next[i].x = std::move(xi);
  }
  for (int i = 0; i < agents; ++i) next[i].grad = p.checked_gradient(i, next[i].x);
  for (int i = 0; i < agents; ++i) {
    Vector yi = Vector::Zero(p.dimension);
    for (int j = 0; j < agents; ++j)
      if (w.entries(i, j) != 0.0) yi += w.entries(i, j) * states[j].y;
    yi += next[i].grad - states[i].grad;
    next[i].y = std::move(yi);
    next[i].pi = static_cast<double>(agents) * next[i].y - next[i].grad;
  }
  detail::check_states_finite(next, n);
  return next;
}

inline RunTrace run_next(const DistributedProblem& p, const std::vector<SurrogateModel>& models,
                         const GraphSchedule& schedule, const RunConfig& cfg) {
  validate_problem(p);
  if (static_cast<int>(models.size()) != p.agent_count())
    throw InvalidInput("one surrogate model per agent required");
  for (const auto& m : models) {
    if (m.dimension != p.dimension) throw InvalidInput("surrogate dimension mismatch");
    if (m.modulus <= 0.0) throw InvalidInput("surrogate model lacks strong convexity");
  }
  if (schedule.agents() != p.agent_count())
    throw InvalidInput("schedule agent count does not match the problem");
  cfg.step.validate();
  if (cfg.inexact_c) {
    if (cfg.inexact_c->size() != p.agent_count())
      throw InvalidInput("inexact schedule needs one constant per agent");
    if (cfg.inexact_c->minCoeff() <= 0.0) throw InvalidInput("inexact constants must be positive");
    if (!cfg.step.square_summable())
      throw InvalidInput("inexact solves require a square-summable step size rule");
  }

  const int agents = p.agent_count();
  const auto alphas = cfg.step.sequence(cfg.iterations);
  std::vector<AgentState> states(agents);
  const auto xs = detail::initial_points(p, cfg);
  for (int i = 0; i < agents; ++i) {
    states[i].x = xs[i];
    states[i].grad = p.checked_gradient(i, xs[i]);
    states[i].y = states[i].grad;
    states[i].pi = static_cast<double>(agents) * states[i].y - states[i].grad;
  }
  detail::check_states_finite(states, 0);

  RunTrace trace;
  trace.rows.push_back(detail::make_row(p, states, 0, 0, cfg, true));
  if (cfg.observer) cfg.observer(0, states);
  if (cfg.early_stop_j && trace.rows.back().j <= *cfg.early_stop_j) {
    trace.final_states = states;
    return trace;
  }
  for (long n = 0; n < cfg.iterations; ++n) {
    Vector eps;
    if (cfg.inexact_c) eps = *cfg.inexact_c * alphas[n];
    states = next_iteration(p, models, schedule.weight_at(n), states, alphas[n],
                            cfg.inexact_c ? &eps : nullptr, n + 1);
    trace.iterations_run = n + 1;
    if (cfg.observer) cfg.observer(n + 1, states);
    const bool last = (n + 1 == cfg.iterations);
    if ((n + 1) % cfg.cadence == 0 || last) {
      trace.rows.push_back(detail::make_row(p, states, n + 1, 2 * (n + 1), cfg, true));
      if (cfg.early_stop_j && trace.rows.back().j <= *cfg.early_stop_j) break;
    }
  }
  trace.final_states = states;
  return trace;
}

// Projected/proximal gradient consensus baseline: each agent steps along its
// own gradient only (one exchange per iteration, no tracking).  With a
// nonzero G the local step uses the prox of alpha G restricted to K, which
// reduces to the plain projection when G == 0.
inline std::vector<Vector> dgradient_iteration(const DistributedProblem& p, const WeightMatrix& w,
                                               const std::vector<Vector>& xs, double alpha,
                                               long n) {
  const int agents = p.agent_count();
  std::vector<Vector> z(agents);
  for (int i = 0; i < agents; ++i)
    z[i] = p.regularizer.prox(xs[i] - alpha * p.checked_gradient(i, xs[i]), alpha, &p.feasible);
  std::vector<Vector> next(agents);
  for (int i = 0; i < agents; ++i) {
    Vector xi = Vector::Zero(p.dimension);
    for (int j = 0; j < agents; ++j)
      if (w.entries(i, j) != 0.0) xi += w.entries(i, j) * z[j];
    if (!all_finite(xi))
      throw NumericalError("iterate of agent " + std::to_string(i) +
                           " became non-finite at iteration " + std::to_string(n));
    next[i] = std::move(xi);
  }
  return next;
}

inline RunTrace run_dgradient(const DistributedProblem& p, const GraphSchedule& schedule,
                              const RunConfig& cfg) {
  validate_problem(p);
  if (schedule.agents() != p.agent_count())
    throw InvalidInput("schedule agent count does not match the problem");
  cfg.step.validate();

  const int agents = p.agent_count();
  const auto alphas = cfg.step.sequence(cfg.iterations);
  std::vector<Vector> xs = detail::initial_points(p, cfg);
  auto to_states = [&](const std::vector<Vector>& pts) {
    std::vector<AgentState> states(agents);
    for (int i = 0; i < agents; ++i) states[i].x = pts[i];
    return states;
  };

  RunTrace trace;
  trace.rows.push_back(detail::make_row(p, to_states(xs), 0, 0, cfg, false));
  if (cfg.early_stop_j && trace.rows.back().j <= *cfg.early_stop_j) {
    trace.final_states = to_states(xs);
    return trace;
  }
  for (long n = 0; n < cfg.iterations; ++n) {
    xs = dgradient_iteration(p, schedule.weight_at(n), xs, alphas[n], n + 1);
    trace.iterations_run = n + 1;
    const bool last = (n + 1 == cfg.iterations);
    if ((n + 1) % cfg.cadence == 0 || last) {
      trace.rows.push_back(detail::make_row(p, to_states(xs), n + 1, n + 1, cfg, false));
      if (cfg.early_stop_j && trace.rows.back().j <= *cfg.early_stop_j) break;
    }
  }
  trace.final_states = to_states(xs);
  return trace;
}

}  // namespace nextsca
