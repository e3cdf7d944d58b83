#pragma once

// Multi-target localization from noisy squared-distance measurements.
//
// A network of I sensors at known positions w_i observes phi_it, a noisy
// squared distance to each of N_T unknown targets.  The shared estimate
// x = (x_t)_t minimizes
//
//     F(x) = sum_i sum_t (phi_it - |x_t - w_i|^2)^2      over a box K,
//
// a nonconvex quartic.  Two convexified models are bundled:
//  - partial linearization (per-target convex quadratic kept, higher-order
//    terms linearized), which admits an exact per-target box solution, and
//  - full linearization, solvable in one projection step.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <vector>

#include "nextsca/apps/common.hpp"
#include "nextsca/core.hpp"
#include "nextsca/problem.hpp"
#include "nextsca/surrogate.hpp"

namespace nextsca {

struct LocalizationOptions {
  int agents = 30;
  int targets = 3;
  int space_dimension = 2;          // 2-D or 3-D coordinates
  double tau = 10.0;                // proximal weight of both bundled models
  double min_snr_db = -20.0;        // +inf means noiseless
  double box_lower = 0.0;
  double box_upper = 1.0;
  std::uint64_t seed = 1;
  std::vector<Vector> node_positions;    // optional override, size == agents
  std::vector<Vector> target_positions;  // optional override, size == targets
};

struct LocalizationInstance {
  int agents = 0;
  int targets = 0;
  int space_dimension = 2;
  double tau = 10.0;
  std::vector<Vector> node_positions;  // w_i
  Vector truth;                        // stacked target coordinates
  Matrix measurements;                 // agents x targets, phi_it
  double noise_sigma = 0.0;
  double min_snr_db = 0.0;  // requested target
  Vector lower, upper;      // box bounds, length space_dimension * targets

  int dimension() const { return space_dimension * targets; }
};

namespace detail {

// Quadratic coefficient of the kept (convex) second-order part, shared by all
// targets of one agent: A_i = 4 w w' + 2 |w|^2 I.
inline Matrix localization_kept_matrix(const Vector& w) {
  const int p = static_cast<int>(w.size());
  return 4.0 * (w * w.transpose()) + 2.0 * w.squaredNorm() * Matrix::Identity(p, p);
}

// Anchor-dependent linear coefficient of the partially linearized model:
// b(a) = 4|w|^2 w - 4(|a|^2 - phi)(a - w) + 8(w'a) a.
inline Vector localization_linear_vector(const Vector& w, double phi, const Vector& a) {
  return 4.0 * w.squaredNorm() * w - 4.0 * (a.squaredNorm() - phi) * (a - w) +
         8.0 * w.dot(a) * a;
}

inline Vector localization_gradient(const LocalizationInstance& inst, int i, const Vector& x) {
  const int p = inst.space_dimension;
  Vector g(inst.dimension());
  for (int t = 0; t < inst.targets; ++t) {
    const Vector xt = x.segment(t * p, p);
    const Vector diff = xt - inst.node_positions[i];
    const double resid = inst.measurements(i, t) - diff.squaredNorm();
    g.segment(t * p, p) = -4.0 * resid * diff;
  }
  return g;
}

inline SmoothLocalCost localization_cost(const LocalizationInstance& inst, int i) {
  SmoothLocalCost c;
  c.dimension = inst.dimension();
  const int p = inst.space_dimension;
  const Vector w = inst.node_positions[i];
  const Vector phi = inst.measurements.row(i);
  c.value = [p, w, phi](const Vector& x) {
    double v = 0.0;
    for (int t = 0; t < phi.size(); ++t) {
      const double resid = phi[t] - (x.segment(t * p, p) - w).squaredNorm();
      v += resid * resid;
    }
    return v;
  };
  c.gradient = [p, w, phi](const Vector& x) -> Vector {
    Vector g(x.size());
    for (int t = 0; t < phi.size(); ++t) {
      const Vector diff = x.segment(t * p, p) - w;
      g.segment(t * p, p) = -4.0 * (phi[t] - diff.squaredNorm()) * diff;
    }
    return g;
  };
  return c;
}

}  // namespace detail

inline LocalizationInstance make_localization(const LocalizationOptions& opt) {
  if (opt.agents < 1) throw InvalidInput("localization needs at least one agent");
  if (opt.targets < 1) throw InvalidInput("localization needs at least one target");
  if (opt.space_dimension != 2 && opt.space_dimension != 3)
    throw InvalidInput("localization supports 2-D or 3-D coordinates");
  if (opt.tau <= 0.0) throw InvalidInput("localization proximal weight must be positive");
  if (!(opt.box_lower < opt.box_upper)) throw InvalidInput("localization box is empty");

  LocalizationInstance inst;
  inst.agents = opt.agents;
  inst.targets = opt.targets;
  inst.space_dimension = opt.space_dimension;
  inst.tau = opt.tau;
  inst.min_snr_db = opt.min_snr_db;
  const int p = opt.space_dimension;
  inst.lower = Vector::Constant(inst.dimension(), opt.box_lower);
  inst.upper = Vector::Constant(inst.dimension(), opt.box_upper);

  // sensor placement: uniform over the unit square (cube in 3-D)
  if (!opt.node_positions.empty()) {
    if (static_cast<int>(opt.node_positions.size()) != opt.agents)
      throw InvalidInput("localization node position count mismatch");
    for (const auto& w : opt.node_positions)
      if (w.size() != p) throw InvalidInput("localization node position dimension mismatch");
    inst.node_positions = opt.node_positions;
  } else {
    auto rng = make_rng(combine_seed(opt.seed, 0x10c0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < opt.agents; ++i) {
      Vector w(p);
      for (int k = 0; k < p; ++k) w[k] = u(rng);
      inst.node_positions.push_back(w);
    }
  }

  // target placement: bundled three-target layout in 2-D, else uniform in the box
  std::vector<Vector> targets;
  if (!opt.target_positions.empty()) {
    if (static_cast<int>(opt.target_positions.size()) != opt.targets)
      throw InvalidInput("localization target count mismatch");
    for (const auto& t : opt.target_positions)
      if (t.size() != p) throw InvalidInput("localization target dimension mismatch");
    targets = opt.target_positions;
  } else if (opt.targets == 3 && p == 2) {
    targets.resize(3, Vector(2));
    targets[0] << 0.03, 0.85;
    targets[1] << 0.86, 0.5;
    targets[2] << 0.6, 0.01;
  } else {
    auto rng = make_rng(combine_seed(opt.seed, 0x7a26));
    std::uniform_real_distribution<double> u(opt.box_lower, opt.box_upper);
    for (int t = 0; t < opt.targets; ++t) {
      Vector x(p);
      for (int k = 0; k < p; ++k) x[k] = u(rng);
      targets.push_back(x);
    }
  }
  inst.truth = Vector(inst.dimension());
  for (int t = 0; t < opt.targets; ++t) inst.truth.segment(t * p, p) = targets[t];

  // noiseless squared distances, then one shared noise level calibrated so the
  // weakest node sits exactly at the requested SNR
  Matrix clean(opt.agents, opt.targets);
  std::vector<double> powers(opt.agents, 0.0);
  for (int i = 0; i < opt.agents; ++i) {
    for (int t = 0; t < opt.targets; ++t) {
      clean(i, t) = (targets[t] - inst.node_positions[i]).squaredNorm();
      powers[i] += clean(i, t) * clean(i, t) / opt.targets;
    }
  }
  inst.noise_sigma = calibrate_noise_sigma(powers, opt.min_snr_db);
  inst.measurements = clean;
  if (inst.noise_sigma > 0.0) {
    auto rng = make_rng(combine_seed(opt.seed, 0x401e));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < opt.agents; ++i)
      for (int t = 0; t < opt.targets; ++t)
        inst.measurements(i, t) += inst.noise_sigma * gauss(rng);
  }
  return inst;
}

inline DistributedProblem localization_problem(const LocalizationInstance& inst) {
  DistributedProblem prob;
  prob.dimension = inst.dimension();
  for (int i = 0; i < inst.agents; ++i) prob.costs.push_back(detail::localization_cost(inst, i));
  prob.regularizer = zero_regularizer();
  prob.feasible = box_set(inst.lower, inst.upper);
  return prob;
}

// Partially linearized models: per target, the convex quadratic part of the
// quartic is kept (Hessian 2A_i + tau I, constant per agent) and the rest is
// linearized at the anchor.  In 2-D each per-target box subproblem is solved
// exactly, so the model carries an exact-minimizer hook.
inline std::vector<SurrogateModel> localization_pl_models(const LocalizationInstance& inst) {
  const int p = inst.space_dimension;
  const int m = inst.dimension();
  std::vector<SurrogateModel> models;
  models.reserve(inst.agents);
  for (int i = 0; i < inst.agents; ++i) {
    const Vector w = inst.node_positions[i];
    const double tau = inst.tau;
    const Matrix hess =
        2.0 * detail::localization_kept_matrix(w) + tau * Matrix::Identity(p, p);
    std::vector<SurrogateModel> parts;
    std::vector<std::vector<int>> blocks;
    for (int t = 0; t < inst.targets; ++t) {
      const double phi = inst.measurements(i, t);
      auto linear = [w, phi, tau](const Vector& a) -> Vector {
        return -(detail::localization_linear_vector(w, phi, a) + tau * a);
      };
      parts.push_back(
          make_quadratic_surrogate(SurrogateKind::PartialLinearize, hess, linear));
      std::vector<int> block(p);
      for (int k = 0; k < p; ++k) block[k] = t * p + k;
      blocks.push_back(block);
    }
    SurrogateModel model = make_block_separable_surrogate(std::move(parts), std::move(blocks), m);
    if (p == 2) {
      const int targets = inst.targets;
      const Vector phi_row = inst.measurements.row(i);
      model.closed_form = [w, phi_row, tau, hess, targets](const Subproblem& sub) -> Vector {
        if (!sub.regularizer->is_zero || !sub.feasible->box_bounds)
          throw InvalidInput("localization exact step needs a plain box subproblem");
        const auto& [lo, hi] = *sub.feasible->box_bounds;
        Vector out(sub.anchor.size());
        for (int t = 0; t < targets; ++t) {
          const Vector a = sub.anchor.segment(2 * t, 2);
          const Vector q = -(detail::localization_linear_vector(w, phi_row[t], a) + tau * a) +
                           sub.tracked.segment(2 * t, 2);
          out.segment(2 * t, 2) =
              solve_box_qp_2d(hess, q, lo.segment(2 * t, 2), hi.segment(2 * t, 2));
        }
        return out;
      };
    }
    models.push_back(std::move(model));
  }
  return models;
}

// Fully linearized models: one projection step per subproblem.
inline std::vector<SurrogateModel> localization_l_models(const LocalizationInstance& inst) {
  std::vector<SurrogateModel> models;
  models.reserve(inst.agents);
  for (int i = 0; i < inst.agents; ++i)
    models.push_back(make_linearize_surrogate(detail::localization_cost(inst, i), inst.tau));
  return models;
}

// Text manifest with everything needed to reproduce the instance exactly.
inline void write_localization_manifest(const LocalizationInstance& inst, std::ostream& out) {
  out << "nextsca-localization v1\n";
  out << "agents " << inst.agents << "\n";
  out << "targets " << inst.targets << "\n";
  out << "space " << inst.space_dimension << "\n";
  out << "tau " << format_value(inst.tau) << "\n";
  out << "min-snr-db " << format_value(inst.min_snr_db) << "\n";
  out << "noise-sigma " << format_value(inst.noise_sigma) << "\n";
  for (int k = 0; k < inst.dimension(); ++k)
    out << "box " << k << " " << format_value(inst.lower[k]) << " "
        << format_value(inst.upper[k]) << "\n";
  for (int i = 0; i < inst.agents; ++i) {
    out << "node " << i;
    for (int k = 0; k < inst.space_dimension; ++k)
      out << " " << format_value(inst.node_positions[i][k]);
    out << "\n";
  }
  for (int t = 0; t < inst.targets; ++t) {
    out << "target " << t;
    for (int k = 0; k < inst.space_dimension; ++k)
      out << " " << format_value(inst.truth[t * inst.space_dimension + k]);
    out << "\n";
  }
  for (int i = 0; i < inst.agents; ++i)
    for (int t = 0; t < inst.targets; ++t)
      out << "measurement " << i << " " << t << " " << format_value(inst.measurements(i, t))
          << "\n";
  out << "end\n";
}

}  // namespace nextsca
