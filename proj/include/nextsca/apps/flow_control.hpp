#pragma once

// Rate control over a capacitated network.  Each of I sources transmits at a
// rate inside [m_i, M_i] along a fixed set of links, the aggregate rate on a
// link may not exceed its capacity, and source i collects the sigmoidal
// utility 1/(1+exp(-(alpha_i x_i + beta_i))).  Maximizing total utility is
// recast as minimizing
//
//     F(x) = sum_i -sigmoid(alpha_i x_i + beta_i)
//
// over the coupled polyhedron K (capacity halfspaces intersected with the
// rate box), which every agent knows and projects onto iteratively.  Each
// agent optimizes a local copy of the full rate vector; its own utility only
// depends on its own coordinate.
//
// The negated sigmoid is a difference of convex functions: with
// u = alpha x + beta,
//
//     -sigmoid(u) = [e^u - sigmoid(u)] - e^u,
//
// both brackets convex.  The bundled model keeps the first bracket and
// linearizes e^u at the anchor, plus a proximal term.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "nextsca/apps/common.hpp"
#include "nextsca/core.hpp"
#include "nextsca/problem.hpp"
#include "nextsca/surrogate.hpp"

namespace nextsca {

struct FlowControlOptions {
  int sources = 6;
  int links = 4;
  int max_path_links = 2;  // each source routes over 1..max_path_links links
  double capacity_low = 0.8;
  double capacity_high = 1.6;
  double min_rate = 0.0;
  double max_rate = 1.0;
  int slope_low = 3;     // sigmoid slope, positive integer
  int slope_high = 8;
  int offset_low = -6;   // sigmoid offset, negative integer
  int offset_high = -2;
  double tau = 1.0;
  std::uint64_t seed = 1;
};

struct FlowControlInstance {
  std::vector<double> capacities;       // per link
  std::vector<std::vector<int>> paths;  // links used by each source
  Vector min_rate, max_rate;            // per source
  std::vector<int> slope, offset;       // sigmoid parameters per source
  double tau = 1.0;

  int sources() const { return static_cast<int>(paths.size()); }
  int links() const { return static_cast<int>(capacities.size()); }
};

// Overflow-safe logistic function.
inline double stable_sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// Convex split of the negated sigmoid: -sigmoid(u) = kept(u) - linearized(u).
inline double sigmoid_split_kept(double u) { return std::exp(u) - stable_sigmoid(u); }
inline double sigmoid_split_kept_derivative(double u) {
  const double s = stable_sigmoid(u);
  return std::exp(u) - s * (1.0 - s);
}
inline double sigmoid_split_linearized(double u) { return std::exp(u); }

inline void validate_flow_control(const FlowControlInstance& inst) {
  const int n = inst.sources();
  if (n < 1) throw InvalidInput("flow control needs at least one source");
  if (inst.min_rate.size() != n || inst.max_rate.size() != n ||
      static_cast<int>(inst.slope.size()) != n || static_cast<int>(inst.offset.size()) != n)
    throw InvalidInput("flow control per-source field size mismatch");
  if (inst.tau <= 0.0) throw InvalidInput("flow control proximal weight must be positive");
  for (int i = 0; i < n; ++i) {
    if (inst.slope[i] <= 0) throw InvalidInput("flow control sigmoid slope must be positive");
    if (inst.offset[i] >= 0) throw InvalidInput("flow control sigmoid offset must be negative");
    if (!(inst.min_rate[i] >= 0.0) || !(inst.min_rate[i] <= inst.max_rate[i]))
      throw InvalidInput("flow control rate bounds must satisfy 0 <= min <= max");
    for (int l : inst.paths[i])
      if (l < 0 || l >= inst.links()) throw InvalidInput("flow control path uses unknown link");
  }
  for (int l = 0; l < inst.links(); ++l) {
    double committed = 0.0;
    for (int i = 0; i < n; ++i)
      for (int pl : inst.paths[i])
        if (pl == l) committed += inst.min_rate[i];
    if (committed > inst.capacities[l])
      throw InvalidInput("flow control infeasible: minimum rates exceed a link capacity");
  }
}

inline FlowControlInstance make_flow_control(const FlowControlOptions& opt) {
  if (opt.sources < 1 || opt.links < 1) throw InvalidInput("flow control sizes must be positive");
  if (opt.max_path_links < 1) throw InvalidInput("flow control paths need at least one link");
  if (!(opt.capacity_low > 0.0) || opt.capacity_high < opt.capacity_low)
    throw InvalidInput("flow control capacity range invalid");
  if (opt.slope_low < 1 || opt.slope_high < opt.slope_low || opt.offset_high >= 0 ||
      opt.offset_low > opt.offset_high)
    throw InvalidInput("flow control sigmoid parameter range invalid");

  FlowControlInstance inst;
  inst.tau = opt.tau;
  auto rng = make_rng(combine_seed(opt.seed, 0xf10c));
  std::uniform_real_distribution<double> cap(opt.capacity_low, opt.capacity_high);
  for (int l = 0; l < opt.links; ++l) inst.capacities.push_back(cap(rng));
  std::uniform_int_distribution<int> path_len(1, std::min(opt.max_path_links, opt.links));
  std::uniform_int_distribution<int> link_pick(0, opt.links - 1);
  std::uniform_int_distribution<int> slope(opt.slope_low, opt.slope_high);
  std::uniform_int_distribution<int> offset(opt.offset_low, opt.offset_high);
  inst.min_rate = Vector::Constant(opt.sources, opt.min_rate);
  inst.max_rate = Vector::Constant(opt.sources, opt.max_rate);
  for (int i = 0; i < opt.sources; ++i) {
    const int len = path_len(rng);
    std::vector<int> path;
    while (static_cast<int>(path.size()) < len) {
      const int l = link_pick(rng);
      bool seen = false;
      for (int q : path) seen = seen || q == l;
      if (!seen) path.push_back(l);
    }
    inst.paths.push_back(path);
    inst.slope.push_back(slope(rng));
    inst.offset.push_back(offset(rng));
  }
  validate_flow_control(inst);
  return inst;
}

inline FeasibleSet flow_control_set(const FlowControlInstance& inst) {
  const int n = inst.sources();
  Matrix a = Matrix::Zero(inst.links(), n);
  Vector b(inst.links());
  for (int l = 0; l < inst.links(); ++l) b[l] = inst.capacities[l];
  for (int i = 0; i < n; ++i)
    for (int l : inst.paths[i]) a(l, i) = 1.0;
  return halfspace_box_set(a, b, inst.min_rate, inst.max_rate);
}

inline DistributedProblem flow_control_problem(const FlowControlInstance& inst) {
  validate_flow_control(inst);
  DistributedProblem prob;
  const int n = inst.sources();
  prob.dimension = n;
  for (int i = 0; i < n; ++i) {
    SmoothLocalCost c;
    c.dimension = n;
    const double alpha = inst.slope[i];
    const double beta = inst.offset[i];
    c.value = [i, alpha, beta](const Vector& x) {
      return -stable_sigmoid(alpha * x[i] + beta);
    };
    c.gradient = [i, alpha, beta](const Vector& x) -> Vector {
      const double s = stable_sigmoid(alpha * x[i] + beta);
      Vector g = Vector::Zero(x.size());
      g[i] = -alpha * s * (1.0 - s);
      return g;
    };
    prob.costs.push_back(std::move(c));
  }
  prob.regularizer = zero_regularizer();
  prob.feasible = flow_control_set(inst);
  return prob;
}

// Difference-of-convex models: keep e^u - sigmoid(u) of the own coordinate,
// linearize e^u at the anchor, add the proximal term.
inline std::vector<SurrogateModel> flow_control_models(const FlowControlInstance& inst) {
  validate_flow_control(inst);
  const int n = inst.sources();
  std::vector<SurrogateModel> models;
  models.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double alpha = inst.slope[i];
    const double beta = inst.offset[i];
    SmoothLocalCost kept;
    kept.dimension = n;
    kept.value = [i, alpha, beta](const Vector& x) {
      return sigmoid_split_kept(alpha * x[i] + beta);
    };
    kept.gradient = [i, alpha, beta](const Vector& x) -> Vector {
      Vector g = Vector::Zero(x.size());
      g[i] = alpha * sigmoid_split_kept_derivative(alpha * x[i] + beta);
      return g;
    };
    SmoothLocalCost linearized;
    linearized.dimension = n;
    linearized.value = [i, alpha, beta](const Vector& x) {
      return sigmoid_split_linearized(alpha * x[i] + beta);
    };
    linearized.gradient = [i, alpha, beta](const Vector& x) -> Vector {
      Vector g = Vector::Zero(x.size());
      g[i] = alpha * std::exp(alpha * x[i] + beta);
      return g;
    };
    models.push_back(make_dc_split_surrogate(kept, linearized, inst.tau));
  }
  return models;
}

inline void write_flow_control_manifest(const FlowControlInstance& inst, std::ostream& out) {
  out << "nextsca-flow-control v1\n";
  out << "sources " << inst.sources() << "\n";
  out << "links " << inst.links() << "\n";
  out << "tau " << format_value(inst.tau) << "\n";
  for (int l = 0; l < inst.links(); ++l)
    out << "capacity " << l << " " << format_value(inst.capacities[l]) << "\n";
  for (int i = 0; i < inst.sources(); ++i) {
    out << "source " << i << " " << format_value(inst.min_rate[i]) << " "
        << format_value(inst.max_rate[i]) << " " << inst.slope[i] << " " << inst.offset[i];
    for (int l : inst.paths[i]) out << " " << l;
    out << "\n";
  }
  out << "end\n";
}

}  // namespace nextsca
