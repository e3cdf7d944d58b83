// Problem description shared by the solver and the centralized oracles:
// per-agent smooth costs f_i, one common convex regularizer G, and one common
// closed convex feasible set K.  The network minimizes sum_i f_i + G over K.
#pragma once

#include "nextsca/core.hpp"

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace nextsca {

struct FeasibleSet {
  int dimension = 0;
  std::function<Vector(const Vector&)> project;
  // set when K is an axis-aligned box (possibly with infinite bounds)
  std::optional<std::pair<Vector, Vector>> box_bounds;

  bool contains(const Vector& v, double tol = 1e-9) const {
    return (v - project(v)).lpNorm<Eigen::Infinity>() <= tol;
  }
};

inline FeasibleSet box_set(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size()) throw InvalidInput("box bounds size mismatch");
  for (int k = 0; k < lower.size(); ++k)
    if (lower[k] > upper[k]) throw InvalidInput("box has lower > upper");
  FeasibleSet s;
  s.dimension = static_cast<int>(lower.size());
  s.box_bounds = {lower, upper};
  s.project = [lower, upper](const Vector& v) -> Vector {
    return v.cwiseMax(lower).cwiseMin(upper);
  };
  return s;
}

inline FeasibleSet box_set(int dimension, double lower, double upper) {
  return box_set(Vector::Constant(dimension, lower), Vector::Constant(dimension, upper));
}

inline FeasibleSet unbounded_set(int dimension) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  FeasibleSet s;
  s.dimension = dimension;
  s.box_bounds = {Vector::Constant(dimension, -inf), Vector::Constant(dimension, inf)};
  s.project = [](const Vector& v) { return v; };
  return s;
}

// Projection onto {x : Ax <= b} ∩ [lower, upper] by cyclic Dykstra iterations
// over the individual halfspaces and the box.
inline FeasibleSet halfspace_box_set(const Matrix& a, const Vector& b, const Vector& lower,
                                     const Vector& upper, double tol = 1e-12,
                                     int max_sweeps = 20000) {
  if (a.rows() != b.size()) throw InvalidInput("halfspace count mismatch");
  if (a.cols() != lower.size() || lower.size() != upper.size())
    throw InvalidInput("halfspace/box dimension mismatch");
  const int m = static_cast<int>(a.rows());
  std::vector<double> row_sq(m);
  for (int l = 0; l < m; ++l) {
    row_sq[l] = a.row(l).squaredNorm();
    if (row_sq[l] == 0.0) throw InvalidInput("zero halfspace normal");
  }
  FeasibleSet s;
  s.dimension = static_cast<int>(lower.size());
  s.project = [a, b, lower, upper, row_sq, m, tol, max_sweeps](const Vector& v) -> Vector {
    Vector x = v;
    Matrix corr = Matrix::Zero(m + 1, v.size());  // Dykstra increments, one per set
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      const Vector before = x;
      for (int l = 0; l < m; ++l) {
        const Vector y = x + corr.row(l).transpose();
        const double viol = a.row(l).dot(y) - b[l];
        const Vector proj = viol > 0.0 ? Vector(y - (viol / row_sq[l]) * a.row(l).transpose()) : y;
        corr.row(l) = (y - proj).transpose();
        x = proj;
      }
      const Vector y = x + corr.row(m).transpose();
      const Vector proj = y.cwiseMax(lower).cwiseMin(upper);
      corr.row(m) = (y - proj).transpose();
      x = proj;
      double viol = 0.0;
      for (int l = 0; l < m; ++l) viol = std::max(viol, a.row(l).dot(x) - b[l]);
      if ((x - before).lpNorm<Eigen::Infinity>() <= tol && viol <= tol) return x;
    }
    throw NumericalError("halfspace/box projection did not converge");
  };
  return s;
}

// Convex regularizer G with a proximal operator.  prox(v, gamma, set) solves
// argmin_u G(u) + ||u - v||^2 / (2 gamma), restricted to the set when one is
// passed.  For a linear G the restriction is exact for any set (complete the
// square); for the l1 term it is exact on boxes and falls back to Dykstra
// iterations otherwise.
struct Regularizer {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> subgradient;
  std::function<Vector(const Vector&, double, const FeasibleSet*)> prox;
  bool is_zero = false;
};

namespace detail {

inline Vector soft_threshold(const Vector& v, double t) {
  return v.unaryExpr([t](double x) { return x > t ? x - t : (x < -t ? x + t : 0.0); });
}

// Dykstra for prox of G + indicator(K) given an exact unconstrained prox of G.
inline Vector dykstra_prox(const std::function<Vector(const Vector&)>& prox_g,
                           const FeasibleSet& set, const Vector& v, double tol = 1e-12,
                           int max_sweeps = 20000) {
  Vector x = v, p = Vector::Zero(v.size()), q = Vector::Zero(v.size());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Vector y = prox_g(x + p);
    p = x + p - y;
    const Vector z = set.project(y + q);
    q = y + q - z;
    if ((z - x).lpNorm<Eigen::Infinity>() <= tol && (z - y).lpNorm<Eigen::Infinity>() <= tol)
      return z;
    x = z;
  }
  throw NumericalError("regularizer prox (Dykstra) did not converge");
}

}  // namespace detail

inline Regularizer zero_regularizer() {
  Regularizer r;
  r.is_zero = true;
  r.value = [](const Vector&) { return 0.0; };
  r.subgradient = [](const Vector& v) { return Vector(Vector::Zero(v.size())); };
  r.prox = [](const Vector& v, double, const FeasibleSet* set) -> Vector {
    return set ? set->project(v) : v;
  };
  return r;
}

inline Regularizer l1_regularizer(double lambda) {
  if (lambda < 0.0) throw InvalidInput("l1 weight must be nonnegative");
  Regularizer r;
  r.value = [lambda](const Vector& v) { return lambda * v.lpNorm<1>(); };
  r.subgradient = [lambda](const Vector& v) -> Vector {
    return v.unaryExpr([lambda](double x) { return x > 0 ? lambda : (x < 0 ? -lambda : 0.0); });
  };
  r.prox = [lambda](const Vector& v, double gamma, const FeasibleSet* set) -> Vector {
    if (!set) return detail::soft_threshold(v, gamma * lambda);
    if (set->box_bounds) {
      // separable: per-coordinate soft threshold then clamp is the exact prox
      const Vector s = detail::soft_threshold(v, gamma * lambda);
      return s.cwiseMax(set->box_bounds->first).cwiseMin(set->box_bounds->second);
    }
    const double t = gamma * lambda;
    return detail::dykstra_prox([t](const Vector& y) { return detail::soft_threshold(y, t); },
                                *set, v);
  };
  return r;
}

inline Regularizer linear_regularizer(const Vector& weights) {
  Regularizer r;
  const Vector w = weights;
  r.value = [w](const Vector& v) { return w.dot(v); };
  r.subgradient = [w](const Vector&) { return w; };
  r.prox = [w](const Vector& v, double gamma, const FeasibleSet* set) -> Vector {
    const Vector shifted = v - gamma * w;
    return set ? set->project(shifted) : shifted;
  };
  return r;
}

// One agent's private smooth cost.
struct SmoothLocalCost {
  int dimension = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::optional<double> lipschitz_hint;      // gradient Lipschitz constant if known
  std::optional<double> convexity_modulus;   // strong convexity if known, else unset
};

struct DistributedProblem {
  std::vector<SmoothLocalCost> costs;
  Regularizer regularizer;
  FeasibleSet feasible;
  int dimension = 0;

  int agent_count() const { return static_cast<int>(costs.size()); }

  double checked_value(int agent, const Vector& x) const {
    const double v = costs[agent].value(x);
    if (!std::isfinite(v))
      throw NumericalError("cost oracle of agent " + std::to_string(agent) +
                           " returned a non-finite value");
    return v;
  }

  Vector checked_gradient(int agent, const Vector& x) const {
    Vector g = costs[agent].gradient(x);
    if (!all_finite(g))
      throw NumericalError("gradient oracle of agent " + std::to_string(agent) +
                           " returned a non-finite value");
    return g;
  }

  double sum_value(const Vector& x) const {
    double total = 0.0;
    for (int i = 0; i < agent_count(); ++i) total += checked_value(i, x);
    return total;
  }

  Vector sum_gradient(const Vector& x) const {
    Vector g = Vector::Zero(dimension);
    for (int i = 0; i < agent_count(); ++i) g += checked_gradient(i, x);
    return g;
  }

  // full objective U = F + G
  double objective(const Vector& x) const { return sum_value(x) + regularizer.value(x); }
};

inline void validate_problem(const DistributedProblem& p) {
  if (p.costs.empty()) throw InvalidInput("problem needs at least one agent");
  if (p.dimension <= 0) throw InvalidInput("problem dimension must be positive");
  if (p.feasible.dimension != p.dimension) throw InvalidInput("feasible set dimension mismatch");
  for (std::size_t i = 0; i < p.costs.size(); ++i)
    if (p.costs[i].dimension != p.dimension)
      throw InvalidInput("cost dimension mismatch at agent " + std::to_string(i));
}

// Unit-step proximal-gradient residual ||x - prox_{G+K}(x - grad F(x))||_inf.
// Zero exactly at stationary points of F + G over K.
inline double stationarity_residual(const DistributedProblem& p, const Vector& x) {
  const Vector g = p.sum_gradient(x);
  const Vector step = p.regularizer.prox(x - g, 1.0, &p.feasible);
  return (x - step).lpNorm<Eigen::Infinity>();
}

// Draw a feasible starting point: uniform over the box hull when finite box
// bounds exist, otherwise a projected standard Gaussian sample.
inline Vector sample_feasible(const FeasibleSet& set, std::mt19937_64& rng) {
  if (set.box_bounds) {
    const auto& [lo, hi] = *set.box_bounds;
    bool finite = true;
    for (int k = 0; k < lo.size(); ++k)
      if (!std::isfinite(lo[k]) || !std::isfinite(hi[k])) finite = false;
    if (finite) {
      Vector x(lo.size());
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int k = 0; k < lo.size(); ++k) x[k] = lo[k] + (hi[k] - lo[k]) * unit(rng);
      return x;
    }
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector x(set.dimension);
  for (int k = 0; k < x.size(); ++k) x[k] = gauss(rng);
  return set.project(x);
}

// --- validation hooks ------------------------------------------------------

// Max relative error between the analytic gradient and central differences.
inline double check_gradient(const SmoothLocalCost& cost, const std::vector<Vector>& points) {
  double worst = 0.0;
  for (const Vector& x : points) {
    const double h = 1e-6 * (1.0 + x.norm());
    const Vector g = cost.gradient(x);
    Vector fd(x.size());
    for (int k = 0; k < x.size(); ++k) {
      Vector xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      fd[k] = (cost.value(xp) - cost.value(xm)) / (2.0 * h);
    }
    worst = std::max(worst, (g - fd).norm() / (1.0 + g.norm()));
  }
  return worst;
}

// Midpoint convexity of the regularizer on the given pairs.
inline bool check_convexity(const Regularizer& reg, const std::vector<std::pair<Vector, Vector>>& pairs,
                            double tol = 1e-10) {
  for (const auto& [a, b] : pairs) {
    const double mid = reg.value(0.5 * (a + b));
    if (mid > 0.5 * (reg.value(a) + reg.value(b)) + tol) return false;
  }
  return true;
}

// Idempotence and nonexpansiveness of the projection on the given points.
inline bool check_projection(const FeasibleSet& set, const std::vector<Vector>& points,
                             double tol = 1e-10) {
  for (const Vector& v : points) {
    const Vector p = set.project(v);
    if ((set.project(p) - p).lpNorm<Eigen::Infinity>() > tol) return false;
  }
  for (std::size_t a = 0; a + 1 < points.size(); ++a) {
    const Vector pa = set.project(points[a]), pb = set.project(points[a + 1]);
    if ((pa - pb).norm() > (points[a] - points[a + 1]).norm() * (1.0 + 1e-12) + tol) return false;
  }
  return true;
}

}  // namespace nextsca
