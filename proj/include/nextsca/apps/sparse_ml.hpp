#pragma once

// Sparse distributed maximum-likelihood estimation.  Each agent supplies a
// log-likelihood oracle log p(phi_i | x); the network estimate minimizes
//
//     F(x) + G(x) = sum_i -log p(phi_i | x) + lambda |x|_1    over K,
//
// the Laplacian-prior point estimate.  Likelihoods need not be log-concave,
// so F is allowed to be nonconvex.  A Gaussian linear-model generator is
// bundled: there the problem reduces to box-constrained l1-regularized least
// squares.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <vector>

#include "nextsca/apps/common.hpp"
#include "nextsca/core.hpp"
#include "nextsca/problem.hpp"
#include "nextsca/surrogate.hpp"

namespace nextsca {

// Wires arbitrary log-likelihood oracles into the solver's minimization form.
// Each oracle is spot-checked against finite differences at a few feasible
// points before being accepted.
inline DistributedProblem build_sparse_ml(const std::vector<SmoothLocalCost>& log_likelihoods,
                                          double lambda, FeasibleSet feasible,
                                          bool verify_gradients = true) {
  if (log_likelihoods.empty()) throw InvalidInput("sparse estimation needs at least one agent");
  if (lambda < 0.0) throw InvalidInput("sparse estimation weight must be nonnegative");
  DistributedProblem prob;
  prob.dimension = feasible.dimension;
  for (std::size_t i = 0; i < log_likelihoods.size(); ++i) {
    const auto& ll = log_likelihoods[i];
    if (ll.dimension != feasible.dimension)
      throw InvalidInput("sparse estimation oracle dimension mismatch");
    SmoothLocalCost c;
    c.dimension = ll.dimension;
    c.value = [ll](const Vector& x) { return -ll.value(x); };
    c.gradient = [ll](const Vector& x) -> Vector { return -ll.gradient(x); };
    c.lipschitz_hint = ll.lipschitz_hint;
    prob.costs.push_back(std::move(c));
  }
  prob.regularizer = l1_regularizer(lambda);
  prob.feasible = std::move(feasible);
  if (verify_gradients) {
    auto rng = make_rng(0x5eed);
    for (std::size_t i = 0; i < prob.costs.size(); ++i) {
      std::vector<Vector> probes;
      for (int probe = 0; probe < 3; ++probe) probes.push_back(sample_feasible(prob.feasible, rng));
      if (check_gradient(prob.costs[i], probes) > 1e-5)
        throw InvalidInput("sparse estimation oracle gradient fails a finite-difference check");
    }
  }
  return prob;
}

// Generic models for arbitrary likelihoods: linearize at the anchor.
inline std::vector<SurrogateModel> sparse_ml_models(const DistributedProblem& prob, double tau) {
  std::vector<SurrogateModel> models;
  models.reserve(prob.costs.size());
  for (const auto& c : prob.costs) models.push_back(make_linearize_surrogate(c, tau));
  return models;
}

// --- Gaussian linear model ------------------------------------------------

struct SparseRegressionOptions {
  int agents = 6;
  int dimension = 10;
  int rows_per_agent = 8;  // measurements per agent
  int nonzeros = 3;        // support size of the ground truth
  double lambda = 0.1;
  double noise_sigma = 0.01;
  double bound = 10.0;  // K = [-bound, bound]^dimension
  double tau = 1.0;
  std::uint64_t seed = 1;
};

struct SparseRegressionInstance {
  std::vector<Matrix> designs;       // A_i
  std::vector<Vector> observations;  // phi_i
  Vector truth;
  double lambda = 0.1;
  double noise_sigma = 0.0;
  double bound = 10.0;
  double tau = 1.0;

  int agents() const { return static_cast<int>(designs.size()); }
  int dimension() const { return static_cast<int>(truth.size()); }
};

inline SparseRegressionInstance make_sparse_regression(const SparseRegressionOptions& opt) {
  if (opt.agents < 1 || opt.dimension < 1 || opt.rows_per_agent < 1)
    throw InvalidInput("sparse regression sizes must be positive");
  if (opt.nonzeros < 0 || opt.nonzeros > opt.dimension)
    throw InvalidInput("sparse regression support size out of range");
  if (opt.lambda < 0.0 || opt.noise_sigma < 0.0 || opt.bound <= 0.0 || opt.tau <= 0.0)
    throw InvalidInput("sparse regression parameters out of range");
  SparseRegressionInstance inst;
  inst.lambda = opt.lambda;
  inst.noise_sigma = opt.noise_sigma;
  inst.bound = opt.bound;
  inst.tau = opt.tau;
  auto rng = make_rng(combine_seed(opt.seed, 0x5a12));
  // sparse ground truth: random support, magnitudes in [0.5, 1.5]
  inst.truth = Vector::Zero(opt.dimension);
  std::vector<int> coords(opt.dimension);
  for (int k = 0; k < opt.dimension; ++k) coords[k] = k;
  std::shuffle(coords.begin(), coords.end(), rng);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::bernoulli_distribution sign(0.5);
  for (int k = 0; k < opt.nonzeros; ++k)
    inst.truth[coords[k]] = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(opt.rows_per_agent));
  for (int i = 0; i < opt.agents; ++i) {
    Matrix a(opt.rows_per_agent, opt.dimension);
    for (int r = 0; r < opt.rows_per_agent; ++r)
      for (int k = 0; k < opt.dimension; ++k) a(r, k) = scale * gauss(rng);
    Vector phi = a * inst.truth;
    for (int r = 0; r < opt.rows_per_agent; ++r) phi[r] += opt.noise_sigma * gauss(rng);
    inst.designs.push_back(std::move(a));
    inst.observations.push_back(std::move(phi));
  }
  return inst;
}

inline DistributedProblem sparse_regression_problem(const SparseRegressionInstance& inst) {
  std::vector<SmoothLocalCost> log_likelihoods;
  for (int i = 0; i < inst.agents(); ++i) {
    const Matrix a = inst.designs[i];
    const Vector phi = inst.observations[i];
    SmoothLocalCost ll;
    ll.dimension = inst.dimension();
    ll.value = [a, phi](const Vector& x) { return -0.5 * (phi - a * x).squaredNorm(); };
    ll.gradient = [a, phi](const Vector& x) -> Vector { return a.transpose() * (phi - a * x); };
    Eigen::SelfAdjointEigenSolver<Matrix> es(a.transpose() * a, Eigen::EigenvaluesOnly);
    ll.lipschitz_hint = es.eigenvalues().maxCoeff();
    log_likelihoods.push_back(std::move(ll));
  }
  return build_sparse_ml(log_likelihoods, inst.lambda,
                         box_set(inst.dimension(), -inst.bound, inst.bound),
                         /*verify_gradients=*/false);
}

// Convexity-preserving models for the Gaussian linear case: constant Hessian
// A_i'A_i + tau I.
inline std::vector<SurrogateModel> sparse_regression_models(const SparseRegressionInstance& inst) {
  std::vector<SurrogateModel> models;
  const int m = inst.dimension();
  for (int i = 0; i < inst.agents(); ++i) {
    const Matrix& a = inst.designs[i];
    const Matrix hess = a.transpose() * a + inst.tau * Matrix::Identity(m, m);
    const Vector rhs = a.transpose() * inst.observations[i];
    const double tau = inst.tau;
    auto linear = [rhs, tau](const Vector& anchor) -> Vector { return -(rhs + tau * anchor); };
    models.push_back(make_quadratic_surrogate(SurrogateKind::KeepConvex, hess, linear));
  }
  return models;
}

inline void write_sparse_regression_manifest(const SparseRegressionInstance& inst,
                                             std::ostream& out) {
  out << "nextsca-sparse-regression v1\n";
  out << "agents " << inst.agents() << "\n";
  out << "dimension " << inst.dimension() << "\n";
  out << "lambda " << format_value(inst.lambda) << "\n";
  out << "tau " << format_value(inst.tau) << "\n";
  out << "bound " << format_value(inst.bound) << "\n";
  out << "noise-sigma " << format_value(inst.noise_sigma) << "\n";
  for (int k = 0; k < inst.dimension(); ++k)
    out << "truth " << k << " " << format_value(inst.truth[k]) << "\n";
  for (int i = 0; i < inst.agents(); ++i) {
    const Matrix& a = inst.designs[i];
    for (int r = 0; r < a.rows(); ++r) {
      out << "row " << i << " " << r << " " << format_value(inst.observations[i][r]);
      for (int k = 0; k < a.cols(); ++k) out << " " << format_value(a(r, k));
      out << "\n";
    }
  }
  out << "end\n";
}

}  // namespace nextsca
