#pragma once

// Spectrum cartography: a network of sensing nodes estimates the power each
// transmitter emits on each frequency basis from noisy power-spectral-density
// samples.  With x stacking per-source basis powers,
//
//     F(x) = sum_i |phi_i - B_i x|^2 + lambda 1'x      over K = [0, cap]^m,
//
// a convex least-squares fit with a nonnegative-power box and a linear
// shrinkage term.  The regressor B_i combines rectangular frequency bases
// with the node-to-source path loss 1/(1+d^2).

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <vector>

#include "nextsca/apps/common.hpp"
#include "nextsca/core.hpp"
#include "nextsca/problem.hpp"
#include "nextsca/surrogate.hpp"

namespace nextsca {

struct CartographyOptions {
  int agents = 30;
  int sources = 2;    // transmitters
  int bases = 10;     // frequency basis functions per source
  int channels = 30;  // sensed frequency channels
  double lambda = 1e-3;
  double tau = 0.8;
  double min_snr_db = 3.0;  // +inf means noiseless
  double area_side = 10.0;  // nodes placed uniformly over [0, side]^2
  double power_cap = 5.0;   // K = [0, power_cap]^m
  std::uint64_t seed = 1;
  std::vector<Vector> node_positions;    // optional override
  std::vector<Vector> source_positions;  // optional override
};

struct CartographyInstance {
  int agents = 0;
  int sources = 0;
  int bases = 0;
  int channels = 0;
  double lambda = 1e-3;
  double tau = 0.8;
  double power_cap = 5.0;
  std::vector<Matrix> regressors;  // B_i: channels x (sources * bases)
  std::vector<Vector> measurements;
  Vector truth;  // emitted power per (source, basis), source-major
  double noise_sigma = 0.0;
  double min_snr_db = 0.0;

  int dimension() const { return sources * bases; }
};

namespace detail {

// Bundled transmit profile: with two sources and the full basis count, source
// one spreads 1 W over bases 2-4 and source two spreads 0.5 W over bases 6-9
// (1-indexed).  Smaller basis counts fall back to contiguous chunks, odd
// sources at 1 W and even ones at 0.5 W, spread uniformly over their chunk.
inline Vector cartography_truth(int sources, int bases) {
  Vector truth = Vector::Zero(sources * bases);
  auto spread = [&](int s, const std::vector<int>& active, double budget) {
    for (int k : active) truth[s * bases + k] = budget / active.size();
  };
  if (sources == 2 && bases >= 9) {
    spread(0, {1, 2, 3}, 1.0);
    spread(1, {5, 6, 7, 8}, 0.5);
    return truth;
  }
  for (int s = 0; s < sources; ++s) {
    const int begin = s * bases / sources;
    const int end = (s + 1) * bases / sources;
    std::vector<int> active;
    for (int k = begin; k < end; ++k) active.push_back(k);
    if (active.empty()) continue;
    spread(s, active, s % 2 == 0 ? 1.0 : 0.5);
  }
  return truth;
}

inline SmoothLocalCost cartography_cost(const Matrix& b, const Vector& phi) {
  SmoothLocalCost c;
  c.dimension = static_cast<int>(b.cols());
  const Matrix gram = 2.0 * b.transpose() * b;
  const Vector rhs = 2.0 * b.transpose() * phi;
  const double base = phi.squaredNorm();
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  c.lipschitz_hint = es.eigenvalues().maxCoeff();
  c.convexity_modulus = std::max(0.0, es.eigenvalues().minCoeff());
  c.value = [gram, rhs, base](const Vector& x) {
    return 0.5 * x.dot(gram * x) - rhs.dot(x) + base;
  };
  c.gradient = [gram, rhs](const Vector& x) -> Vector { return gram * x - rhs; };
  return c;
}

}  // namespace detail

inline CartographyInstance make_cartography(const CartographyOptions& opt) {
  if (opt.agents < 1 || opt.sources < 1 || opt.bases < 1 || opt.channels < 1)
    throw InvalidInput("cartography dimensions must be positive");
  if (opt.lambda <= 0.0) throw InvalidInput("cartography shrinkage weight must be positive");
  if (opt.tau <= 0.0) throw InvalidInput("cartography proximal weight must be positive");
  if (opt.power_cap <= 0.0) throw InvalidInput("cartography power cap must be positive");

  CartographyInstance inst;
  inst.agents = opt.agents;
  inst.sources = opt.sources;
  inst.bases = opt.bases;
  inst.channels = opt.channels;
  inst.lambda = opt.lambda;
  inst.tau = opt.tau;
  inst.power_cap = opt.power_cap;
  inst.min_snr_db = opt.min_snr_db;

  std::vector<Vector> nodes = opt.node_positions;
  if (nodes.empty()) {
    nodes = sample_square_positions(opt.agents, opt.area_side, combine_seed(opt.seed, 0x40de));
  } else if (static_cast<int>(nodes.size()) != opt.agents) {
    throw InvalidInput("cartography node position count mismatch");
  }
  std::vector<Vector> sources = opt.source_positions;
  if (sources.empty()) {
    if (opt.sources == 2) {
      sources.resize(2, Vector(2));
      sources[0] << 2.5, 2.5;
      sources[1] << 7.5, 7.5;
    } else {
      sources =
          sample_square_positions(opt.sources, opt.area_side, combine_seed(opt.seed, 0x50c5));
    }
  } else if (static_cast<int>(sources.size()) != opt.sources) {
    throw InvalidInput("cartography source position count mismatch");
  }

  // N_f channel centers uniform over the 15-30 MHz band and N_b non-overlapping
  // rectangular bases partitioning the same band
  const double band_low = 15.0, band_high = 30.0;
  const double channel_width = (band_high - band_low) / opt.channels;
  const double basis_width = (band_high - band_low) / opt.bases;
  std::vector<int> channel_basis(opt.channels);
  for (int j = 0; j < opt.channels; ++j) {
    const double freq = band_low + (j + 0.5) * channel_width;
    channel_basis[j] =
        std::min(opt.bases - 1, static_cast<int>((freq - band_low) / basis_width));
  }

  inst.truth = detail::cartography_truth(opt.sources, opt.bases);
  std::vector<double> powers(opt.agents, 0.0);
  for (int i = 0; i < opt.agents; ++i) {
    Matrix b = Matrix::Zero(opt.channels, inst.dimension());
    for (int s = 0; s < opt.sources; ++s) {
      const double gain = 1.0 / (1.0 + (nodes[i] - sources[s]).squaredNorm());
      for (int j = 0; j < opt.channels; ++j) b(j, s * opt.bases + channel_basis[j]) = gain;
    }
    const Vector clean = b * inst.truth;
    powers[i] = clean.squaredNorm() / opt.channels;
    inst.regressors.push_back(std::move(b));
    inst.measurements.push_back(clean);
  }
  inst.noise_sigma = calibrate_noise_sigma(powers, opt.min_snr_db);
  if (inst.noise_sigma > 0.0) {
    auto rng = make_rng(combine_seed(opt.seed, 0xca70));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < opt.agents; ++i)
      for (int j = 0; j < opt.channels; ++j)
        inst.measurements[i][j] += inst.noise_sigma * gauss(rng);
  }
  return inst;
}

inline DistributedProblem cartography_problem(const CartographyInstance& inst) {
  DistributedProblem prob;
  prob.dimension = inst.dimension();
  for (int i = 0; i < inst.agents; ++i)
    prob.costs.push_back(detail::cartography_cost(inst.regressors[i], inst.measurements[i]));
  prob.regularizer = linear_regularizer(Vector::Constant(inst.dimension(), inst.lambda));
  prob.feasible = box_set(inst.dimension(), 0.0, inst.power_cap);
  return prob;
}

// Convexity-preserving models: the local least-squares cost is kept intact and
// only the proximal term is added, so each model is a constant-Hessian
// quadratic 2 B_i'B_i + tau I factored once.
inline std::vector<SurrogateModel> cartography_models(const CartographyInstance& inst) {
  std::vector<SurrogateModel> models;
  models.reserve(inst.agents);
  for (int i = 0; i < inst.agents; ++i) {
    const Matrix& b = inst.regressors[i];
    const Matrix hess = 2.0 * b.transpose() * b +
                        inst.tau * Matrix::Identity(inst.dimension(), inst.dimension());
    const Vector rhs = 2.0 * b.transpose() * inst.measurements[i];
    const double tau = inst.tau;
    auto linear = [rhs, tau](const Vector& a) -> Vector { return -(rhs + tau * a); };
    models.push_back(make_quadratic_surrogate(SurrogateKind::KeepConvex, hess, linear));
  }
  return models;
}

inline void write_cartography_manifest(const CartographyInstance& inst, std::ostream& out) {
  out << "nextsca-cartography v1\n";
  out << "agents " << inst.agents << "\n";
  out << "sources " << inst.sources << "\n";
  out << "bases " << inst.bases << "\n";
  out << "channels " << inst.channels << "\n";
  out << "lambda " << format_value(inst.lambda) << "\n";
  out << "tau " << format_value(inst.tau) << "\n";
  out << "power-cap " << format_value(inst.power_cap) << "\n";
  out << "min-snr-db " << format_value(inst.min_snr_db) << "\n";
  out << "noise-sigma " << format_value(inst.noise_sigma) << "\n";
  for (int k = 0; k < inst.dimension(); ++k)
    out << "truth " << k << " " << format_value(inst.truth[k]) << "\n";
  for (int i = 0; i < inst.agents; ++i)
    for (int j = 0; j < inst.channels; ++j)
      out << "measurement " << i << " " << j << " " << format_value(inst.measurements[i][j])
          << "\n";
  for (int i = 0; i < inst.agents; ++i)
    for (int j = 0; j < inst.channels; ++j)
      for (int k = 0; k < inst.dimension(); ++k)
        if (inst.regressors[i](j, k) != 0.0)
          out << "regressor " << i << " " << j << " " << k << " "
              << format_value(inst.regressors[i](j, k)) << "\n";
  out << "end\n";
}

}  // namespace nextsca
