#pragma once

// Helpers shared by the bundled problem builders: noise calibration against a
// minimum signal-to-noise target and seeded placement sampling.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nextsca/core.hpp"
#include "nextsca/problem.hpp"

namespace nextsca {

// Noise convention used by every builder: each node's signal power is the mean
// squared noiseless measurement, one shared noise standard deviation is chosen
// so that the minimum over nodes of (power / variance) equals the requested
// SNR.  +inf dB means noiseless; -inf dB is rejected.
inline double calibrate_noise_sigma(const std::vector<double>& node_signal_powers,
                                    double min_snr_db) {
  if (node_signal_powers.empty()) throw InvalidInput("noise calibration needs at least one node");
  if (std::isinf(min_snr_db) && min_snr_db > 0.0) return 0.0;
  if (std::isinf(min_snr_db)) throw InvalidInput("SNR of -inf dB is not meaningful");
  if (std::isnan(min_snr_db)) throw InvalidInput("SNR target must be a number");
  double weakest = std::numeric_limits<double>::infinity();
  for (double p : node_signal_powers) {
    if (!(p >= 0.0)) throw InvalidInput("node signal power must be nonnegative");
    weakest = std::min(weakest, p);
  }
  if (weakest <= 0.0)
    throw InvalidInput("cannot reach a finite SNR: some node has zero signal power");
  const double snr_linear = std::pow(10.0, min_snr_db / 10.0);
  return std::sqrt(weakest / snr_linear);
}

// Reports the achieved minimum SNR in dB for a calibrated instance.
inline double measured_min_snr_db(const std::vector<double>& node_signal_powers, double sigma) {
  if (sigma <= 0.0) return std::numeric_limits<double>::infinity();
  double weakest = std::numeric_limits<double>::infinity();
  for (double p : node_signal_powers) weakest = std::min(weakest, p);
  return 10.0 * std::log10(weakest / (sigma * sigma));
}

// Uniform node placement over an axis-aligned square [0, side]^2.
inline std::vector<Vector> sample_square_positions(int count, double side, std::uint64_t seed) {
  if (count < 1) throw InvalidInput("need at least one position");
  if (side <= 0.0) throw InvalidInput("square side must be positive");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, side);
  std::vector<Vector> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Vector p(2);
    p << u(rng), u(rng);
    out.push_back(p);
  }
  return out;
}

}  // namespace nextsca
