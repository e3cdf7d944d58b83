// Shared aliases and small utilities used across the library.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

namespace nextsca {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Thrown when a numerical invariant breaks mid-run (NaN/Inf in iterates).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on invalid problem/config input.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

// splitmix64: cheap deterministic seed derivation, independent of std::hash.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) {
  return mix_seed(a ^ mix_seed(b));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(mix_seed(seed)); }

// Round-trippable decimal rendering (17 significant digits).
inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw InvalidInput("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw InvalidInput("trailing characters in number: '" + s + "'");
  return v;
}

}  // namespace nextsca
