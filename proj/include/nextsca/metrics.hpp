// Run diagnostics: stationarity gap J, disagreement D, NMSE against a known
// ground truth, objective value, gradient-tracking error, and the CSV layout
// shared by the benchmark tool.
#pragma once

#include "nextsca/core.hpp"
#include "nextsca/problem.hpp"

#include <optional>
#include <ostream>
#include <vector>

namespace nextsca {

inline Vector consensus_mean(const std::vector<Vector>& xs) {
  if (xs.empty()) throw InvalidInput("mean of zero iterates");
  Vector m = Vector::Zero(xs.front().size());
  for (const auto& x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

// D = (1/I) sum_i ||x_i - mean||^2
inline double disagreement(const std::vector<Vector>& xs) {
  const Vector m = consensus_mean(xs);
  double d = 0.0;
  for (const auto& x : xs) d += (x - m).squaredNorm();
  return d / static_cast<double>(xs.size());
}

inline double nmse(const Vector& estimate, const Vector& truth) {
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw InvalidInput("NMSE is undefined for a zero ground truth");
  return (estimate - truth).squaredNorm() / denom;
}

// J evaluated at the network average (the solver computes it there only;
// per-agent gaps would conflate stationarity with disagreement).
inline double stationarity_gap(const DistributedProblem& p, const Vector& mean) {
  return stationarity_residual(p, mean);
}

struct MetricRow {
  long n = 0;
  long comm = 0;  // per-agent neighbor exchanges so far
  double j = 0.0;
  double d = 0.0;
  std::optional<double> nmse;
  double u = 0.0;
  double track_err = 0.0;
};

inline constexpr const char* kMetricsHeader = "n,comm,J,D,NMSE,U,track_err";

inline void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& os) {
  os << kMetricsHeader << "\n";
  for (const auto& r : rows) {
    os << r.n << "," << r.comm << "," << format_value(r.j) << "," << format_value(r.d) << ","
       << (r.nmse ? format_value(*r.nmse) : std::string("NA")) << "," << format_value(r.u) << ","
       << format_value(r.track_err) << "\n";
  }
}

}  // namespace nextsca
