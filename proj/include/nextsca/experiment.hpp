// Experiment driver: turns a parsed ExperimentConfig into problem instances,
// communication schedules, and algorithm runs, and writes the per-run metric
// CSVs, per-repetition instance manifests, and the summary table.  Output is
// byte-identical for a given config and seed regardless of the worker-thread
// count, because all files are written serially in a fixed order after the
// traces are computed.
#pragma once

#include "nextsca/apps.hpp"
#include "nextsca/config.hpp"
#include "nextsca/core.hpp"
#include "nextsca/graph.hpp"
#include "nextsca/metrics.hpp"
#include "nextsca/solver.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace nextsca {

// Everything a single repetition needs about its problem instance.  The
// closures own the instance so tau overrides can rebuild surrogates cheaply.
struct ProblemBundle {
  DistributedProblem problem;
  std::optional<Vector> truth;
  double default_tau = 1.0;
  std::function<std::vector<SurrogateModel>(double)> preserve_models;  // arg: tau
  std::function<void(std::ostream&)> write_manifest;
};

inline ProblemBundle build_problem_bundle(const ProblemConfig& p, std::uint64_t instance_seed) {
  ProblemBundle b;
  switch (p.app) {
    case AppKind::Localization: {
      LocalizationOptions opt = p.localization;
      opt.seed = instance_seed;
      auto inst = std::make_shared<LocalizationInstance>(make_localization(opt));
      b.problem = localization_problem(*inst);
      b.truth = inst->truth;
      b.default_tau = inst->tau;
      b.preserve_models = [inst](double tau) {
        LocalizationInstance copy = *inst;
        copy.tau = tau;
        return localization_pl_models(copy);
      };
      b.write_manifest = [inst](std::ostream& os) { write_localization_manifest(*inst, os); };
      break;
    }
    case AppKind::Cartography: {
      CartographyOptions opt = p.cartography;
      opt.seed = instance_seed;
      auto inst = std::make_shared<CartographyInstance>(make_cartography(opt));
      b.problem = cartography_problem(*inst);
      b.truth = inst->truth;
      b.default_tau = inst->tau;
      b.preserve_models = [inst](double tau) {
        CartographyInstance copy = *inst;
        copy.tau = tau;
        return cartography_models(copy);
      };
      b.write_manifest = [inst](std::ostream& os) { write_cartography_manifest(*inst, os); };
      break;
    }
    case AppKind::FlowControl: {
      FlowControlOptions opt = p.flow;
      opt.seed = instance_seed;
      auto inst = std::make_shared<FlowControlInstance>(make_flow_control(opt));
      b.problem = flow_control_problem(*inst);
      b.default_tau = inst->tau;
      b.preserve_models = [inst](double tau) {
        FlowControlInstance copy = *inst;
        copy.tau = tau;
        return flow_control_models(copy);
      };
      b.write_manifest = [inst](std::ostream& os) { write_flow_control_manifest(*inst, os); };
      break;
    }
    case AppKind::SparseRegression: {
      SparseRegressionOptions opt = p.sparse;
      opt.seed = instance_seed;
      auto inst = std::make_shared<SparseRegressionInstance>(make_sparse_regression(opt));
      b.problem = sparse_regression_problem(*inst);
      b.truth = inst->truth;
      b.default_tau = inst->tau;
      b.preserve_models = [inst](double tau) {
        SparseRegressionInstance copy = *inst;
        copy.tau = tau;
        return sparse_regression_models(copy);
      };
      b.write_manifest = [inst](std::ostream& os) {
        write_sparse_regression_manifest(*inst, os);
      };
      break;
    }
  }
  return b;
}

namespace detail {

inline constexpr std::uint64_t kScheduleSeedTag = 0x5c4eULL;

inline DigraphSnapshot base_digraph(const GraphConfig& g, int agents, std::uint64_t seed) {
  switch (g.generator) {
    case GraphGenerator::Ring: return ring_graph(agents);
    case GraphGenerator::ErdosRenyi: return erdos_renyi_graph(agents, g.edge_probability, seed);
    case GraphGenerator::Geometric: return geometric_graph(agents, g.radius, seed);
    case GraphGenerator::File: break;  // handled by the caller
  }
  throw InvalidInput("file-backed schedules are loaded, not generated");
}

}  // namespace detail

// The schedule one repetition runs on.  Generated graphs are reseeded per
// repetition; a file-backed schedule is replayed verbatim for every rep.
inline GraphSchedule build_schedule(const GraphConfig& g, int agents, std::uint64_t seed) {
  if (g.generator == GraphGenerator::File) {
    std::ifstream in(g.file);
    if (!in) throw InvalidInput("cannot open schedule file '" + g.file + "'");
    GraphSchedule s = load_schedule(in);
    if (s.agents() != agents)
      throw InvalidInput("schedule file '" + g.file + "' is for " + std::to_string(s.agents()) +
                         " agents but the problem has " + std::to_string(agents));
    return s;
  }
  const DigraphSnapshot base = detail::base_digraph(g, agents, seed);
  return generate_b_connected_schedule(base, g.window, g.window,
                                       combine_seed(seed, detail::kScheduleSeedTag),
                                       g.weight_floor);
}

namespace detail {

inline RunConfig algorithm_run_config(const ExperimentConfig& cfg, const AlgorithmConfig& algo,
                                      const ProblemBundle& bundle, std::uint64_t instance_seed) {
  RunConfig rc;
  rc.iterations = cfg.run.iterations;
  rc.step = algo.step;
  rc.seed = instance_seed;  // same seed => same initial points for every algorithm
  rc.cadence = cfg.run.cadence;
  rc.early_stop_j = cfg.run.early_stop_j;
  rc.truth = bundle.truth;
  if (algo.kind == AlgorithmKind::NextInexact)
    rc.inexact_c = Vector::Constant(bundle.problem.agent_count(), algo.inexact_c);
  return rc;
}

inline RunTrace run_algorithm(const ExperimentConfig& cfg, const AlgorithmConfig& algo,
                              const ProblemBundle& bundle, const GraphSchedule& schedule,
                              std::uint64_t instance_seed) {
  const RunConfig rc = algorithm_run_config(cfg, algo, bundle, instance_seed);
  if (algo.kind == AlgorithmKind::DGradient) return run_dgradient(bundle.problem, schedule, rc);
  const double tau = algo.tau.value_or(bundle.default_tau);
  std::vector<SurrogateModel> models;
  if (algo.kind == AlgorithmKind::NextL) {
    models.reserve(bundle.problem.costs.size());
    for (const auto& cost : bundle.problem.costs)
      models.push_back(make_linearize_surrogate(cost, tau));
  } else {
    models = bundle.preserve_models(tau);
  }
  return run_next(bundle.problem, models, schedule, rc);
}

struct RepResult {
  std::vector<RunTrace> traces;  // one per algorithm, config order
  std::string manifest;
  std::string invalid_error;    // problem with the setup itself
  std::string numerical_error;  // runtime blow-up
};

inline RepResult compute_repetition(const ExperimentConfig& cfg, int rep) {
  RepResult out;
  const std::uint64_t instance_seed = combine_seed(cfg.run.seed, static_cast<std::uint64_t>(rep));
  std::string stage = "building the problem instance";
  try {
    const ProblemBundle bundle = build_problem_bundle(cfg.problem, instance_seed);
    std::ostringstream manifest;
    bundle.write_manifest(manifest);
    out.manifest = manifest.str();
    stage = "building the communication schedule";
    const GraphSchedule schedule =
        build_schedule(cfg.graph, bundle.problem.agent_count(), instance_seed);
    for (const auto& algo : cfg.algorithms) {
      stage = "running algorithm '" + algo.name + "'";
      out.traces.push_back(run_algorithm(cfg, algo, bundle, schedule, instance_seed));
    }
  } catch (const NumericalError& e) {
    out.numerical_error = stage + " for rep " + std::to_string(rep) + " (instance seed " +
                          std::to_string(instance_seed) + "): " + e.what();
  } catch (const InvalidInput& e) {
    out.invalid_error = stage + " for rep " + std::to_string(rep) + " (instance seed " +
                        std::to_string(instance_seed) + "): " + e.what();
  }
  return out;
}

inline std::string trace_file_name(const ExperimentConfig& cfg, const std::string& algo_name,
                                   int rep) {
  return cfg.name + "_" + algo_name + "_rep" + std::to_string(rep) + ".csv";
}

inline std::string manifest_file_name(const ExperimentConfig& cfg, int rep) {
  return cfg.name + "_instance_rep" + std::to_string(rep) + ".txt";
}

inline std::string exchanges_to_threshold(const RunTrace& trace, double threshold) {
  for (const auto& row : trace.rows)
    if (row.j <= threshold) return std::to_string(row.comm);
  return "NA";
}

}  // namespace detail

// Runs the full experiment and writes its artifacts under `out_dir`:
//   <name>_<algorithm>_rep<k>.csv   metric trace per algorithm and repetition
//   <name>_instance_rep<k>.txt      the sampled problem instance
//   summary.csv                     final metrics and exchanges-to-threshold
// `threads` worker threads compute repetitions concurrently; files are still
// written in a fixed order so reruns are byte-identical.  Returns a process
// exit code: 0 on success, 2 for setup problems, 3 for numerical failures.
inline int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, int threads,
                          std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    err << "error: cannot create output directory '" << out_dir << "': " << ec.message() << "\n";
    return 2;
  }

  const int reps = cfg.run.repetitions;
  std::vector<detail::RepResult> results(reps);
  const int workers = std::max(1, std::min(threads, reps));
  if (workers == 1) {
    for (int rep = 0; rep < reps; ++rep) results[rep] = detail::compute_repetition(cfg, rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (int rep = next.fetch_add(1); rep < reps; rep = next.fetch_add(1))
          results[rep] = detail::compute_repetition(cfg, rep);
      });
    }
    for (auto& t : pool) t.join();
  }

  bool invalid = false, numerical = false;
  for (const auto& r : results) {
    if (!r.invalid_error.empty()) {
      err << "error: " << r.invalid_error << "\n";
      invalid = true;
    }
    if (!r.numerical_error.empty()) {
      err << "error: " << r.numerical_error << "\n";
      numerical = true;
    }
  }
  if (invalid) return 2;
  if (numerical) return 3;

  const auto write_file = [&](const std::string& name,
                              const std::function<void(std::ostream&)>& body) -> bool {
    const fs::path path = fs::path(out_dir) / name;
    std::ofstream os(path);
    if (!os) {
      err << "error: cannot write '" << path.string() << "'\n";
      return false;
    }
    body(os);
    return os.good();
  };

  int files = 0;
  for (int rep = 0; rep < reps; ++rep) {
    if (!write_file(detail::manifest_file_name(cfg, rep),
                    [&](std::ostream& os) { os << results[rep].manifest; }))
      return 2;
    ++files;
  }
  for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
    for (int rep = 0; rep < reps; ++rep) {
      if (!write_file(detail::trace_file_name(cfg, cfg.algorithms[a].name, rep),
                      [&](std::ostream& os) {
                        write_metrics_csv(results[rep].traces[a].rows, os);
                      }))
        return 2;
      ++files;
    }
  }
  const bool ok = write_file("summary.csv", [&](std::ostream& os) {
    os << "algorithm,rep,final_J,final_D,final_NMSE,final_U,exchanges_to_threshold\n";
    for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
      for (int rep = 0; rep < reps; ++rep) {
        const RunTrace& trace = results[rep].traces[a];
        const MetricRow& last = trace.rows.back();
        os << cfg.algorithms[a].name << "," << rep << "," << format_value(last.j) << ","
           << format_value(last.d) << ","
           << (last.nmse ? format_value(*last.nmse) : std::string("NA")) << ","
           << format_value(last.u) << ","
           << detail::exchanges_to_threshold(trace, cfg.run.threshold_j) << "\n";
      }
    }
  });
  if (!ok) return 2;
  ++files;
  out << "wrote " << files << " files to " << out_dir << "\n";
  return 0;
}

// Deep validation for the `validate` subcommand: on top of the parse-level
// checks this dry-builds the first repetition's instance and schedule, so
// problems like an infeasible rate profile or a bad schedule file surface
// before a long run.  Returns 0 when everything checks out, 2 otherwise.
inline int validate_experiment(const ExperimentConfig& cfg, std::ostream& out,
                               std::ostream& err) {
  const std::uint64_t instance_seed = combine_seed(cfg.run.seed, 0);
  try {
    const ProblemBundle bundle = build_problem_bundle(cfg.problem, instance_seed);
    const GraphSchedule schedule =
        build_schedule(cfg.graph, bundle.problem.agent_count(), instance_seed);
    validate_schedule(schedule);
    out << "ok: experiment '" << cfg.name << "'\n";
    out << "  problem: " << app_kind_name(cfg.problem.app) << ", "
        << bundle.problem.agent_count() << " agents, dimension " << bundle.problem.dimension
        << "\n";
    out << "  graph: " << schedule.slots() << " slot(s), window " << schedule.window << ", "
        << (windows_strongly_connected(schedule) ? "window-connected" : "NOT window-connected")
        << "\n";
    out << "  algorithms:";
    for (const auto& a : cfg.algorithms) out << " " << a.name;
    out << "\n";
    out << "  run: " << cfg.run.iterations << " iterations x " << cfg.run.repetitions
        << " repetition(s), seed " << cfg.run.seed << "\n";
    return 0;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

// Prints the first repetition's communication schedule in the loadable text
// format, for inspection or for reuse via the file graph generator.
inline int dump_schedule(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::uint64_t instance_seed = combine_seed(cfg.run.seed, 0);
  try {
    const GraphSchedule schedule =
        build_schedule(cfg.graph, cfg.problem.agent_count(), instance_seed);
    save_schedule(schedule, out);
    return 0;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace nextsca
