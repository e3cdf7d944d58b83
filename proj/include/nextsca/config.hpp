// Experiment configuration: a flat INI-style file format describing one
// benchmark experiment (problem family, communication graph, one or more
// algorithms, and run settings), plus the strict parser and semantic checks
// behind the command line tool.  All problems are diagnosed at once with
// line numbers so a bad file can be fixed in a single pass.
#pragma once

#include "nextsca/apps.hpp"
#include "nextsca/core.hpp"
#include "nextsca/graph.hpp"
#include "nextsca/solver.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace nextsca {

// ---------------------------------------------------------------------------
// Raw file layer: sections of key=value entries, each tagged with its line.
// ---------------------------------------------------------------------------

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<ConfigEntry> entries;
};

struct ConfigFile {
  std::vector<ConfigSection> sections;
};

namespace detail {

inline std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string line_tag(int line) { return "line " + std::to_string(line) + ": "; }

}  // namespace detail

// Reads the raw section/key/value structure.  Grammar: '[name]' opens a
// section; 'key = value' adds an entry to the open section; '#' or ';' start
// a comment line; blank lines are ignored.  Malformed lines are reported and
// skipped so later diagnostics still carry sensible line numbers.
inline ConfigFile read_config_file(std::istream& is, std::vector<std::string>& diagnostics) {
  ConfigFile file;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string text = detail::strip(raw);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') {
        diagnostics.push_back(detail::line_tag(line) + "section header is missing ']'");
        continue;
      }
      const std::string name = detail::strip(text.substr(1, text.size() - 2));
      if (name.empty()) {
        diagnostics.push_back(detail::line_tag(line) + "section name is empty");
        continue;
      }
      file.sections.push_back(ConfigSection{name, line, {}});
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      diagnostics.push_back(detail::line_tag(line) + "expected 'key = value', got '" + text + "'");
      continue;
    }
    ConfigEntry entry;
    entry.key = detail::strip(text.substr(0, eq));
    entry.value = detail::strip(text.substr(eq + 1));
    entry.line = line;
    if (entry.key.empty()) {
      diagnostics.push_back(detail::line_tag(line) + "empty key before '='");
      continue;
    }
    if (entry.value.empty()) {
      diagnostics.push_back(detail::line_tag(line) + "key '" + entry.key + "' has no value");
      continue;
    }
    if (file.sections.empty()) {
      diagnostics.push_back(detail::line_tag(line) + "entry '" + entry.key +
                            "' appears before any [section]");
      continue;
    }
    file.sections.back().entries.push_back(std::move(entry));
  }
  return file;
}

// ---------------------------------------------------------------------------
// Typed experiment description.
// ---------------------------------------------------------------------------

enum class AppKind { Localization, Cartography, FlowControl, SparseRegression };

enum class AlgorithmKind {
  NextPl,       // the app's bundled convexity-preserving surrogate
  NextL,        // full linearization surrogate
  NextInexact,  // convexity-preserving surrogate, diminishing inner tolerance
  DGradient     // projected-gradient consensus baseline
};

enum class GraphGenerator { Ring, ErdosRenyi, Geometric, File };

inline std::string app_kind_name(AppKind k) {
  switch (k) {
    case AppKind::Localization: return "localization";
    case AppKind::Cartography: return "cartography";
    case AppKind::FlowControl: return "flow-control";
    case AppKind::SparseRegression: return "sparse-regression";
  }
  return "?";
}

inline std::string algorithm_kind_name(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::NextPl: return "next-pl";
    case AlgorithmKind::NextL: return "next-l";
    case AlgorithmKind::NextInexact: return "next-inexact";
    case AlgorithmKind::DGradient: return "dgradient";
  }
  return "?";
}

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::NextPl;
  std::string name;              // output-file label; defaults to the kind name
  StepSizeRule step = recursive_step(0.1, 0.01);
  std::optional<double> tau;     // overrides the app's proximal weight
  double inexact_c = 1.0;        // inner tolerance scale (NextInexact only)
};

struct GraphConfig {
  GraphGenerator generator = GraphGenerator::Ring;
  int window = 1;                         // slots per connectivity window
  double weight_floor = kDefaultWeightFloor;
  double edge_probability = 0.4;          // erdos-renyi only
  double radius = 0.5;                    // geometric only
  std::string file;                       // file generator only
};

struct ProblemConfig {
  AppKind app = AppKind::Localization;
  LocalizationOptions localization;
  CartographyOptions cartography;
  FlowControlOptions flow;
  SparseRegressionOptions sparse;

  int agent_count() const {
    switch (app) {
      case AppKind::Localization: return localization.agents;
      case AppKind::Cartography: return cartography.agents;
      case AppKind::FlowControl: return flow.sources;
      case AppKind::SparseRegression: return sparse.agents;
    }
    return 0;
  }

  double default_tau() const {
    switch (app) {
      case AppKind::Localization: return localization.tau;
      case AppKind::Cartography: return cartography.tau;
      case AppKind::FlowControl: return flow.tau;
      case AppKind::SparseRegression: return sparse.tau;
    }
    return 1.0;
  }
};

struct RunSettings {
  long iterations = 1000;
  int repetitions = 1;
  std::uint64_t seed = 1;
  long cadence = 1;               // record metrics every `cadence` iterations
  double threshold_j = 1e-2;      // stationarity level for the summary column
  std::optional<double> early_stop_j;
  std::string output_dir;         // optional; the CLI has the final say
};

struct ExperimentConfig {
  std::string name;
  ProblemConfig problem;
  GraphConfig graph;
  std::vector<AlgorithmConfig> algorithms;
  RunSettings run;
};

// ---------------------------------------------------------------------------
// Interpretation: raw sections -> ExperimentConfig with aggregated errors.
// ---------------------------------------------------------------------------

namespace detail {

class EntryReader {
 public:
  EntryReader(const ConfigSection& s, std::vector<std::string>& diags)
      : section_(s), diags_(&diags) {}

  // Every get_* records the key as known; finish() flags the rest.
  std::optional<std::string> get_string(const std::string& key) {
    known_.insert(key);
    const ConfigEntry* found = nullptr;
    for (const auto& e : section_.entries) {
      if (e.key != key) continue;
      if (found) {
        diags_->push_back(line_tag(e.line) + "duplicate key '" + key + "' in [" + section_.name +
                          "]");
      }
      found = &e;
    }
    if (!found) return std::nullopt;
    return found->value;
  }

  std::optional<double> get_double(const std::string& key) {
    const auto raw = get_string(key);
    if (!raw) return std::nullopt;
    try {
      return parse_double(*raw);
    } catch (const InvalidInput& err) {
      fail(key, err.what());
      return std::nullopt;
    }
  }

  std::optional<long> get_long(const std::string& key) {
    const auto raw = get_string(key);
    if (!raw) return std::nullopt;
    try {
      std::size_t pos = 0;
      const long v = std::stol(*raw, &pos);
      if (pos != raw->size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      fail(key, "'" + *raw + "' is not an integer");
      return std::nullopt;
    }
  }

  std::optional<int> get_int(const std::string& key) {
    const auto v = get_long(key);
    if (!v) return std::nullopt;
    if (*v < -1000000000L || *v > 1000000000L) {
      fail(key, "value out of range");
      return std::nullopt;
    }
    return static_cast<int>(*v);
  }

  std::optional<std::uint64_t> get_seed(const std::string& key) {
    const auto raw = get_string(key);
    if (!raw) return std::nullopt;
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(*raw, &pos);
      if (pos != raw->size() || raw->front() == '-') throw std::invalid_argument("bad seed");
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      fail(key, "'" + *raw + "' is not a non-negative integer");
      return std::nullopt;
    }
  }

  void fail(const std::string& key, const std::string& message) {
    diags_->push_back(line_tag(key_line(key)) + "key '" + key + "' in [" + section_.name + "]: " +
                      message);
  }

  void finish() {
    for (const auto& e : section_.entries) {
      if (known_.count(e.key)) continue;
      diags_->push_back(line_tag(e.line) + "unknown key '" + e.key + "' in [" + section_.name +
                        "]");
    }
  }

  int key_line(const std::string& key) const {
    for (const auto& e : section_.entries)
      if (e.key == key) return e.line;
    return section_.line;
  }

  const ConfigSection& section() const { return section_; }

 private:
  const ConfigSection& section_;
  std::vector<std::string>* diags_;
  std::set<std::string> known_;
};

inline void read_experiment_section(const ConfigSection& s, ExperimentConfig& cfg,
                                    std::vector<std::string>& diags) {
  EntryReader r(s, diags);
  if (const auto v = r.get_string("name")) cfg.name = *v;
  r.finish();
}

inline void read_problem_section(const ConfigSection& s, ProblemConfig& p,
                                 std::vector<std::string>& diags) {
  EntryReader r(s, diags);
  const auto app = r.get_string("app");
  if (!app) {
    diags.push_back(line_tag(s.line) + "[problem] needs an 'app' key (localization, "
                    "cartography, flow-control, or sparse-regression)");
    return;  // without the app the remaining keys cannot be interpreted
  }
  if (*app == "localization") {
    p.app = AppKind::Localization;
    auto& o = p.localization;
    if (const auto v = r.get_int("agents")) o.agents = *v;
    if (const auto v = r.get_int("targets")) o.targets = *v;
    if (const auto v = r.get_int("space-dimension")) o.space_dimension = *v;
    if (const auto v = r.get_double("tau")) o.tau = *v;
    if (const auto v = r.get_double("min-snr-db")) o.min_snr_db = *v;
    if (const auto v = r.get_double("box-lower")) o.box_lower = *v;
    if (const auto v = r.get_double("box-upper")) o.box_upper = *v;
  } else if (*app == "cartography") {
    p.app = AppKind::Cartography;
    auto& o = p.cartography;
    if (const auto v = r.get_int("agents")) o.agents = *v;
    if (const auto v = r.get_int("sources")) o.sources = *v;
    if (const auto v = r.get_int("bases")) o.bases = *v;
    if (const auto v = r.get_int("channels")) o.channels = *v;
    if (const auto v = r.get_double("lambda")) o.lambda = *v;
    if (const auto v = r.get_double("tau")) o.tau = *v;
    if (const auto v = r.get_double("min-snr-db")) o.min_snr_db = *v;
    if (const auto v = r.get_double("area-side")) o.area_side = *v;
    if (const auto v = r.get_double("power-cap")) o.power_cap = *v;
  } else if (*app == "flow-control") {
    p.app = AppKind::FlowControl;
    auto& o = p.flow;
    if (const auto v = r.get_int("sources")) o.sources = *v;
    if (const auto v = r.get_int("links")) o.links = *v;
    if (const auto v = r.get_int("max-path-links")) o.max_path_links = *v;
    if (const auto v = r.get_double("capacity-low")) o.capacity_low = *v;
    if (const auto v = r.get_double("capacity-high")) o.capacity_high = *v;
    if (const auto v = r.get_double("min-rate")) o.min_rate = *v;
    if (const auto v = r.get_double("max-rate")) o.max_rate = *v;
    if (const auto v = r.get_int("slope-low")) o.slope_low = *v;
    if (const auto v = r.get_int("slope-high")) o.slope_high = *v;
    if (const auto v = r.get_int("offset-low")) o.offset_low = *v;
    if (const auto v = r.get_int("offset-high")) o.offset_high = *v;
    if (const auto v = r.get_double("tau")) o.tau = *v;
  } else if (*app == "sparse-regression") {
    p.app = AppKind::SparseRegression;
    auto& o = p.sparse;
    if (const auto v = r.get_int("agents")) o.agents = *v;
    if (const auto v = r.get_int("dimension")) o.dimension = *v;
    if (const auto v = r.get_int("rows-per-agent")) o.rows_per_agent = *v;
    if (const auto v = r.get_int("nonzeros")) o.nonzeros = *v;
    if (const auto v = r.get_double("lambda")) o.lambda = *v;
    if (const auto v = r.get_double("noise-sigma")) o.noise_sigma = *v;
    if (const auto v = r.get_double("bound")) o.bound = *v;
    if (const auto v = r.get_double("tau")) o.tau = *v;
  } else {
    r.fail("app", "unknown app '" + *app + "' (expected localization, cartography, "
                  "flow-control, or sparse-regression)");
    return;
  }
  r.finish();
}

inline void read_graph_section(const ConfigSection& s, GraphConfig& g,
                               std::vector<std::string>& diags) {
  EntryReader r(s, diags);
  if (const auto v = r.get_string("generator")) {
    if (*v == "ring") {
      g.generator = GraphGenerator::Ring;
    } else if (*v == "erdos-renyi") {
      g.generator = GraphGenerator::ErdosRenyi;
    } else if (*v == "geometric") {
      g.generator = GraphGenerator::Geometric;
    } else if (*v == "file") {
      g.generator = GraphGenerator::File;
    } else {
      r.fail("generator", "unknown generator '" + *v + "' (expected ring, erdos-renyi, "
                          "geometric, or file)");
    }
  }
  if (const auto v = r.get_int("window")) {
    if (*v < 1)
      r.fail("window", "window must be at least 1");
    else
      g.window = *v;
  }
  if (const auto v = r.get_double("weight-floor")) {
    if (*v <= 0.0 || *v >= 1.0)
      r.fail("weight-floor", "weight floor must lie in (0, 1)");
    else
      g.weight_floor = *v;
  }
  if (const auto v = r.get_double("edge-probability")) {
    if (*v <= 0.0 || *v > 1.0)
      r.fail("edge-probability", "edge probability must lie in (0, 1]");
    else
      g.edge_probability = *v;
  }
  if (const auto v = r.get_double("radius")) {
    if (*v <= 0.0)
      r.fail("radius", "radius must be positive");
    else
      g.radius = *v;
  }
  if (const auto v = r.get_string("file")) g.file = *v;
  if (g.generator == GraphGenerator::File && g.file.empty())
    diags.push_back(line_tag(s.line) + "graph generator 'file' needs a 'file' key");
  r.finish();
}

inline void read_algorithm_section(const ConfigSection& s, std::vector<AlgorithmConfig>& algos,
                                   std::vector<std::string>& diags) {
  EntryReader r(s, diags);
  AlgorithmConfig a;
  const auto type = r.get_string("type");
  if (!type) {
    diags.push_back(line_tag(s.line) + "[algorithm] needs a 'type' key (next-pl, next-l, "
                    "next-inexact, or dgradient)");
    r.finish();
    return;
  }
  if (*type == "next-pl" || *type == "next") {
    a.kind = AlgorithmKind::NextPl;
  } else if (*type == "next-l") {
    a.kind = AlgorithmKind::NextL;
  } else if (*type == "next-inexact") {
    a.kind = AlgorithmKind::NextInexact;
  } else if (*type == "dgradient") {
    a.kind = AlgorithmKind::DGradient;
  } else {
    r.fail("type", "unknown algorithm type '" + *type + "' (expected next-pl, next-l, "
                   "next-inexact, or dgradient)");
    r.finish();
    return;
  }
  a.name = algorithm_kind_name(a.kind);
  if (const auto v = r.get_string("name")) {
    a.name = *v;
    const bool ok = !a.name.empty() &&
                    std::all_of(a.name.begin(), a.name.end(), [](char c) {
                      return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.';
                    });
    if (!ok) r.fail("name", "algorithm names may only use letters, digits, '-' and '.'");
  }

  a.step = recursive_step(0.1, 0.01);
  const auto rule = r.get_string("step-rule");
  if (rule) {
    if (*rule == "power") {
      a.step = power_step(0.1, 0.6);
    } else if (*rule == "recursive") {
      a.step = recursive_step(0.1, 0.01);
    } else if (*rule == "constant") {
      a.step = constant_step(0.1);
    } else {
      r.fail("step-rule", "unknown step rule '" + *rule + "' (expected power, recursive, or "
                          "constant)");
    }
  }
  if (const auto v = r.get_double("alpha0")) a.step.alpha0 = *v;
  if (const auto v = r.get_double("beta")) {
    if (a.step.kind != StepSizeRule::Kind::DiminishingPower)
      r.fail("beta", "beta applies only to the power step rule");
    else
      a.step.beta = *v;
  }
  if (const auto v = r.get_double("mu")) {
    if (a.step.kind != StepSizeRule::Kind::Recursive)
      r.fail("mu", "mu applies only to the recursive step rule");
    else
      a.step.mu = *v;
  }
  // Mirror StepSizeRule::validate() so every bad parameter lands in the
  // aggregated diagnostics instead of a thrown exception.
  if (!(a.step.alpha0 > 0.0) || a.step.alpha0 > 1.0)
    r.fail("alpha0", "alpha0 must lie in (0, 1]");
  if (a.step.kind == StepSizeRule::Kind::DiminishingPower && (a.step.beta <= 0.5 || a.step.beta > 1.0))
    r.fail("beta", "beta must lie in (0.5, 1]");
  if (a.step.kind == StepSizeRule::Kind::Recursive && (a.step.mu <= 0.0 || a.step.mu >= 1.0))
    r.fail("mu", "mu must lie in (0, 1)");

  if (const auto v = r.get_double("tau")) {
    if (a.kind == AlgorithmKind::DGradient)
      r.fail("tau", "tau applies only to the surrogate-based algorithms");
    else if (*v <= 0.0)
      r.fail("tau", "tau must be positive");
    else
      a.tau = *v;
  }
  if (const auto v = r.get_double("inexact-c")) {
    if (a.kind != AlgorithmKind::NextInexact)
      r.fail("inexact-c", "inexact-c applies only to type next-inexact");
    else if (*v <= 0.0)
      r.fail("inexact-c", "inexact-c must be positive");
    else
      a.inexact_c = *v;
  }
  if (a.kind == AlgorithmKind::NextInexact && !a.step.square_summable())
    diags.push_back(line_tag(s.line) +
                    "next-inexact needs a diminishing step rule (power or recursive); a constant "
                    "step cannot drive the inner tolerance to zero");
  r.finish();
  algos.push_back(std::move(a));
}

inline void read_run_section(const ConfigSection& s, RunSettings& run,
                             std::vector<std::string>& diags) {
  EntryReader r(s, diags);
  if (const auto v = r.get_long("iterations")) {
    if (*v < 1)
      r.fail("iterations", "iterations must be at least 1");
    else
      run.iterations = *v;
  }
  if (const auto v = r.get_int("repetitions")) {
    if (*v < 1)
      r.fail("repetitions", "repetitions must be at least 1");
    else
      run.repetitions = *v;
  }
  if (const auto v = r.get_seed("seed")) run.seed = *v;
  if (const auto v = r.get_long("cadence")) {
    if (*v < 1)
      r.fail("cadence", "cadence must be at least 1");
    else
      run.cadence = *v;
  }
  if (const auto v = r.get_double("threshold-j")) {
    if (*v <= 0.0)
      r.fail("threshold-j", "threshold-j must be positive");
    else
      run.threshold_j = *v;
  }
  if (const auto v = r.get_double("early-stop-j")) {
    if (*v <= 0.0)
      r.fail("early-stop-j", "early-stop-j must be positive");
    else
      run.early_stop_j = *v;
  }
  if (const auto v = r.get_string("output")) run.output_dir = *v;
  r.finish();
}

}  // namespace detail

// Turns raw sections into a typed experiment, appending one diagnostic per
// problem.  The returned config is meaningful only when no diagnostics were
// added.
inline ExperimentConfig interpret_config(const ConfigFile& file,
                                         std::vector<std::string>& diagnostics) {
  ExperimentConfig cfg;
  bool saw_experiment = false;
  bool saw_problem = false;
  for (const auto& s : file.sections) {
    if (s.name == "experiment") {
      if (saw_experiment)
        diagnostics.push_back(detail::line_tag(s.line) + "duplicate [experiment] section");
      saw_experiment = true;
      detail::read_experiment_section(s, cfg, diagnostics);
    } else if (s.name == "problem") {
      if (saw_problem)
        diagnostics.push_back(detail::line_tag(s.line) + "duplicate [problem] section");
      saw_problem = true;
      detail::read_problem_section(s, cfg.problem, diagnostics);
    } else if (s.name == "graph") {
      detail::read_graph_section(s, cfg.graph, diagnostics);
    } else if (s.name == "algorithm") {
      detail::read_algorithm_section(s, cfg.algorithms, diagnostics);
    } else if (s.name == "run") {
      detail::read_run_section(s, cfg.run, diagnostics);
    } else {
      diagnostics.push_back(detail::line_tag(s.line) + "unknown section [" + s.name + "]");
    }
  }
  if (!saw_experiment || cfg.name.empty())
    diagnostics.push_back("config needs an [experiment] section with a 'name' key");
  if (!cfg.name.empty()) {
    const bool ok = std::all_of(cfg.name.begin(), cfg.name.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    });
    if (!ok)
      diagnostics.push_back("experiment name '" + cfg.name +
                            "' may only use letters, digits, '-', '_' and '.'");
  }
  if (!saw_problem) diagnostics.push_back("config needs a [problem] section");
  if (cfg.algorithms.empty())
    diagnostics.push_back("config needs at least one [algorithm] section");
  std::set<std::string> names;
  for (const auto& a : cfg.algorithms) {
    if (!names.insert(a.name).second)
      diagnostics.push_back("duplicate algorithm name '" + a.name +
                            "'; give each [algorithm] a distinct 'name'");
  }
  return cfg;
}

// One-call front end: parse + interpret.  Returns the config when the file is
// clean, nullopt otherwise (diagnostics explain why).
inline std::optional<ExperimentConfig> parse_experiment(std::istream& is,
                                                        std::vector<std::string>& diagnostics) {
  const ConfigFile file = read_config_file(is, diagnostics);
  ExperimentConfig cfg = interpret_config(file, diagnostics);
  if (!diagnostics.empty()) return std::nullopt;
  return cfg;
}

}  // namespace nextsca
