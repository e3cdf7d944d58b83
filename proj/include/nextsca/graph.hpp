// Time-varying digraph schedules and doubly-stochastic mixing weights.
//
// A schedule is a cyclic list of edge-set snapshots, one per time slot, each
// paired with a Metropolis weight matrix.  Generated schedules guarantee that
// the union of the snapshots inside every window of `window` consecutive slots
// is strongly connected, which is what the consensus steps of the solver need.
#pragma once

#include "nextsca/core.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

namespace nextsca {

// Directed edge set on agents 0..agents-1.  Edge (u,v) means u -> v, so u is
// an in-neighbor of v and v receives u's variables in a consensus exchange.
struct DigraphSnapshot {
  int agents = 0;
  std::set<std::pair<int, int>> edges;

  DigraphSnapshot() = default;
  explicit DigraphSnapshot(int n) : agents(n) {
    if (n <= 0) throw InvalidInput("snapshot needs a positive agent count");
  }

  bool has_edge(int u, int v) const { return edges.count({u, v}) > 0; }

  void add_edge(int u, int v) {
    if (u < 0 || v < 0 || u >= agents || v >= agents)
      throw InvalidInput("edge endpoint out of range");
    if (u == v) throw InvalidInput("self-loops are implicit, do not add them");
    edges.insert({u, v});
  }

  void add_undirected(int u, int v) {
    add_edge(u, v);
    add_edge(v, u);
  }

  bool is_symmetric() const {
    for (const auto& [u, v] : edges)
      if (!has_edge(v, u)) return false;
    return true;
  }

  DigraphSnapshot symmetrized() const {
    DigraphSnapshot out(agents);
    for (const auto& [u, v] : edges) {
      out.edges.insert({u, v});
      out.edges.insert({v, u});
    }
    return out;
  }

  // Degree in the symmetrized graph, self-loop excluded.
  std::vector<int> undirected_degrees() const {
    std::vector<int> deg(agents, 0);
    std::set<std::pair<int, int>> seen;
    for (const auto& [u, v] : edges) {
      auto key = std::minmax(u, v);
      if (seen.insert({key.first, key.second}).second) {
        ++deg[u];
        ++deg[v];
      }
    }
    return deg;
  }
};

inline DigraphSnapshot union_of(const std::vector<const DigraphSnapshot*>& parts) {
  if (parts.empty()) throw InvalidInput("union of zero snapshots");
  DigraphSnapshot out(parts.front()->agents);
  for (const auto* s : parts) {
    if (s->agents != out.agents) throw InvalidInput("agent count mismatch in union");
    out.edges.insert(s->edges.begin(), s->edges.end());
  }
  return out;
}

namespace detail {

inline std::vector<char> reachable_from(const DigraphSnapshot& g, int start, bool reverse) {
  std::vector<char> seen(g.agents, 0);
  std::vector<int> stack{start};
  seen[start] = 1;
  // adjacency on demand; edge sets are small at the scales we run
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (const auto& [a, b] : g.edges) {
      const int from = reverse ? b : a, to = reverse ? a : b;
      if (from == u && !seen[to]) {
        seen[to] = 1;
        stack.push_back(to);
      }
    }
  }
  return seen;
}

}  // namespace detail

inline bool strongly_connected(const DigraphSnapshot& g) {
  if (g.agents == 1) return true;
  const auto fwd = detail::reachable_from(g, 0, false);
  const auto bwd = detail::reachable_from(g, 0, true);
  for (int v = 0; v < g.agents; ++v)
    if (!fwd[v] || !bwd[v]) return false;
  return true;
}

// First pair (u,v) with no directed path u -> v, or nullopt if none exists.
inline std::optional<std::pair<int, int>> find_unreachable_pair(const DigraphSnapshot& g) {
  const auto fwd = detail::reachable_from(g, 0, false);
  const auto bwd = detail::reachable_from(g, 0, true);
  for (int v = 0; v < g.agents; ++v) {
    if (!fwd[v]) return std::make_pair(0, v);
    if (!bwd[v]) return std::make_pair(v, 0);
  }
  return std::nullopt;
}

// Row- and column-stochastic mixing matrix whose positive off-diagonal support
// matches a snapshot: entry (i,j) weighs what agent i receives from agent j.
struct WeightMatrix {
  Matrix entries;
  double floor_value = 1e-3;

  int agents() const { return static_cast<int>(entries.rows()); }
};

inline constexpr double kDefaultWeightFloor = 1e-3;
inline constexpr double kStochasticTol = 1e-12;

// Metropolis rule on the symmetrized snapshot: w_ij = 1/(1+max(d_i,d_j)) for
// neighbors, diagonal takes the slack.  If `require_symmetric` the input must
// already be symmetric; otherwise it is symmetrized first.
inline WeightMatrix metropolis_weights(const DigraphSnapshot& snapshot,
                                       bool require_symmetric = false,
                                       double floor_value = kDefaultWeightFloor) {
  if (require_symmetric && !snapshot.is_symmetric())
    throw InvalidInput("metropolis_weights: snapshot is not symmetric");
  const DigraphSnapshot g = snapshot.is_symmetric() ? snapshot : snapshot.symmetrized();
  const auto deg = g.undirected_degrees();
  const int n = g.agents;
  WeightMatrix w;
  w.floor_value = floor_value;
  w.entries = Matrix::Zero(n, n);
  for (const auto& [u, v] : g.edges) {
    // (u,v): v receives from u
    w.entries(v, u) = 1.0 / (1.0 + std::max(deg[u], deg[v]));
  }
  for (int i = 0; i < n; ++i) {
    double off = w.entries.row(i).sum();
    w.entries(i, i) = 1.0 - off;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (w.entries(i, j) > 0.0 && w.entries(i, j) < floor_value)
        throw InvalidInput("metropolis weight fell below the entry floor");
  return w;
}

inline bool verify_doubly_stochastic(const WeightMatrix& w, double tol = kStochasticTol) {
  const int n = w.agents();
  for (int i = 0; i < n; ++i) {
    if (std::abs(w.entries.row(i).sum() - 1.0) > tol) return false;
    if (std::abs(w.entries.col(i).sum() - 1.0) > tol) return false;
  }
  return w.entries.minCoeff() >= 0.0;
}

// Positive off-diagonal entries must sit exactly on the snapshot's edges.
inline bool matches_support(const WeightMatrix& w, const DigraphSnapshot& snapshot) {
  if (w.agents() != snapshot.agents) return false;
  for (int i = 0; i < w.agents(); ++i)
    for (int j = 0; j < w.agents(); ++j) {
      if (i == j) continue;
      if ((w.entries(i, j) > 0.0) != snapshot.has_edge(j, i)) return false;
    }
  return true;
}

// Cyclic schedule: slot(n) = n mod size.  `window` is the connectivity window
// length the schedule was built (and is validated) for.
struct GraphSchedule {
  std::vector<DigraphSnapshot> snapshots;
  std::vector<WeightMatrix> weights;
  int window = 1;

  int agents() const {
    if (snapshots.empty()) throw InvalidInput("empty schedule");
    return snapshots.front().agents;
  }
  int slots() const { return static_cast<int>(snapshots.size()); }
  int slot_index(long n) const { return static_cast<int>(n % slots()); }
  const WeightMatrix& weight_at(long n) const { return weights[slot_index(n)]; }
  const DigraphSnapshot& snapshot_at(long n) const { return snapshots[slot_index(n)]; }
};

// Whether every cyclic window of `window` consecutive slots has a strongly
// connected union.  Replay is cyclic, so wrap-around windows count too.
inline bool windows_strongly_connected(const GraphSchedule& s) {
  const int S = s.slots();
  for (int start = 0; start < S; ++start) {
    std::vector<const DigraphSnapshot*> parts;
    for (int k = 0; k < s.window; ++k) parts.push_back(&s.snapshots[(start + k) % S]);
    if (!strongly_connected(union_of(parts))) return false;
  }
  return true;
}

inline void validate_schedule(const GraphSchedule& s, double tol = kStochasticTol) {
  if (s.snapshots.size() != s.weights.size())
    throw InvalidInput("schedule: snapshot/weight count mismatch");
  if (s.window < 1) throw InvalidInput("schedule: window must be >= 1");
  for (int k = 0; k < s.slots(); ++k) {
    if (s.snapshots[k].agents != s.agents()) throw InvalidInput("schedule: agent count varies");
    if (!verify_doubly_stochastic(s.weights[k], tol))
      throw InvalidInput("schedule: slot " + std::to_string(k) + " weights not doubly stochastic");
    if (!matches_support(s.weights[k], s.snapshots[k]))
      throw InvalidInput("schedule: slot " + std::to_string(k) + " weight support mismatch");
  }
  if (!windows_strongly_connected(s))
    throw InvalidInput("schedule: some window union is not strongly connected");
}

// --- base graph generators (all symmetric) --------------------------------

inline DigraphSnapshot ring_graph(int agents) {
  DigraphSnapshot g(agents);
  if (agents == 1) return g;
  for (int i = 0; i < agents; ++i) g.add_undirected(i, (i + 1) % agents);
  return g;
}

inline DigraphSnapshot erdos_renyi_graph(int agents, double edge_prob, std::uint64_t seed) {
  if (edge_prob < 0.0 || edge_prob > 1.0) throw InvalidInput("edge probability outside [0,1]");
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    auto rng = make_rng(combine_seed(seed, attempt));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    DigraphSnapshot g(agents);
    for (int i = 0; i < agents; ++i)
      for (int j = i + 1; j < agents; ++j)
        if (coin(rng) < edge_prob) g.add_undirected(i, j);
    if (strongly_connected(g)) return g;
  }
  // overlay a ring so the result is usable for any (agents, p)
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  DigraphSnapshot g = ring_graph(agents);
  for (int i = 0; i < agents; ++i)
    for (int j = i + 1; j < agents; ++j)
      if (coin(rng) < edge_prob) g.add_undirected(i, j);
  return g;
}

inline DigraphSnapshot geometric_graph(int agents, double radius, std::uint64_t seed) {
  if (radius <= 0.0) throw InvalidInput("geometric graph needs a positive radius");
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    auto rng = make_rng(combine_seed(seed, attempt));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<double, double>> pts(agents);
    for (auto& p : pts) {
      p.first = unit(rng);
      p.second = unit(rng);
    }
    DigraphSnapshot g(agents);
    for (int i = 0; i < agents; ++i)
      for (int j = i + 1; j < agents; ++j) {
        const double dx = pts[i].first - pts[j].first, dy = pts[i].second - pts[j].second;
        if (dx * dx + dy * dy <= radius * radius) g.add_undirected(i, j);
      }
    if (strongly_connected(g)) return g;
  }
  return ring_graph(agents);  // degenerate radius; keep the call usable
}

// --- schedule generation ---------------------------------------------------

namespace detail {

// Deal the (deduplicated undirected) base edges round-robin into the slots of
// each window after a per-window seeded shuffle.  Every aligned window covers
// all base edges.
inline std::vector<DigraphSnapshot> deal_windows(const DigraphSnapshot& base, int window,
                                                 int num_slots, std::uint64_t seed) {
  std::vector<std::pair<int, int>> undirected;
  for (const auto& [u, v] : base.edges)
    if (u < v) undirected.push_back({u, v});
  std::vector<DigraphSnapshot> slots(num_slots, DigraphSnapshot(base.agents));
  const int num_windows = (num_slots + window - 1) / window;
  for (int w = 0; w < num_windows; ++w) {
    auto order = undirected;
    auto rng = make_rng(combine_seed(seed, static_cast<std::uint64_t>(w)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t e = 0; e < order.size(); ++e) {
      const int s = w * window + static_cast<int>(e % static_cast<std::size_t>(window));
      if (s < num_slots) slots[s].add_undirected(order[e].first, order[e].second);
    }
  }
  return slots;
}

// Fixed partition repeated with period `window`: every cyclic window then sees
// all partition classes, hence all base edges.
inline std::vector<DigraphSnapshot> deal_periodic(const DigraphSnapshot& base, int window,
                                                  int num_slots, std::uint64_t seed) {
  std::vector<std::pair<int, int>> undirected;
  for (const auto& [u, v] : base.edges)
    if (u < v) undirected.push_back({u, v});
  auto rng = make_rng(combine_seed(seed, 0x5eedULL));
  std::shuffle(undirected.begin(), undirected.end(), rng);
  std::vector<DigraphSnapshot> classes(window, DigraphSnapshot(base.agents));
  for (std::size_t e = 0; e < undirected.size(); ++e)
    classes[e % static_cast<std::size_t>(window)].add_undirected(undirected[e].first,
                                                                 undirected[e].second);
  std::vector<DigraphSnapshot> slots;
  slots.reserve(num_slots);
  for (int s = 0; s < num_slots; ++s) slots.push_back(classes[s % window]);
  return slots;
}

}  // namespace detail

// Splits a strongly connected base graph into a cyclic schedule of
// `horizon_slots` snapshots such that every window of `window` consecutive
// slots has strongly connected union, and attaches Metropolis weights.
// window == 1 reproduces the base graph in every slot.
inline GraphSchedule generate_b_connected_schedule(const DigraphSnapshot& base_in, int window,
                                                   int horizon_slots, std::uint64_t seed,
                                                   double floor_value = kDefaultWeightFloor) {
  if (window < 1) throw InvalidInput("schedule window must be >= 1");
  if (horizon_slots < window) throw InvalidInput("horizon shorter than one window");
  const DigraphSnapshot base = base_in.symmetrized();
  if (auto bad = find_unreachable_pair(base)) {
    throw InvalidInput("base graph not strongly connected: no path from agent " +
                       std::to_string(bad->first) + " to agent " + std::to_string(bad->second));
  }
  GraphSchedule sched;
  sched.window = window;
  for (std::uint64_t attempt = 0; attempt <= 20; ++attempt) {
    sched.snapshots = (attempt < 20)
                          ? detail::deal_windows(base, window, horizon_slots,
                                                 combine_seed(seed, attempt))
                          : detail::deal_periodic(base, window, horizon_slots, seed);
    if (windows_strongly_connected(sched)) break;
    sched.snapshots.clear();
  }
  if (sched.snapshots.empty())
    throw InvalidInput("could not build a window-connected schedule");  // unreachable in practice
  sched.weights.clear();
  for (const auto& snap : sched.snapshots)
    sched.weights.push_back(metropolis_weights(snap, true, floor_value));
  return sched;
}

// --- consensus transition products ----------------------------------------

struct TransitionProduct {
  Matrix matrix;
  long from_slot = 0;  // l
  long to_slot = 0;    // n
};

// P[n,l] = W[n] W[n-1] ... W[l]
inline TransitionProduct transition_product(const GraphSchedule& s, long n, long l) {
  if (n < l) throw InvalidInput("transition product needs n >= l");
  const int I = s.agents();
  TransitionProduct p{Matrix::Identity(I, I), l, n};
  for (long k = l; k <= n; ++k) p.matrix = s.weight_at(k).entries * p.matrix;
  return p;
}

inline double consensus_distance(const Matrix& p) {
  const int I = static_cast<int>(p.rows());
  const Matrix m = p - Matrix::Constant(I, I, 1.0 / I);
  // spectral norm via the top eigenvalue of m^T m
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.transpose() * m, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// e[k] = || P[l+k, l] - (1/I) 11^T ||_2 for k = 0..count-1.
inline std::vector<double> transition_decay_profile(const GraphSchedule& s, long l, int count) {
  const int I = s.agents();
  std::vector<double> e;
  e.reserve(count);
  Matrix p = Matrix::Identity(I, I);
  for (int k = 0; k < count; ++k) {
    p = s.weight_at(l + k).entries * p;
    e.push_back(consensus_distance(p));
  }
  return e;
}

struct GeometricEnvelope {
  double c0 = 0.0;
  double rho = 0.0;
  int points_used = 0;
};

// Least-squares fit of log e[k] = log c + k log rho over k in [first,last].
// Values below `floor_value` are treated as fully mixed and excluded; c0 is
// lifted so the envelope dominates every fitted point.
inline GeometricEnvelope fit_geometric_envelope(const std::vector<double>& e, int first, int last,
                                                double floor_value = 1e-14) {
  GeometricEnvelope env;
  double sk = 0, sy = 0, skk = 0, sky = 0;
  std::vector<std::pair<int, double>> pts;
  for (int k = first; k <= last && k < static_cast<int>(e.size()); ++k) {
    if (e[k] < floor_value) continue;
    const double y = std::log(e[k]);
    pts.push_back({k, y});
    sk += k;
    sy += y;
    skk += static_cast<double>(k) * k;
    sky += k * y;
  }
  env.points_used = static_cast<int>(pts.size());
  if (pts.size() < 2) return env;  // fully mixed; rho = 0 dominates trivially
  const double n = static_cast<double>(pts.size());
  const double slope = (n * sky - sk * sy) / (n * skk - sk * sk);
  const double intercept = (sy - slope * sk) / n;
  double lift = 0.0;
  for (const auto& [k, y] : pts) lift = std::max(lift, y - (intercept + slope * k));
  env.rho = std::exp(slope);
  env.c0 = std::exp(intercept + lift);
  return env;
}

// --- plain-text serialization ---------------------------------------------
//
//   nextsca-schedule v1
//   agents <I>
//   slots <S>
//   window <B>
//   floor <value>
//   slot <k>
//   entries <m>
//   <i> <j> <w_ij>          (one line per positive entry, diagonal included)
//   ...
//   end

inline void save_schedule(const GraphSchedule& s, std::ostream& os) {
  os << "nextsca-schedule v1\n";
  os << "agents " << s.agents() << "\n";
  os << "slots " << s.slots() << "\n";
  os << "window " << s.window << "\n";
  os << "floor " << format_value(s.weights.empty() ? kDefaultWeightFloor
                                                   : s.weights.front().floor_value)
     << "\n";
  for (int k = 0; k < s.slots(); ++k) {
    const auto& w = s.weights[k].entries;
    int count = 0;
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j)
        if (w(i, j) > 0.0) ++count;
    os << "slot " << k << "\n";
    os << "entries " << count << "\n";
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j)
        if (w(i, j) > 0.0) os << i << " " << j << " " << format_value(w(i, j)) << "\n";
  }
  os << "end\n";
}

namespace detail {

inline std::string next_schedule_line(std::istream& is, int& line_no) {
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '#') continue;
    return line;
  }
  throw InvalidInput("schedule file: unexpected end of file at line " + std::to_string(line_no));
}

}  // namespace detail

inline GraphSchedule load_schedule(std::istream& is) {
  int line_no = 0;
  auto expect = [&](const std::string& line, const std::string& key) -> std::string {
    std::istringstream ss(line);
    std::string head;
    ss >> head;
    if (head != key)
      throw InvalidInput("schedule file line " + std::to_string(line_no) + ": expected '" + key +
                         "', got '" + head + "'");
    std::string rest;
    std::getline(ss, rest);
    const auto pos = rest.find_first_not_of(" \t");
    return pos == std::string::npos ? std::string() : rest.substr(pos);
  };
  if (detail::next_schedule_line(is, line_no) != "nextsca-schedule v1")
    throw InvalidInput("schedule file: bad header");
  const int agents = std::stoi(expect(detail::next_schedule_line(is, line_no), "agents"));
  const int slots = std::stoi(expect(detail::next_schedule_line(is, line_no), "slots"));
  const int window = std::stoi(expect(detail::next_schedule_line(is, line_no), "window"));
  const double floor_value = parse_double(expect(detail::next_schedule_line(is, line_no), "floor"));
  if (agents <= 0 || slots <= 0 || window <= 0)
    throw InvalidInput("schedule file: non-positive header field");
  GraphSchedule sched;
  sched.window = window;
  for (int k = 0; k < slots; ++k) {
    const int idx = std::stoi(expect(detail::next_schedule_line(is, line_no), "slot"));
    if (idx != k) throw InvalidInput("schedule file: slots out of order");
    const int count = std::stoi(expect(detail::next_schedule_line(is, line_no), "entries"));
    WeightMatrix w;
    w.floor_value = floor_value;
    w.entries = Matrix::Zero(agents, agents);
    DigraphSnapshot snap(agents);
    for (int e = 0; e < count; ++e) {
      std::istringstream ss(detail::next_schedule_line(is, line_no));
      int i, j;
      double value;
      if (!(ss >> i >> j >> value))
        throw InvalidInput("schedule file line " + std::to_string(line_no) + ": bad entry");
      if (i < 0 || j < 0 || i >= agents || j >= agents)
        throw InvalidInput("schedule file line " + std::to_string(line_no) + ": index out of range");
      w.entries(i, j) = value;
      if (i != j) snap.add_edge(j, i);
    }
    sched.snapshots.push_back(std::move(snap));
    sched.weights.push_back(std::move(w));
  }
  if (detail::next_schedule_line(is, line_no) != "end")
    throw InvalidInput("schedule file: missing end marker");
  validate_schedule(sched);
  return sched;
}

}  // namespace nextsca
