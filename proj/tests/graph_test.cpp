#include "nextsca/graph.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace nextsca;

TEST_CASE("metropolis weights on a 3-node path") {
  DigraphSnapshot g(3);
  g.add_undirected(0, 1);
  g.add_undirected(1, 2);
  const auto w = metropolis_weights(g);
  CHECK(w.entries(0, 1) == Catch::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(w.entries(1, 0) == Catch::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(w.entries(1, 2) == Catch::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(w.entries(2, 1) == Catch::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(w.entries(0, 0) == Catch::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(w.entries(1, 1) == Catch::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(w.entries(2, 2) == Catch::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(w.entries(0, 2) == 0.0);
  CHECK(verify_doubly_stochastic(w));
  CHECK(matches_support(w, g));
}

TEST_CASE("metropolis weights on the complete graph are uniform") {
  DigraphSnapshot g(4);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) g.add_undirected(i, j);
  const auto w = metropolis_weights(g);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(w.entries(i, j) == Catch::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("metropolis symmetrizes directed input unless told otherwise") {
  DigraphSnapshot g(3);
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  CHECK_THROWS_AS(metropolis_weights(g, true), InvalidInput);
  const auto w = metropolis_weights(g, false);
  CHECK(verify_doubly_stochastic(w));
  CHECK(w.entries(1, 0) > 0.0);
  CHECK(w.entries(0, 1) > 0.0);
}

TEST_CASE("double stochasticity holds across random bases") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int agents = 3 + static_cast<int>(seed % 10);
    const auto g = erdos_renyi_graph(agents, 0.4, seed);
    const auto w = metropolis_weights(g);
    CHECK(verify_doubly_stochastic(w, 1e-12));
    CHECK(matches_support(w, g));
    for (int i = 0; i < agents; ++i)
      for (int j = 0; j < agents; ++j)
        if (w.entries(i, j) > 0.0) CHECK(w.entries(i, j) >= w.floor_value);
  }
}

TEST_CASE("window 1 schedule repeats the base graph") {
  const auto base = ring_graph(6);
  const auto sched = generate_b_connected_schedule(base, 1, 3, 42);
  REQUIRE(sched.slots() == 3);
  for (const auto& snap : sched.snapshots) CHECK(snap.edges == base.edges);
  validate_schedule(sched);
}

TEST_CASE("generated schedules are window-connected and doubly stochastic") {
  for (int window : {1, 2, 4}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto base = erdos_renyi_graph(8, 0.35, seed);
      const auto sched = generate_b_connected_schedule(base, window, 3 * window, seed);
      CHECK(sched.window == window);
      CHECK_NOTHROW(validate_schedule(sched, 1e-12));
    }
  }
}

TEST_CASE("schedule generation is deterministic in the seed") {
  const auto base = geometric_graph(9, 0.5, 7);
  const auto a = generate_b_connected_schedule(base, 2, 6, 123);
  const auto b = generate_b_connected_schedule(base, 2, 6, 123);
  REQUIRE(a.slots() == b.slots());
  for (int k = 0; k < a.slots(); ++k) {
    CHECK(a.snapshots[k].edges == b.snapshots[k].edges);
    CHECK(a.weights[k].entries == b.weights[k].entries);
  }
}

TEST_CASE("disconnected base graph is rejected with the offending pair") {
  DigraphSnapshot g(4);
  g.add_undirected(0, 1);  // 2 and 3 isolated
  try {
    generate_b_connected_schedule(g, 1, 2, 0);
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    const std::string msg = e.what();
    CHECK(msg.find("not strongly connected") != std::string::npos);
    CHECK(msg.find("agent") != std::string::npos);
  }
}

TEST_CASE("transition products contract toward the average") {
  const auto base = erdos_renyi_graph(10, 0.4, 11);
  const auto sched = generate_b_connected_schedule(base, 2, 4, 11);
  const auto profile = transition_decay_profile(sched, 0, 60);
  CHECK(profile.front() <= 1.0 + 1e-12);
  CHECK(profile.back() < 1e-3);
  for (std::size_t k = 8; k < profile.size(); ++k) CHECK(profile[k] <= profile[k - 8] + 1e-12);

  const auto env = fit_geometric_envelope(profile, sched.window, 60);
  CHECK(env.rho < 1.0);
  CHECK(env.rho > 0.0);
  for (int k = sched.window; k < 60; ++k)
    if (profile[k] >= 1e-14) CHECK(profile[k] <= env.c0 * std::pow(env.rho, k) * 1.05);
}

TEST_CASE("transition product equals the explicit matrix chain") {
  const auto base = ring_graph(5);
  const auto sched = generate_b_connected_schedule(base, 2, 4, 3);
  const auto p = transition_product(sched, 5, 2);
  Matrix expect = Matrix::Identity(5, 5);
  for (long k = 2; k <= 5; ++k) expect = sched.weight_at(k).entries * expect;
  CHECK((p.matrix - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("schedule round-trips through the text format byte-for-byte") {
  const auto base = erdos_renyi_graph(7, 0.5, 99);
  const auto sched = generate_b_connected_schedule(base, 2, 4, 99);
  std::ostringstream first;
  save_schedule(sched, first);
  std::istringstream in(first.str());
  const auto loaded = load_schedule(in);
  std::ostringstream second;
  save_schedule(loaded, second);
  CHECK(first.str() == second.str());
  REQUIRE(loaded.slots() == sched.slots());
  for (int k = 0; k < sched.slots(); ++k) {
    CHECK(loaded.snapshots[k].edges == sched.snapshots[k].edges);
    CHECK(loaded.weights[k].entries == sched.weights[k].entries);
  }
}

TEST_CASE("malformed schedule files are rejected with line context") {
  std::istringstream bad("nextsca-schedule v1\nagents 2\nslots 1\nwindow 1\nfloor 0.001\n"
                         "slot 0\nentries 1\n0 5 1.0\nend\n");
  CHECK_THROWS_AS(load_schedule(bad), InvalidInput);
}

TEST_CASE("snapshot rejects self-loops and out-of-range endpoints") {
  DigraphSnapshot g(3);
  CHECK_THROWS_AS(g.add_edge(1, 1), InvalidInput);
  CHECK_THROWS_AS(g.add_edge(0, 3), InvalidInput);
  CHECK_THROWS_AS(g.add_edge(-1, 0), InvalidInput);
}
