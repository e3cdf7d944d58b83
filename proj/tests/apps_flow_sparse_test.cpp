#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "nextsca/apps/flow_control.hpp"
#include "nextsca/apps/sparse_ml.hpp"
#include "nextsca/oracle.hpp"
#include "nextsca/solver.hpp"

using namespace nextsca;

namespace {

FlowControlInstance shared_link_pair(int slope, int offset) {
  FlowControlInstance inst;
  inst.capacities = {1.0};
  inst.paths = {{0}, {0}};
  inst.min_rate = Vector::Zero(2);
  inst.max_rate = Vector::Constant(2, 1.0);
  inst.slope = {slope, slope};
  inst.offset = {offset, offset};
  inst.tau = 1.0;
  return inst;
}

// Independent coordinate-descent route for box-constrained l1 least squares:
// min 0.5 x'Gx - r'x + lambda |x|_1 over [-bound, bound]^m.
Vector coordinate_descent_l1(const Matrix& gram, const Vector& rhs, double lambda, double bound) {
  const int m = static_cast<int>(rhs.size());
  Vector x = Vector::Zero(m);
  for (int sweep = 0; sweep < 200000; ++sweep) {
    double moved = 0.0;
    for (int k = 0; k < m; ++k) {
      const double residual = rhs[k] - gram.row(k).dot(x) + gram(k, k) * x[k];
      const double raw = residual / gram(k, k);
      const double shrink = lambda / gram(k, k);
      double next = 0.0;
      if (raw > shrink) next = raw - shrink;
      if (raw < -shrink) next = raw + shrink;
      next = std::min(bound, std::max(-bound, next));
      moved = std::max(moved, std::abs(next - x[k]));
      x[k] = next;
    }
    if (moved < 1e-14) break;
  }
  return x;
}

}  // namespace

TEST_CASE("sigmoid split members reproduce the ratio form of the convex part") {
  auto rng = make_rng(2);
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  std::uniform_int_distribution<int> slope(1, 10);
  std::uniform_int_distribution<int> offset(-10, -1);
  for (int rep = 0; rep < 100; ++rep) {
    const double u = slope(rng) * ur(rng) + offset(rng);
    const double direct = std::exp(2.0 * u) / (1.0 + std::exp(u));
    CHECK(sigmoid_split_kept(u) == Catch::Approx(direct).epsilon(1e-12));
    CHECK(sigmoid_split_linearized(u) - sigmoid_split_kept(u) ==
          Catch::Approx(stable_sigmoid(u)).epsilon(1e-12));
  }
  // the kept part is convex: nonnegative second differences on a grid
  for (double u = -8.0; u <= 8.0; u += 0.25) {
    const double h = 1e-3;
    const double second =
        sigmoid_split_kept(u - h) - 2.0 * sigmoid_split_kept(u) + sigmoid_split_kept(u + h);
    CHECK(second >= -1e-12);
  }
}

TEST_CASE("single source on a roomy link transmits at its maximum rate") {
  FlowControlInstance inst;
  inst.capacities = {2.0};
  inst.paths = {{0}};
  inst.min_rate = Vector::Zero(1);
  inst.max_rate = Vector::Constant(1, 1.0);
  inst.slope = {5};
  inst.offset = {-2};
  const auto prob = flow_control_problem(inst);
  CentralizedOptions copts;
  copts.restarts = 4;
  const auto sol = centralized_solve(prob, copts);
  CHECK(sol.point[0] == Catch::Approx(1.0).margin(1e-7));
}

TEST_CASE("two sources on a tight link settle at the symmetric split") {
  const auto inst = shared_link_pair(5, -2);
  const auto prob = flow_control_problem(inst);
  CentralizedOptions copts;
  copts.restarts = 12;
  const auto sol = centralized_solve(prob, copts);
  CHECK(std::abs(sol.point[0] - sol.point[1]) <= 1e-6);
  CHECK(sol.point[0] == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("capacity projection respects both the halfspace and the box") {
  const auto inst = shared_link_pair(5, -2);
  const auto set = flow_control_set(inst);
  Vector outside(2);
  outside << 2.0, 2.0;
  const Vector onto = set.project(outside);
  CHECK(onto[0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(onto[1] == Catch::Approx(0.5).margin(1e-9));
  auto rng = make_rng(3);
  std::normal_distribution<double> gauss(0.5, 1.0);
  std::vector<Vector> points;
  for (int k = 0; k < 10; ++k) {
    Vector v(2);
    v << gauss(rng), gauss(rng);
    points.push_back(v);
  }
  CHECK(check_projection(set, points));
}

TEST_CASE("difference-of-convex models touch the cost gradient at anchors") {
  FlowControlOptions opt;
  opt.seed = 5;
  const auto inst = make_flow_control(opt);
  const auto prob = flow_control_problem(inst);
  const auto models = flow_control_models(inst);
  auto rng = make_rng(7);
  std::vector<Vector> anchors;
  for (int k = 0; k < 20; ++k) anchors.push_back(sample_feasible(prob.feasible, rng));
  for (int i = 0; i < inst.sources(); ++i) {
    CHECK(check_gradient_match(models[i], prob.costs[i], anchors) <= 1e-7);
    CHECK(check_strong_convexity(models[i], anchors, 97));
  }
}

TEST_CASE("network run on the symmetric pair stays feasible and symmetric") {
  const auto inst = shared_link_pair(5, -2);
  const auto prob = flow_control_problem(inst);
  const auto models = flow_control_models(inst);
  DigraphSnapshot pair(2);
  pair.add_edge(0, 1);
  pair.add_edge(1, 0);
  const auto schedule = generate_b_connected_schedule(pair, 1, 1, 11);
  RunConfig cfg;
  cfg.iterations = 1500;
  cfg.step = recursive_step(0.1, 0.05);
  cfg.seed = 13;
  cfg.cadence = 100;
  const auto trace = run_next(prob, models, schedule, cfg);
  const auto& rows = trace.rows;
  REQUIRE(!rows.empty());
  CHECK(rows.back().j <= 2.5e-2);
  CHECK(rows.back().d <= 1e-10);
  const Vector mean = consensus_mean({trace.final_states[0].x, trace.final_states[1].x});
  CHECK(std::abs(mean[0] - mean[1]) <= 5e-2);
  CHECK(mean[0] + mean[1] <= 1.0 + 1e-8);
  // total utility approaches the symmetric optimum -2*sigmoid(0.5), far above
  // the asymmetric corner value
  CHECK(rows.back().u <= -1.2444);
}

TEST_CASE("infeasible minimum rates are rejected") {
  auto inst = shared_link_pair(5, -2);
  inst.min_rate = Vector::Constant(2, 0.6);
  CHECK_THROWS_AS(validate_flow_control(inst), InvalidInput);
  inst = shared_link_pair(5, -2);
  inst.slope = {0, 5};
  CHECK_THROWS_AS(validate_flow_control(inst), InvalidInput);
  inst = shared_link_pair(5, -2);
  inst.offset = {2, -2};
  CHECK_THROWS_AS(validate_flow_control(inst), InvalidInput);
}

TEST_CASE("random topologies are valid, deterministic, and dumpable") {
  FlowControlOptions opt;
  opt.seed = 17;
  const auto a = make_flow_control(opt);
  const auto b = make_flow_control(opt);
  CHECK(a.capacities == b.capacities);
  CHECK(a.paths == b.paths);
  CHECK(a.slope == b.slope);
  std::ostringstream first, second;
  write_flow_control_manifest(a, first);
  write_flow_control_manifest(b, second);
  CHECK(first.str() == second.str());
  CHECK(first.str().rfind("nextsca-flow-control v1\n", 0) == 0);
}

TEST_CASE("estimation wiring negates the likelihood and checks its gradient") {
  std::vector<SmoothLocalCost> lls(2);
  for (auto& ll : lls) {
    ll.dimension = 2;
    ll.value = [](const Vector& x) { return -x.squaredNorm(); };
    ll.gradient = [](const Vector& x) -> Vector { return -2.0 * x; };
  }
  auto prob = build_sparse_ml(lls, 0.5, box_set(2, -1.0, 1.0));
  Vector probe(2);
  probe << 0.3, -0.2;
  CHECK(prob.costs[0].value(probe) == probe.squaredNorm());
  CHECK((prob.costs[1].gradient(probe) - 2.0 * probe).lpNorm<Eigen::Infinity>() == 0.0);

  // a broken oracle gradient is refused
  lls[1].gradient = [](const Vector& x) -> Vector { return 2.0 * x; };
  CHECK_THROWS_AS(build_sparse_ml(lls, 0.5, box_set(2, -1.0, 1.0)), InvalidInput);
}

TEST_CASE("gaussian linear model agrees with a coordinate-descent route") {
  SparseRegressionOptions opt;
  opt.agents = 4;
  opt.dimension = 10;
  opt.rows_per_agent = 8;
  opt.nonzeros = 3;
  opt.lambda = 0.1;
  opt.noise_sigma = 0.01;
  opt.seed = 19;
  const auto inst = make_sparse_regression(opt);
  const auto prob = sparse_regression_problem(inst);
  Matrix gram = Matrix::Zero(opt.dimension, opt.dimension);
  Vector rhs = Vector::Zero(opt.dimension);
  for (int i = 0; i < inst.agents(); ++i) {
    gram += inst.designs[i].transpose() * inst.designs[i];
    rhs += inst.designs[i].transpose() * inst.observations[i];
  }
  const Vector via_cd = coordinate_descent_l1(gram, rhs, inst.lambda, inst.bound);
  CentralizedOptions copts;
  copts.restarts = 4;
  const auto sol = centralized_solve(prob, copts);
  CHECK((sol.point - via_cd).lpNorm<Eigen::Infinity>() <= 1e-6);
  // the sparse truth is roughly recovered at this noise level
  CHECK((sol.point - inst.truth).lpNorm<Eigen::Infinity>() <= 0.2);
}

TEST_CASE("without shrinkage the concave-likelihood estimate is the least-squares point") {
  SparseRegressionOptions opt;
  opt.agents = 3;
  opt.dimension = 6;
  opt.rows_per_agent = 10;
  opt.nonzeros = 2;
  opt.lambda = 0.0;
  opt.noise_sigma = 0.05;
  opt.seed = 23;
  auto inst = make_sparse_regression(opt);
  const auto prob = sparse_regression_problem(inst);
  Matrix gram = Matrix::Zero(opt.dimension, opt.dimension);
  Vector rhs = Vector::Zero(opt.dimension);
  for (int i = 0; i < inst.agents(); ++i) {
    gram += inst.designs[i].transpose() * inst.designs[i];
    rhs += inst.designs[i].transpose() * inst.observations[i];
  }
  const Vector normal_eq = gram.ldlt().solve(rhs);
  CentralizedOptions copts;
  copts.restarts = 3;
  const auto sol = centralized_solve(prob, copts);
  CHECK((sol.point - normal_eq).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("a flat likelihood leaves only the shrinkage term, minimized at zero") {
  std::vector<SmoothLocalCost> lls(2);
  for (auto& ll : lls) {
    ll.dimension = 3;
    ll.value = [](const Vector&) { return 0.0; };
    ll.gradient = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
  }
  const auto prob = build_sparse_ml(lls, 1.0, box_set(3, -1.0, 1.0));
  CentralizedOptions copts;
  copts.restarts = 3;
  const auto sol = centralized_solve(prob, copts);
  CHECK(sol.point.lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("regression models keep gradients matched and instances reproducible") {
  SparseRegressionOptions opt;
  opt.seed = 29;
  const auto inst = make_sparse_regression(opt);
  const auto again = make_sparse_regression(opt);
  CHECK(inst.truth == again.truth);
  CHECK(inst.designs[1] == again.designs[1]);
  const auto prob = sparse_regression_problem(inst);
  const auto models = sparse_regression_models(inst);
  auto rng = make_rng(31);
  std::vector<Vector> anchors;
  for (int k = 0; k < 15; ++k) anchors.push_back(sample_feasible(prob.feasible, rng));
  for (int i = 0; i < inst.agents(); ++i)
    CHECK(check_gradient_match(models[i], prob.costs[i], anchors) <= 1e-7);
  std::ostringstream manifest;
  write_sparse_regression_manifest(inst, manifest);
  CHECK(manifest.str().rfind("nextsca-sparse-regression v1\n", 0) == 0);
}
