#include "nextsca/problem.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace nextsca;

namespace {

SmoothLocalCost quadratic_cost(const Matrix& q, const Vector& b) {
  SmoothLocalCost c;
  c.dimension = static_cast<int>(q.rows());
  c.value = [q, b](const Vector& x) { return 0.5 * x.dot(q * x) + b.dot(x); };
  c.gradient = [q, b](const Vector& x) -> Vector { return q * x + b; };
  return c;
}

}  // namespace

TEST_CASE("box projection clamps coordinatewise") {
  const auto set = box_set(2, 0.0, 1.0);
  Vector v(2);
  v << 1.7, -0.3;
  const Vector p = set.project(v);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 0.0);
  CHECK(set.contains(p));
  CHECK_FALSE(set.contains(v));
}

TEST_CASE("l1 prox soft-thresholds") {
  const auto reg = l1_regularizer(0.1);
  Vector v(2);
  v << 0.25, -0.05;
  const Vector p = reg.prox(v, 1.0, nullptr);
  CHECK(p[0] == Catch::Approx(0.15).margin(1e-15));
  CHECK(p[1] == 0.0);
}

TEST_CASE("l1 prox with a box restriction is soft-threshold then clamp") {
  const auto reg = l1_regularizer(0.5);
  const auto set = box_set(3, 0.0, 1.0);
  Vector v(3);
  v << 2.4, 0.3, -1.0;
  const Vector p = reg.prox(v, 1.0, &set);
  CHECK(p[0] == Catch::Approx(1.0));
  CHECK(p[1] == 0.0);
  CHECK(p[2] == 0.0);
}

TEST_CASE("l1 prox falls back to Dykstra when the set has no box structure") {
  const auto reg = l1_regularizer(0.3);
  const auto box = box_set(4, -1.0, 2.0);
  FeasibleSet opaque;  // same set, box structure hidden
  opaque.dimension = 4;
  opaque.project = box.project;
  auto rng = make_rng(5);
  std::normal_distribution<double> gauss(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vector v(4);
    for (int k = 0; k < 4; ++k) v[k] = gauss(rng);
    const Vector closed = reg.prox(v, 0.7, &box);
    const Vector iterative = reg.prox(v, 0.7, &opaque);
    CHECK((closed - iterative).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("linear regularizer prox is a shifted projection") {
  Vector w(2);
  w << 0.2, -0.1;
  const auto reg = linear_regularizer(w);
  const auto set = box_set(2, 0.0, 1.0);
  Vector v(2);
  v << 0.5, 0.5;
  const Vector p = reg.prox(v, 2.0, &set);
  CHECK(p[0] == Catch::Approx(0.1).margin(1e-15));
  CHECK(p[1] == Catch::Approx(0.7).margin(1e-15));
}

TEST_CASE("zero regularizer prox reduces to projection") {
  const auto reg = zero_regularizer();
  const auto set = box_set(3, -1.0, 1.0);
  auto rng = make_rng(11);
  std::normal_distribution<double> gauss(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector v(3);
    for (int k = 0; k < 3; ++k) v[k] = gauss(rng);
    CHECK((reg.prox(v, 1.0, &set) - set.project(v)).lpNorm<Eigen::Infinity>() == 0.0);
  }
  CHECK(reg.is_zero);
}

TEST_CASE("halfspace plus box projection solves the coupled case") {
  Matrix a(1, 2);
  a << 1.0, 1.0;
  Vector b(1);
  b << 1.0;
  const auto set = halfspace_box_set(a, b, Vector::Zero(2), Vector::Constant(2, 1.0));
  Vector v(2);
  v << 1.0, 1.0;
  const Vector p = set.project(v);
  CHECK(p[0] == Catch::Approx(0.5).margin(1e-9));
  CHECK(p[1] == Catch::Approx(0.5).margin(1e-9));

  std::vector<Vector> pts;
  auto rng = make_rng(3);
  std::normal_distribution<double> gauss(0.5, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    Vector u(2);
    u << gauss(rng), gauss(rng);
    pts.push_back(u);
  }
  CHECK(check_projection(set, pts, 1e-8));
}

TEST_CASE("stationarity residual of a scalar quadratic on [0,1]") {
  DistributedProblem p;
  p.dimension = 1;
  Matrix q(1, 1);
  q << 2.0;
  p.costs.push_back(quadratic_cost(q, Vector::Zero(1)));  // F(x) = x^2
  p.regularizer = zero_regularizer();
  p.feasible = box_set(1, 0.0, 1.0);
  validate_problem(p);
  Vector x(1);
  x << 0.5;
  CHECK(stationarity_residual(p, x) == Catch::Approx(0.5).margin(1e-15));
  x << 0.0;  // constrained minimum
  CHECK(stationarity_residual(p, x) == 0.0);
}

TEST_CASE("analytic gradients agree with central differences") {
  auto rng = make_rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix q(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) q(i, j) = gauss(rng);
  q = Matrix(0.5 * (q + q.transpose()));
  Vector b(4);
  for (int k = 0; k < 4; ++k) b[k] = gauss(rng);
  const auto cost = quadratic_cost(q, b);
  std::vector<Vector> pts;
  for (int trial = 0; trial < 10; ++trial) {
    Vector x(4);
    for (int k = 0; k < 4; ++k) x[k] = gauss(rng);
    pts.push_back(x);
  }
  CHECK(check_gradient(cost, pts) < 1e-5);
}

TEST_CASE("regularizer convexity probe accepts l1 and rejects a concave impostor") {
  auto rng = make_rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::pair<Vector, Vector>> pairs;
  for (int trial = 0; trial < 50; ++trial) {
    Vector a(3), b(3);
    for (int k = 0; k < 3; ++k) {
      a[k] = gauss(rng);
      b[k] = gauss(rng);
    }
    pairs.push_back({a, b});
  }
  CHECK(check_convexity(l1_regularizer(0.4), pairs));
  Regularizer bad = l1_regularizer(1.0);
  bad.value = [](const Vector& v) { return -v.squaredNorm(); };
  CHECK_FALSE(check_convexity(bad, pairs));
}

TEST_CASE("non-finite cost oracle output names the agent") {
  DistributedProblem p;
  p.dimension = 1;
  Matrix q(1, 1);
  q << 1.0;
  p.costs.push_back(quadratic_cost(q, Vector::Zero(1)));
  SmoothLocalCost broken;
  broken.dimension = 1;
  broken.value = [](const Vector&) { return std::numeric_limits<double>::quiet_NaN(); };
  broken.gradient = [](const Vector& x) { return x; };
  p.costs.push_back(broken);
  p.regularizer = zero_regularizer();
  p.feasible = unbounded_set(1);
  try {
    p.sum_value(Vector::Ones(1));
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("agent 1") != std::string::npos);
  }
}

TEST_CASE("feasible sampling respects the box hull and falls back to projection") {
  auto rng = make_rng(31);
  const auto box = box_set(3, -2.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector x = sample_feasible(box, rng);
    CHECK(box.contains(x, 0.0));
  }
  Matrix a(1, 2);
  a << 1.0, 1.0;
  Vector b(1);
  b << 0.5;
  const auto coupled = halfspace_box_set(a, b, Vector::Zero(2), Vector::Constant(2, 1.0));
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = sample_feasible(coupled, rng);
    CHECK(coupled.contains(x, 1e-8));
  }
}

TEST_CASE("problem validation catches shape mismatches") {
  DistributedProblem p;
  p.dimension = 2;
  Matrix q(1, 1);
  q << 1.0;
  p.costs.push_back(quadratic_cost(q, Vector::Zero(1)));  // 1-dim cost in 2-dim problem
  p.regularizer = zero_regularizer();
  p.feasible = box_set(2, 0.0, 1.0);
  CHECK_THROWS_AS(validate_problem(p), InvalidInput);
}
