#include "nextsca/apps/localization.hpp"

#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "nextsca/oracle.hpp"

using namespace nextsca;

namespace {

LocalizationInstance tiny_noiseless() {
  LocalizationOptions opt;
  opt.agents = 1;
  opt.targets = 1;
  opt.min_snr_db = std::numeric_limits<double>::infinity();
  opt.node_positions = {Vector::Zero(2)};
  Vector target(2);
  target << 0.5, 0.5;
  opt.target_positions = {target};
  return make_localization(opt);
}

}  // namespace

TEST_CASE("kept quadratic coefficient matches the hand-evaluated value") {
  Vector w(2);
  w << 1.0, 0.0;
  const Matrix a = detail::localization_kept_matrix(w);
  CHECK(a(0, 0) == 6.0);
  CHECK(a(0, 1) == 0.0);
  CHECK(a(1, 0) == 0.0);
  CHECK(a(1, 1) == 2.0);
}

TEST_CASE("anchor-linear coefficient collapses at the sensor position") {
  // at anchor a = w the middle term vanishes, leaving 12|w|^2 w for any phi
  auto rng = make_rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Vector w(2);
    w << gauss(rng), gauss(rng);
    const double phi = gauss(rng);
    const Vector b = detail::localization_linear_vector(w, phi, w);
    const Vector expect = 12.0 * w.squaredNorm() * w;
    CHECK((b - expect).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + expect.norm()));
  }
}

TEST_CASE("bundled defaults: thirty sensors, three fixed targets, unit box") {
  const auto inst = make_localization({});
  CHECK(inst.agents == 30);
  CHECK(inst.targets == 3);
  CHECK(inst.dimension() == 6);
  Vector expect(6);
  expect << 0.03, 0.85, 0.86, 0.5, 0.6, 0.01;
  CHECK((inst.truth - expect).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(inst.lower.minCoeff() == 0.0);
  CHECK(inst.upper.maxCoeff() == 1.0);
  CHECK(inst.tau == 10.0);
  for (const auto& w : inst.node_positions) {
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.maxCoeff() <= 1.0);
  }
}

TEST_CASE("noiseless measurements make the truth a zero-residual stationary point") {
  const auto inst = tiny_noiseless();
  CHECK(inst.noise_sigma == 0.0);
  CHECK(inst.measurements(0, 0) == 0.5);
  const auto prob = localization_problem(inst);
  CHECK(prob.costs[0].value(inst.truth) == 0.0);
  CHECK(prob.costs[0].gradient(inst.truth).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("noiseless multi-sensor instance: centralized search reaches objective zero") {
  LocalizationOptions opt;
  opt.agents = 6;
  opt.targets = 1;
  opt.min_snr_db = std::numeric_limits<double>::infinity();
  opt.seed = 5;
  const auto inst = make_localization(opt);
  const auto prob = localization_problem(inst);
  CHECK(prob.sum_value(inst.truth) == 0.0);
  CentralizedOptions copts;
  copts.restarts = 10;
  const auto sol = centralized_solve(prob, copts);
  CHECK(sol.objective <= 1e-12);
}

TEST_CASE("analytic gradients agree with central differences") {
  LocalizationOptions opt;
  opt.agents = 4;
  opt.targets = 2;
  opt.seed = 7;
  const auto inst = make_localization(opt);
  const auto prob = localization_problem(inst);
  auto rng = make_rng(11);
  std::vector<Vector> points;
  for (int k = 0; k < 5; ++k) points.push_back(sample_feasible(prob.feasible, rng));
  for (const auto& c : prob.costs) CHECK(check_gradient(c, points) <= 1e-5);
}

TEST_CASE("partially linearized models touch the cost gradient at every anchor") {
  LocalizationOptions opt;
  opt.agents = 5;
  opt.targets = 2;
  opt.seed = 13;
  const auto inst = make_localization(opt);
  const auto prob = localization_problem(inst);
  const auto models = localization_pl_models(inst);
  auto rng = make_rng(17);
  std::vector<Vector> anchors;
  for (int k = 0; k < 20; ++k) anchors.push_back(sample_feasible(prob.feasible, rng));
  for (int i = 0; i < inst.agents; ++i) {
    CHECK(check_gradient_match(models[i], prob.costs[i], anchors) <= 1e-7);
    CHECK(check_strong_convexity(models[i], anchors, 97));
    CHECK(models[i].modulus >= inst.tau);
  }
}

TEST_CASE("exact per-target box step equals the deep iterative solve") {
  LocalizationOptions opt;
  opt.agents = 5;
  opt.targets = 2;
  opt.seed = 19;
  const auto inst = make_localization(opt);
  const auto prob = localization_problem(inst);
  const auto models = localization_pl_models(inst);
  auto rng = make_rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int i = rep % inst.agents;
    const Vector anchor = sample_feasible(prob.feasible, rng);
    Vector tracked(inst.dimension());
    for (int k = 0; k < tracked.size(); ++k) tracked[k] = 3.0 * gauss(rng);
    const auto sub =
        make_subproblem(models[i], anchor, tracked, prob.regularizer, prob.feasible);
    REQUIRE(models[i].closed_form);
    const Vector exact = models[i].closed_form(sub);
    SolveOptions sopts;
    sopts.accuracy_target = 1e-12;
    const auto deep = solve_subproblem_iterative(sub, sopts);
    worst = std::max(worst, (exact - deep.solution).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("3-D instances solve blockwise without an exact hook") {
  LocalizationOptions opt;
  opt.agents = 3;
  opt.targets = 2;
  opt.space_dimension = 3;
  opt.seed = 29;
  const auto inst = make_localization(opt);
  const auto prob = localization_problem(inst);
  const auto models = localization_pl_models(inst);
  CHECK(inst.dimension() == 6);
  auto rng = make_rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vector> anchors;
  for (int k = 0; k < 10; ++k) anchors.push_back(sample_feasible(prob.feasible, rng));
  for (int i = 0; i < inst.agents; ++i) {
    CHECK(!models[i].closed_form);
    CHECK(check_gradient_match(models[i], prob.costs[i], anchors) <= 1e-7);
  }
  for (int rep = 0; rep < 10; ++rep) {
    const int i = rep % inst.agents;
    Vector tracked(inst.dimension());
    for (int k = 0; k < tracked.size(); ++k) tracked[k] = gauss(rng);
    const auto sub =
        make_subproblem(models[i], anchors[rep], tracked, prob.regularizer, prob.feasible);
    const auto split = solve_exact(sub);
    SolveOptions sopts;
    sopts.accuracy_target = 1e-12;
    const auto deep = solve_subproblem_iterative(sub, sopts);
    CHECK((split.solution - deep.solution).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}

TEST_CASE("linearized models reduce to a single projection step") {
  LocalizationOptions opt;
  opt.agents = 4;
  opt.targets = 2;
  opt.seed = 37;
  const auto inst = make_localization(opt);
  const auto prob = localization_problem(inst);
  const auto models = localization_l_models(inst);
  auto rng = make_rng(41);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const int i = rep % inst.agents;
    const Vector anchor = sample_feasible(prob.feasible, rng);
    Vector tracked(inst.dimension());
    for (int k = 0; k < tracked.size(); ++k) tracked[k] = 3.0 * gauss(rng);
    const auto sub =
        make_subproblem(models[i], anchor, tracked, prob.regularizer, prob.feasible);
    const Vector formula = prob.feasible.project(
        anchor - (prob.costs[i].gradient(anchor) + tracked) / inst.tau);
    const auto fast = solve_exact(sub);
    CHECK(fast.iterations <= 1);
    CHECK((fast.solution - formula).lpNorm<Eigen::Infinity>() == 0.0);
    SolveOptions sopts;
    sopts.accuracy_target = 1e-12;
    const auto deep = solve_subproblem_iterative(sub, sopts);
    CHECK((formula - deep.solution).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("noise calibration puts the weakest sensor exactly at the target ratio") {
  LocalizationOptions opt;
  opt.agents = 12;
  opt.targets = 2;
  opt.min_snr_db = -20.0;
  opt.seed = 43;
  const auto inst = make_localization(opt);
  CHECK(inst.noise_sigma > 0.0);
  std::vector<double> powers(inst.agents, 0.0);
  for (int i = 0; i < inst.agents; ++i)
    for (int t = 0; t < inst.targets; ++t) {
      const double clean =
          (inst.truth.segment(2 * t, 2) - inst.node_positions[i]).squaredNorm();
      powers[i] += clean * clean / inst.targets;
    }
  CHECK(measured_min_snr_db(powers, inst.noise_sigma) == Catch::Approx(-20.0).margin(0.1));
}

TEST_CASE("instance generation is deterministic and rejects bad requests") {
  LocalizationOptions opt;
  opt.agents = 3;
  opt.targets = 1;
  opt.seed = 47;
  const auto a = make_localization(opt);
  const auto b = make_localization(opt);
  CHECK(a.measurements == b.measurements);
  CHECK(a.node_positions[2] == b.node_positions[2]);
  opt.seed = 48;
  const auto c = make_localization(opt);
  CHECK(a.measurements != c.measurements);

  LocalizationOptions bad;
  bad.min_snr_db = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(make_localization(bad), InvalidInput);
  bad = {};
  bad.agents = 0;
  CHECK_THROWS_AS(make_localization(bad), InvalidInput);
  bad = {};
  bad.space_dimension = 4;
  CHECK_THROWS_AS(make_localization(bad), InvalidInput);
}

TEST_CASE("manifest round: identical instances yield identical manifests") {
  LocalizationOptions opt;
  opt.agents = 2;
  opt.targets = 1;
  opt.seed = 53;
  const auto inst = make_localization(opt);
  std::ostringstream first, second;
  write_localization_manifest(inst, first);
  write_localization_manifest(make_localization(opt), second);
  CHECK(first.str() == second.str());
  CHECK(first.str().rfind("nextsca-localization v1\n", 0) == 0);
  CHECK(first.str().find("\nend\n") != std::string::npos);
}
