#include "nextsca/metrics.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace nextsca;

TEST_CASE("disagreement of two points two apart is one") {
  Vector a(2), b(2);
  a << 0.0, 0.0;
  b << 2.0, 0.0;
  CHECK(disagreement({a, b}) == Catch::Approx(1.0).margin(1e-15));
  CHECK(disagreement({a, a}) == 0.0);
}

TEST_CASE("nmse of a 10 percent overshoot is one percent") {
  Vector truth(3);
  truth << 1.0, -2.0, 0.5;
  CHECK(nmse(1.1 * truth, truth) == Catch::Approx(0.01).epsilon(1e-12));
  CHECK(nmse(truth, truth) == 0.0);
  CHECK_THROWS_AS(nmse(truth, Vector::Zero(3)), InvalidInput);
}

TEST_CASE("csv rows are stable byte for byte") {
  MetricRow r0;
  r0.n = 0;
  r0.comm = 0;
  r0.j = 0.5;
  r0.d = 1.0;
  r0.u = 0.25;
  r0.track_err = 0.0;
  MetricRow r1;
  r1.n = 10;
  r1.comm = 20;
  r1.j = 1.0 / 3.0;
  r1.d = 1e-12;
  r1.nmse = 0.01;
  r1.u = -1.5;
  r1.track_err = 2e-9;
  std::ostringstream os;
  write_metrics_csv({r0, r1}, os);
  CHECK(os.str() ==
        "n,comm,J,D,NMSE,U,track_err\n"
        "0,0,0.5,1,NA,0.25,0\n"
        "10,20,0.33333333333333331,9.9999999999999998e-13,0.01,-1.5,2.0000000000000001e-09\n");
}
