#include <cmath>

#include "doctest.h"
#include "kerrstab/kerr_geometry.hpp"
#include "kerrstab/quadrature.hpp"

using namespace kerr;

TEST_CASE("horizon radius closed form") {
  CHECK(horizon_radius(KerrParams(1.0, 0.0)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(horizon_radius(KerrParams(1.0, 0.5)) == doctest::Approx(1.0 + std::sqrt(0.75)).epsilon(1e-15));
  CHECK_THROWS_AS(KerrParams(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(KerrParams(1.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(KerrParams(0.0, 0.0), std::invalid_argument);
}

TEST_CASE("Delta") {
  const KerrParams schw(1.0, 0.0);
  CHECK(delta(schw, 2.0) == 0.0);
  CHECK(delta(schw, 3.0) == doctest::Approx(3.0));
  const KerrParams p(1.0, 0.5);
  CHECK(std::abs(delta(p, horizon_radius(p))) < 1e-15);
  const auto g = make_geometry_cache(p);
  CHECK(g.r1 > g.r_minus);
  CHECK(g.r_minus == doctest::Approx(1.0 - std::sqrt(0.75)).epsilon(1e-14));
}

TEST_CASE("tortoise coordinate: Schwarzschild gauge and derivative") {
  const KerrParams schw(1.0, 0.0);
  CHECK(regge_wheeler_u(schw, 4.0) == doctest::Approx(4.0).epsilon(1e-15));
  for (double r : {2.5, 3.0, 7.0, 40.0})
    CHECK(regge_wheeler_u(schw, r) == doctest::Approx(r + 2.0 * std::log(r / 2.0 - 1.0)).epsilon(1e-14));

  const KerrParams p(1.0, 0.5);
  CHECK_THROWS_AS(regge_wheeler_u(p, horizon_radius(p)), std::domain_error);
  CHECK(regge_wheeler_u(p, 3.0) < regge_wheeler_u(p, 4.0));

  const double h = 1e-5, r = 3.0;
  const double fd = (regge_wheeler_u(p, r + h) - regge_wheeler_u(p, r - h)) / (2 * h);
  const double exact = (r * r + 0.25) / delta(p, r);
  CHECK(std::abs(fd - exact) / exact < 1e-8);

  // independent quadrature of du/dr between two radii
  const auto q = gauss_legendre(60);
  double integral = 0.0;
  const double ra = 3.0, rb = 6.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double rr = 0.5 * (ra + rb) + 0.5 * (rb - ra) * q.nodes[i];
    integral += 0.5 * (rb - ra) * q.weights[i] * (rr * rr + 0.25) / delta(p, rr);
  }
  CHECK(regge_wheeler_u(p, rb) - regge_wheeler_u(p, ra) == doctest::Approx(integral).epsilon(1e-13));
}

TEST_CASE("tortoise derivative on a log-spaced grid") {
  const KerrParams p(1.0, 0.5);
  const double r1 = horizon_radius(p);
  double worst = 0.0;
  for (int i = 0; i <= 60; ++i) {
    // x = r - r1 from 1e-6 r1 to 100 - r1
    const double x = r1 * 1e-6 * std::pow((100.0 - r1) / (r1 * 1e-6), i / 60.0);
    const double h = 1e-4 * x;
    const double fd = (regge_wheeler_u_from_offset(p, x + h) - regge_wheeler_u_from_offset(p, x - h)) / (2 * h);
    const double r = r1 + x;
    const double exact = (r * r + 0.25) / ((r - r1) * (r - make_geometry_cache(p).r_minus));
    worst = std::max(worst, std::abs(fd - exact) / exact);
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("inverse tortoise map") {
  const KerrParams p(1.0, 0.5);
  const double r1 = horizon_radius(p);
  CHECK(std::abs(regge_wheeler_r(p, regge_wheeler_u(p, 5.0)) - 5.0) / 5.0 < 1e-12);

  double worst = 0.0;
  for (int i = 0; i <= 80; ++i) {
    const double x = r1 * 1e-6 * std::pow((100.0 - r1) / (r1 * 1e-6), i / 80.0);
    const double u = regge_wheeler_u_from_offset(p, x);
    const double xr = regge_wheeler_offset(p, u);
    worst = std::max(worst, std::abs(xr - x) / (r1 + x));
  }
  CHECK(worst < 1e-12);

  const double x50 = regge_wheeler_offset(p, -50.0);
  CHECK(x50 < 1e-8);
  CHECK(x50 > 0.0);
  CHECK(regge_wheeler_u_from_offset(p, x50) == doctest::Approx(-50.0).epsilon(1e-13));

  CHECK(regge_wheeler_r(p, 1e6) / 1e6 == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(regge_wheeler_r(p, 1e3) < regge_wheeler_r(p, 1e3 + 1.0));
}
