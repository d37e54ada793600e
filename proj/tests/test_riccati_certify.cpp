#include <cmath>
#include <random>

#include "doctest.h"
#include "kerrstab/ode.hpp"
#include "kerrstab/riccati_certify.hpp"
#include "oracles.hpp"

using namespace kerr;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = a + (b - a) * i / (n - 1);
  return g;
}

RiccatiProblem problem(std::function<cplx(double)> V, double u0, double u1, cplx y0, double R0 = 0.0) {
  RiccatiProblem p;
  p.V = std::move(V);
  p.u0 = u0;
  p.u1 = u1;
  p.y0 = y0;
  p.initial_disk = {y0, R0};
  return p;
}

// Fraction of nodes where the oracle leaves the disk.
int containment_failures(const CertifiedEnclosure& enc, const RiccatiProblem& p) {
  const auto y = riccati_flow(p, enc.nodes);
  int bad = 0;
  for (std::size_t i = 0; i < enc.nodes.size(); ++i)
    if (!enc.disks[i].contains(y[i], 1e-10 * (1.0 + std::abs(y[i])))) ++bad;
  return bad;
}

}  // namespace

TEST_CASE("riccati flow: closed forms and Airy oracle") {
  const auto g = linspace(0.0, 3.0, 31);
  const auto y = riccati_flow(problem([](double) { return cplx(0.0); }, 0.0, 3.0, 1.0), g);
  const auto t = riccati_flow(problem([](double) { return cplx(1.0); }, 0.0, 3.0, 0.0), g);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    e1 = std::max(e1, std::abs(y[i] - 1.0 / (g[i] + 1.0)));
    e2 = std::max(e2, std::abs(t[i] - std::tanh(g[i])));
  }
  CHECK(e1 < 1e-10);
  CHECK(e2 < 1e-10);

  // V = u: log-derivative of an independently integrated -phi'' + u phi = 0
  const auto ga = linspace(0.5, 3.0, 26);
  const auto ya = riccati_flow(problem([](double u) { return cplx(u); }, 0.5, 3.0, cplx(-0.7, 0.2)), ga);
  ode::Tolerances tol;
  tol.rel = 1e-12;
  tol.abs = 1e-15;
  const auto sol = ode::integrate_schrodinger([](double u) { return cplx(u); }, 0.5, 1.0, cplx(-0.7, 0.2), ga, tol);
  double e3 = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) e3 = std::max(e3, std::abs(ya[i] - sol.dphi[i] / sol.phi[i]));
  CHECK(e3 < 1e-8);

  // pole: y' = -y^2 from y0 = -1 blows up at u = 1
  CHECK_THROWS_WITH_AS(riccati_flow(problem([](double) { return cplx(0.0); }, 0.0, 2.0, -1.0), linspace(0.0, 2.0, 5)),
                       doctest::Contains("pole"), std::runtime_error);
}

TEST_CASE("disk flow: exact centre, constant centre, monotone radius") {
  // y = tanh(u) solves y' = 1 - y^2 exactly
  CenterPath exact{[](double u) { return cplx(std::tanh(u)); },
                   [](double u) { return cplx(1.0 / std::pow(std::cosh(u), 2)); }};
  const auto g = linspace(0.0, 2.0, 201);
  const auto V1 = [](double) { return cplx(1.0); };
  const auto f = disk_flow(exact, V1, g, 0.0);
  double dm = 0.0, R = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    dm = std::max(dm, std::abs(f.dm[i]));
    R = std::max(R, f.R[i]);
  }
  CHECK(dm < 1e-14);
  CHECK(R < 1e-14);

  CenterPath c09{[](double) { return cplx(0.9); }, [](double) { return cplx(0.0); }};
  const auto f2 = disk_flow(c09, V1, g, 0.01);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::isfinite(std::abs(f2.dm[i])));
    CHECK(std::abs(f2.dm[i] - (0.81 - 1.0 + f2.R[i] * f2.R[i])) < 1e-14);
  }

  CenterPath neg{[](double) { return cplx(-0.5, 0.3); }, [](double) { return cplx(0.0); }};
  const auto f3 = disk_flow(neg, [](double) { return cplx(2.0, 1.0); }, linspace(0.0, 1.0, 101), 0.1);
  bool increasing = true;
  for (std::size_t i = 1; i < f3.R.size(); ++i) increasing = increasing && f3.R[i] > f3.R[i - 1];
  CHECK(increasing);
}

TEST_CASE("wkb centre: constant potential, accuracy, branch continuity, turning point") {
  const auto g = linspace(0.0, 5.0, 501);
  const auto c = wkb_center([](double) { return cplx(9.0); }, g, cplx(-1.0));
  CHECK(std::abs(c.m(1.3) - cplx(-3.0)) < 1e-14);
  const auto cp = wkb_center([](double) { return cplx(9.0); }, g, cplx(1.0));
  CHECK(std::abs(cp.m(1.3) - cplx(3.0)) < 1e-14);

  auto V = [](double u) { return cplx(25.0 + u * u); };
  const auto w = wkb_center(V, g);
  double worst = 0.0;
  for (double u : g) {
    const cplx m = w.m(u);
    const cplx dm = w.derivative(u) - V(u) + m * m;
    worst = std::max(worst, std::abs(dm) / std::abs(V(u)));
  }
  CHECK(worst < 2e-2);

  // V = 4 exp(i u) winds once around 0
  const auto loop = linspace(0.0, 2.0 * std::numbers::pi, 400);
  const auto wl = wkb_center([](double u) { return 4.0 * std::exp(cplx(0.0, u)); }, loop);
  double jump = 0.0;
  for (std::size_t i = 1; i < loop.size(); ++i)
    jump = std::max(jump, std::abs(wl.m(loop[i]).imag() - wl.m(loop[i - 1]).imag()));
  CHECK(jump < 0.1);
  // sqrt(V) returns with the opposite sign; the -V'/(4V) = -i/4 part is periodic
  const cplx shift(0.0, 0.25);
  CHECK(std::abs((wl.m(loop.back()) + shift) + (wl.m(loop.front()) + shift)) < 1e-6);

  CHECK_THROWS_AS(wkb_center([](double u) { return cplx(u - 2.0); }, g), TurningPointError);
}

TEST_CASE("certify: containment, tight limit, failure detection") {
  auto V = [](double u) { return cplx(2.0, 0.3 * std::sin(u)); };
  const auto g = linspace(0.0, 10.0, 1001);
  const auto m = wkb_center(V, g, cplx(1.0));
  auto p = problem(V, 0.0, 10.0, m.m(0.0), 1e-3);
  CertifyOptions opts;
  opts.nodes_per_phase = 200;
  const auto enc = certify(p, m, opts);
  CHECK(enc.certified);
  CHECK(containment_failures(enc, p) == 0);

  // centre on the true solution: the radius only contracts
  const auto gg = linspace(0.0, 2.0, 2001);
  auto pt = problem([](double) { return cplx(1.0); }, 0.0, 2.0, 0.0, 1e-3);
  CenterPath exact{[](double u) { return cplx(std::tanh(u)); },
                   [](double u) { return cplx(1.0 / std::pow(std::cosh(u), 2)); }};
  const auto et = certify_on_grid(pt, exact, gg);
  const double predicted = 1e-3 / std::pow(std::cosh(2.0), 2);  // R0 exp(-2 int tanh)
  CHECK(et.disks.back().R == doctest::Approx(predicted).epsilon(0.06));

  // bad centre: m = 0 for V = 4 while y stays at 2; the radius must reach |y - m| = 2,
  // so a cap below that marks the enclosure uninformative
  auto pb = problem([](double) { return cplx(4.0); }, 0.0, 5.0, 2.0, 0.0);
  CenterPath zero{[](double) { return cplx(0.0); }, [](double) { return cplx(0.0); }};
  CertifyOptions capped;
  capped.radius_cap = 1.0;
  const auto eb = certify_on_grid(pb, zero, linspace(0.0, 5.0, 5001), capped);
  const bool flagged = !eb.certified || eb.disks.back().R > capped.radius_cap;
  CHECK(flagged);
  REQUIRE(eb.failure_point);
  CHECK(*eb.failure_point < 5.0);

  auto outside = problem(V, 0.0, 1.0, cplx(5.0));
  outside.initial_disk = {cplx(0.0), 0.1};
  CHECK_THROWS_AS(certify(outside, m), std::invalid_argument);
}

TEST_CASE("certify: randomized soundness and necessity (small sample)") {
  std::mt19937_64 rng(12345);
  CertifyOptions opts;
  opts.nodes_per_phase = 200;
  CertifyOptions bad = opts;
  bad.margin = -0.5;
  int failures_sound = 0, failures_bad = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto pot = oracle::random_potential(rng);
    std::function<cplx(double)> V = pot;
    const auto m = wkb_center(V, linspace(0.0, 5.0, 501), cplx(1.0));
    auto p = problem(V, 0.0, 5.0, m.m(0.0), 0.0);
    const auto enc = certify(p, m, opts);
    CHECK(enc.certified);
    failures_sound += containment_failures(enc, p);
    failures_bad += containment_failures(certify(p, m, bad), p);
  }
  CHECK(failures_sound == 0);
  CHECK(failures_bad > 0);
}
