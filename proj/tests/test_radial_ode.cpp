#include <cmath>

#include "doctest.h"
#include "kerrstab/angular_spectral.hpp"
#include "kerrstab/kerr_geometry.hpp"
#include "kerrstab/radial_ode.hpp"
#include "oracles.hpp"

using namespace kerr;

namespace {

RadialProblem make(double a, double s, double k, cplx omega, cplx lambda) {
  RadialProblem p;
  p.geometry = KerrParams(1.0, a);
  p.s = s;
  p.k = k;
  p.omega = omega;
  p.lambda = lambda;
  return p;
}

// r(u) for Schwarzschild (M = 1) by bisection on r + 2 ln(r/2 - 1) = u.
double schw_r(double u) {
  double lo = 2.0, hi = std::max(4.0, u + 10.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = mid + 2.0 * std::log(mid / 2.0 - 1.0) - u;
    (f > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// Square well of depth U on |u| < L over the free background -omega^2.
RadialPotential square_well(cplx omega, double U, double L) {
  RadialPotential pot = free_potential(omega);
  const cplx v = -omega * omega;
  pot.evaluate = [v, U, L](double u) { return std::abs(u) < L ? v - U : v; };
  return pot;
}

// Lowest even bound state of the square well: q tan(qL) = kappa, q^2 + kappa^2 = U.
double square_well_kappa(double U, double L) {
  double lo = 1e-9, hi = std::min(std::sqrt(U), 0.5 * std::numbers::pi / L) - 1e-12;
  for (int it = 0; it < 200; ++it) {
    const double q = 0.5 * (lo + hi);
    const double g = q * std::tan(q * L) - std::sqrt(U - q * q);
    (g > 0.0 ? hi : lo) = q;
  }
  const double q = 0.5 * (lo + hi);
  return std::sqrt(U - q * q);
}

}  // namespace

TEST_CASE("radial potential: plateaus") {
  const auto pot = radial_potential(make(0.5, 0, 0, 0.3, 2.0));
  CHECK(std::abs(pot(-40.0) - pot(-60.0)) < 1e-8);
  CHECK(std::abs(pot(-60.0) - pot.v_minus) < 1e-8);
  CHECK(std::abs(pot(500.0) + 0.09) < 1e-3);

  // horizon limit with spin weight and rotation: -(omega - omega_0)^2
  const auto pot2 = radial_potential(make(0.5, 2, 2, cplx(0.4, 0.1), cplx(3.0, 0.5)));
  CHECK(std::abs(pot2(-80.0) - pot2.v_minus) < 1e-10 * std::abs(pot2.v_minus) + 1e-12);
  // measured decay rate toward the horizon matches the metadata
  const double rate = std::log(std::abs(pot2(-20.0) - pot2.v_minus) / std::abs(pot2(-30.0) - pot2.v_minus)) / 10.0;
  CHECK(rate == doctest::Approx(pot2.horizon_rate).epsilon(1e-2));
  // long-range tail: u (V - V_+inf) tends to a constant for s != 0
  const cplx c1 = 2000.0 * (pot2(2000.0) - pot2.v_plus), c2 = 4000.0 * (pot2(4000.0) - pot2.v_plus);
  CHECK(std::abs(c1 - c2) < 2e-2 * std::abs(c2));
}

TEST_CASE("radial potential: Schwarzschild reduction") {
  const cplx om(0.5, 0.2), lam(6.0, -0.3);
  const auto pot = radial_potential(make(0.0, 0, 0, om, lam));
  double worst = 0.0;
  for (double u : {-30.0, -5.0, -1.0, 0.0, 2.0, 10.0, 50.0, 200.0}) {
    const double r = schw_r(u);
    const cplx ref = -om * om + (1.0 - 2.0 / r) * (lam / (r * r) + 2.0 / (r * r * r));
    worst = std::max(worst, std::abs(pot(u) - ref));
    CHECK(std::abs(schwarzschild_scalar_potential(1.0, om, lam, u) - ref) < 1e-10);
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("horizon series solves the radial equation") {
  const auto pot = radial_potential(make(0.5, 2, 2, cplx(0.4, 0.1), cplx(3.0, 0.5)));
  const double edge = pot.horizon_series_edge;
  // this solution grows toward the horizon here, so integrate leftward from the edge
  auto [p0, d0] = pot.horizon_series(edge, false);
  const double t[] = {edge - 10.0, edge - 30.0};
  ode::Tolerances tol;
  tol.rel = 1e-12;
  tol.abs = 1e-300;
  const auto sol = ode::integrate_schrodinger([&](double u) { return pot(u); }, edge, p0, d0, t, tol);
  for (int j = 0; j < 2; ++j) {
    const auto [pe, de] = pot.horizon_series(t[j], false);
    CHECK(std::abs(sol.phi[j] - pe) < 1e-8 * std::abs(pe));
    CHECK(std::abs(sol.dphi[j] - de) < 1e-8 * std::abs(de));
  }
  // normalisation exp(-i k_- u) deep in the plateau
  const double u = -60.0;
  const auto [pa, da] = pot.horizon_series(u, false);
  const cplx plane = std::exp(cplx(0.0, -1.0) * pot.k_minus * u);
  CHECK(std::abs(pa / plane - 1.0) < 1e-8);
  CHECK(std::abs(da / pa + cplx(0.0, 1.0) * pot.k_minus) < 1e-8 * std::abs(pot.k_minus));
}

TEST_CASE("Jost solutions: free case") {
  const cplx om(0.6, 0.15);
  const auto grid = uniform_grid(-10.0, 10.0, 81);
  const auto pr = jost_solutions(free_potential(om), grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cplx ea = std::exp(cplx(0.0, -1.0) * om * grid[i]);
    const cplx eg = std::exp(cplx(0.0, 1.0) * om * grid[i]);
    worst = std::max({worst, std::abs(pr.acute[i] - ea) / std::abs(ea), std::abs(pr.grave[i] - eg) / std::abs(eg)});
  }
  CHECK(worst < 1e-8);
  CHECK(std::abs(pr.wronskian - 2.0 * cplx(0.0, 1.0) * om) < 1e-8);
  for (double u : {-3.0, 0.5}) {
    for (double v : {-1.0, 4.2}) {
      const cplx exact = std::exp(cplx(0.0, 1.0) * om * std::abs(u - v)) / (2.0 * cplx(0.0, 1.0) * om);
      CHECK(std::abs(greens_kernel(pr, u, v) - exact) < 1e-8);
    }
  }
}

TEST_CASE("Jost solutions: Wronskian invariance") {
  const auto grid = uniform_grid(-60.0, 60.0, 481);
  const auto pr = jost_solutions(make(0.5, 0, 0, cplx(0.4, 0.1), 2.0), grid);
  CHECK(pr.wronskian_drift < 1e-6);
  CHECK(pr.relative_wronskian > 1e-3);

  AngularProblem ap;
  ap.s = 2;
  ap.k = 2;
  ap.a_omega = 0.5 * cplx(0.5, 0.2);
  ap.l_max = 24;
  const cplx lam = angular_spectrum(ap).eigenvalues[0];
  const auto pr2 = jost_solutions(make(0.5, 2, 2, cplx(0.5, 0.2), lam), grid);
  CHECK(pr2.wronskian_drift < 1e-6);

  const auto pr3 = jost_solutions(make(0.5, 2, 2, cplx(0.5, -0.2), lam), grid);
  CHECK(pr3.lower_branch);
  CHECK(pr3.wronskian_drift < 1e-6);
}

TEST_CASE("Jost solutions: conjugation symmetry") {
  const auto grid = uniform_grid(-20.0, 20.0, 41);
  const cplx om(0.45, 0.12), lam(2.0, 0.3);
  const auto p = jost_solutions(make(0.5, 0, 0, om, lam), grid);
  const auto q = jost_solutions(make(0.5, 0, 0, std::conj(om), std::conj(lam)), grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    worst = std::max(worst, std::abs(q.acute[i] - std::conj(p.acute[i])) / std::abs(p.acute[i]));
    worst = std::max(worst, std::abs(q.grave[i] - std::conj(p.grave[i])) / std::abs(p.grave[i]));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("Green's kernel: symmetry and defect") {
  const double h = 0.005;
  const auto grid = uniform_grid(-10.0, 10.0, 4001);
  for (auto prob : {make(0.5, 0, 0, cplx(0.4, 0.1), 2.0), make(0.5, 2, 2, cplx(0.5, 0.2), cplx(2.3, -0.4))}) {
    const auto pr = jost_solutions(prob, grid);
    CHECK(std::abs(greens_kernel(pr, -2.0, 3.3) - greens_kernel(pr, 3.3, -2.0)) < 1e-12);
    std::vector<cplx> f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) f[i] = oracle::bump(grid[i], 0.0, 5.0);
    const auto F = apply_greens(pr, f);
    std::vector<cplx> d1, d2;
    oracle::fd_derivatives(F, h, d1, d2);
    const auto pot = radial_potential(prob);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 2; i + 2 < grid.size(); ++i) {
      num += std::norm(-d2[i] + pot(grid[i]) * F[i] + f[i]);
      den += std::norm(f[i]);
    }
    CHECK(std::sqrt(num / den) < 1e-4);
  }
}

TEST_CASE("mode scan: square-well control and near-mode error") {
  const double U = 1.0, L = 1.0;
  const double kappa = square_well_kappa(U, L);
  ScanRegion reg;
  reg.re_min = -0.25;
  reg.re_max = 0.25;
  reg.im_min = 0.1;
  reg.im_max = 1.0;
  reg.n_re = 6;
  reg.n_im = 10;
  const auto grid = uniform_grid(-3.0, 3.0, 61);
  const auto res = scan_wronskian([&](cplx om) { return square_well(om, U, L); }, reg, grid);
  int winding_hits = 0;
  for (const auto& h : res.hits) {
    if (h.winding == 0) continue;
    ++winding_hits;
    CHECK(std::abs(h.omega - cplx(0.0, kappa)) < 0.15);
  }
  CHECK(winding_hits == 1);

  // the well edges are jumps, so the integrator resolves the zero only to ~1e-8
  JostOptions loose;
  loose.wronskian_threshold = 1e-6;
  const auto pr = jost_solutions(square_well(cplx(0.0, kappa), U, L), grid, loose);
  CHECK(pr.relative_wronskian < 1e-6);
  CHECK_THROWS_AS(greens_kernel(pr, 0.0, 1.0), NearModeError);
}

TEST_CASE("mode stability scan: no upper half-plane zeros (coarse)") {
  ScanRegion reg;
  reg.n_re = 5;
  reg.n_im = 4;
  const auto res = mode_stability_scan(KerrParams(1.0, 0.5), 2, 2, reg, {0});
  CHECK(res.hits.empty());
  CHECK(res.omegas.size() == 20);

  // the horizon normalisation resonates at k_minus = -i kappa: a pole, not a mode
  const KerrParams g(1.0, 0.5);
  RadialProblem rp;
  rp.geometry = g;
  rp.s = 2;
  rp.k = 2;
  rp.omega = cplx(0.3, 0.2);
  rp.lambda = 2.0;
  const cplx resonance = rp.omega - radial_potential(rp).k_minus - cplx(0.0, surface_gravity(g));
  ScanRegion box;
  box.re_min = resonance.real() - 0.05;
  box.re_max = resonance.real() + 0.05;
  box.im_min = resonance.imag() - 0.05;
  box.im_max = resonance.imag() + 0.05;
  box.n_re = 2;
  box.n_im = 2;
  const auto near = mode_stability_scan(g, 2, 2, box, {0});
  CHECK(near.hits.empty());
  REQUIRE(near.poles.size() == 1);
  CHECK(near.poles[0].winding == -1);
}

TEST_CASE("radial validation") {
  CHECK_THROWS_AS(make(0.5, 1, 0.5, 0.3, 2.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(jost_solutions(free_potential(0.5), {1.0, 0.0}), std::invalid_argument);
}
