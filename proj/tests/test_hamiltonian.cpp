#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "kerrstab/angular_spectral.hpp"
#include "kerrstab/hamiltonian.hpp"
#include "kerrstab/radial_ode.hpp"
#include "oracles.hpp"

using namespace kerr;

namespace {

StateLayout layout(double s, double k, double u_min, double u_max, int n_u, int n_angular) {
  StateLayout L;
  L.geometry = KerrParams(1.0, 0.5);
  L.s = s;
  L.k = k;
  L.u_min = u_min;
  L.u_max = u_max;
  L.n_u = n_u;
  L.n_angular = n_angular;
  return L;
}

double data_bump(double u) { return oracle::bump(u, 0.0, 4.0); }

}  // namespace

TEST_CASE("hamiltonian state: construction and round trip") {
  const auto L = layout(0, 0, -20, 20, 401, 4);
  const auto zero = to_hamiltonian_state([](double, double) { return cplx(0.0); },
                                         [](double, double) { return cplx(0.0); }, L);
  CHECK(zero.psi1.norm() == 0.0);
  CHECK(zero.psi2.norm() == 0.0);

  auto phi0 = [](double u, double th) { return cplx(data_bump(u) * (1.0 + 0.3 * std::cos(th))); };
  const auto st = to_hamiltonian_state(phi0, [](double, double) { return cplx(0.0); }, L);
  CHECK(st.psi2.norm() == 0.0);
  double worst = 0.0;
  for (int i = 0; i < L.n_u; i += 7)
    for (double th : {0.3, 1.1, 2.5}) worst = std::max(worst, std::abs(field_value(st, i, th) - phi0(L.u(i), th)));
  CHECK(worst < 1e-14);

  auto wide = [](double u, double) { return cplx(oracle::bump(u, 0.0, 25.0)); };
  CHECK_THROWS_AS(to_hamiltonian_state(wide, wide, L), SupportError);
}

TEST_CASE("hamiltonian: separated modes are eigenvectors") {
  // Psi = (X(u) v, omega X(u) v) with A_omega v = lambda v and X solving the radial equation
  for (double s : {0.0, 2.0}) {
    const auto L = layout(s, s, -12, 12, 2401, 9);
    const Hamiltonian H(L);
    const cplx om(0.42, 0.11);
    AngularProblem ap;
    ap.s = s;
    ap.k = s;
    ap.a_omega = 0.5 * om;
    ap.l_max = ap.l_min() + L.n_angular - 1;
    const auto spec = angular_spectrum(ap);
    RadialProblem rp;
    rp.geometry = L.geometry;
    rp.s = s;
    rp.k = s;
    rp.omega = om;
    rp.lambda = spec.eigenvalues[0];
    std::vector<double> grid(L.n_u);
    for (int i = 0; i < L.n_u; ++i) grid[i] = L.u(i);
    const auto pair = jost_solutions(rp, grid);

    auto mode = TwoComponentState::zero(L);
    const Eigen::VectorXcd v = spec.eigenvectors.col(0);
    for (int i = 0; i < L.n_u; ++i) mode.psi1.segment(i * L.n_angular, L.n_angular) = pair.acute[i] * v;
    mode.psi2 = om * mode.psi1;
    auto res = H.apply(mode) - om * mode;
    // the Dirichlet truncation only acts on the two outermost nodes
    for (int i : {0, 1, L.n_u - 2, L.n_u - 1}) {
      res.psi1.segment(i * L.n_angular, L.n_angular).setZero();
      res.psi2.segment(i * L.n_angular, L.n_angular).setZero();
    }
    for (int i : {0, 1, L.n_u - 2, L.n_u - 1}) {
      mode.psi1.segment(i * L.n_angular, L.n_angular).setZero();
      mode.psi2.segment(i * L.n_angular, L.n_angular).setZero();
    }
    CHECK(H.norm(res) / H.norm(mode) < 1e-5);
  }
}

TEST_CASE("hamiltonian: linearity, non-symmetry, defect bound") {
  const auto L = layout(2, 2, -20, 30, 501, 5);
  const Hamiltonian H(L);
  const auto a = random_smooth_state(L, -8, 8, 1), b = random_smooth_state(L, -8, 8, 2);
  const cplx al(0.3, -1.2), be(2.0, 0.5);
  const auto lhs = H.apply(al * a + be * b);
  const auto rhs = al * H.apply(a) + be * H.apply(b);
  CHECK(H.norm(lhs - rhs) < 1e-12 * H.norm(lhs));

  const cplx hab = H.inner(H.apply(a), b), ahb = H.inner(a, H.apply(b));
  CHECK(std::abs(hab - ahb) > 1e-3 * std::abs(hab));

  const double c = H.c_hat();
  CHECK(c > 0.0);
  CHECK(std::isfinite(c));
  for (const auto& st : {a, b}) CHECK(std::abs(H.inner(st, H.apply(st)).imag()) <= c * H.inner(st, st).real() * (1 + 1e-10));

  // refinement in u: < 10 % change on doubling
  const Hamiltonian fine(layout(2, 2, -20, 30, 1001, 5));
  CHECK(std::abs(fine.c_hat() - c) < 0.1 * c);
}

TEST_CASE("hamiltonian: dense spectrum respects c_hat and the spectral bound") {
  const auto L = layout(2, 2, -10, 15, 41, 3);
  const Hamiltonian H(L);
  const int N = L.size();
  Eigen::MatrixXcd Hd(2 * N, 2 * N);
  for (int j = 0; j < 2 * N; ++j) {
    auto e = TwoComponentState::zero(L);
    (j < N ? e.psi1 : e.psi2)[j % N] = 1.0;
    const auto He = H.apply(e);
    Hd.col(j).head(N) = He.psi1;
    Hd.col(j).tail(N) = He.psi2;
  }
  const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(Hd).eigenvalues();
  double max_im = 0.0, max_abs = 0.0;
  for (int j = 0; j < ev.size(); ++j) {
    max_im = std::max(max_im, std::abs(ev[j].imag()));
    max_abs = std::max(max_abs, std::abs(ev[j]));
  }
  CHECK(max_im <= H.c_hat() * (1 + 1e-8));
  CHECK(max_abs <= H.spectral_bound());
}

TEST_CASE("resolvent probe: bound, residual, conjugate symmetry") {
  const auto L = layout(2, 2, -20, 30, 501, 5);
  const Hamiltonian H(L);
  const double c = H.c_hat();
  std::vector<TwoComponentState> states;
  for (unsigned long long seed = 1; seed <= 3; ++seed) states.push_back(random_smooth_state(L, -8, 8, seed));
  const auto rep = resolvent_bound_probe(H, {cplx(0.4, 20 * c), cplx(-1.3, -20 * c), cplx(0.2, 2 * c)}, states);
  CHECK(rep.all_bounds_hold);
  CHECK(rep.max_residual < 1e-8);
  for (const auto& smp : rep.samples)
    if (std::abs(smp.omega.imag()) > 19 * c) CHECK(smp.norm_x <= smp.norm_psi / (19.0 * c));
  CHECK_THROWS_AS(resolvent_bound_probe(H, {cplx(0.3, 0.5 * c)}, states), std::invalid_argument);

  // s = 0: real coefficients, so R_{conj omega}(conj Psi) = conj(R_omega Psi)
  const auto L0 = layout(0, 1, -20, 30, 501, 4);
  const Hamiltonian H0(L0);
  auto psi = random_smooth_state(L0, -8, 8, 7);
  auto psic = psi;
  psic.psi1 = psi.psi1.conjugate();
  psic.psi2 = psi.psi2.conjugate();
  const cplx om(0.7, 3.0 * H0.c_hat());
  const auto X = H0.resolvent(om, psi), Xc = H0.resolvent(std::conj(om), psic);
  CHECK((Xc.psi1 - X.psi1.conjugate()).norm() < 1e-12 * X.psi1.norm());
  CHECK((Xc.psi2 - X.psi2.conjugate()).norm() < 1e-12 * X.psi2.norm());
}

TEST_CASE("scalar product choice: the plain Sobolev product loses the angular bound") {
  auto L = layout(0, 0, -20, 30, 251, 4);
  HamiltonianOptions sob;
  sob.product = ScalarProduct::Sobolev;
  const double e4 = Hamiltonian(L).c_hat(), s4 = Hamiltonian(L, sob).c_hat();
  L.n_angular = 10;
  const double e10 = Hamiltonian(L).c_hat(), s10 = Hamiltonian(L, sob).c_hat();
  CHECK(std::abs(e10 - e4) < 1e-6 * e4);
  CHECK(s10 > 1.5 * s4);
}
