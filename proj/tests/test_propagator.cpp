#include <cmath>

#include "doctest.h"
#include "kerrstab/propagator.hpp"

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

TwoComponentState conj(TwoComponentState st) {
  st.psi1 = st.psi1.conjugate();
  st.psi2 = st.psi2.conjugate();
  return st;
}

}  // namespace

TEST_CASE("contour evolution: identity at t = 0 and zero data") {
  for (double s : {0.0, 2.0}) {
    const auto L = layout(s, s, -20, 30, 251, 4);
    const Hamiltonian H(L);
    const auto psi0 = standard_bump_state(L);
    const auto ev = evolve_contour(H, psi0, {0.0});
    MESSAGE("s=" << s << " err " << H.norm(ev.states[0] - psi0) / H.norm(psi0) << " est " << ev.error_estimate[0]
                 << " solves " << ev.resolvent_solves << " omega_max " << ev.omega_max);
    CHECK(H.norm(ev.states[0] - psi0) < 1e-4 * H.norm(psi0));
    CHECK(ev.error_estimate[0] < 1e-6);
  }
  const auto L = layout(0, 0, -20, 30, 251, 4);
  const Hamiltonian H(L);
  const auto ev = evolve_contour(H, TwoComponentState::zero(L), {0.0, 3.0});
  for (const auto& st : ev.states) CHECK(st.psi1.norm() + st.psi2.norm() == 0.0);
}

TEST_CASE("contour evolution: group property, time reflection, linearity") {
  const auto L = layout(2, 2, -20, 30, 251, 4);
  const Hamiltonian H(L);
  const auto psi0 = standard_bump_state(L);
  const auto a = evolve_contour(H, psi0, {1.5, 3.5});
  const auto b = evolve_contour(H, a.states[0], {2.0});
  CHECK(H.norm(b.states[0] - a.states[1]) < 1e-3 * H.norm(a.states[1]));

  // s = 0: conjugated data evolved backward give the conjugated forward evolution
  const auto L0 = layout(0, 1, -20, 30, 251, 4);
  const Hamiltonian H0(L0);
  const auto st = random_smooth_state(L0, -6, 6, 11);
  const auto fwd = evolve_contour(H0, st, {4.0});
  const auto bwd = evolve_contour(H0, conj(st), {-4.0});
  CHECK(H0.norm(bwd.states[0] - conj(fwd.states[0])) < 1e-6 * H0.norm(fwd.states[0]));

  const auto st2 = random_smooth_state(L0, -6, 6, 12);
  const cplx al(0.7, -0.2);
  const auto sum = evolve_contour(H0, st + al * st2, {4.0});
  const auto e2 = evolve_contour(H0, st2, {4.0});
  CHECK(H0.norm(sum.states[0] - fwd.states[0] - al * e2.states[0]) < 1e-10 * H0.norm(sum.states[0]));
}

TEST_CASE("separated evolution agrees with the contour evolution at t = 5") {
  const auto L = layout(0, 0, -15, 15, 301, 9);
  const Hamiltonian H(L);
  const auto psi0 = standard_bump_state(L);
  const auto ce = evolve_contour(H, psi0, {5.0});
  const auto se = evolve_separated(H, psi0, {5.0});
  const double rel = H.norm(se.states[0] - ce.states[0]) / H.norm(ce.states[0]);
  MESSAGE("relative difference " << rel << " omega_max " << se.omega_max << " tail " << se.tail_estimate[0]
                                 << " spread " << se.epsilon_spread[0] << " far " << se.far_branch[0]);
  CHECK(rel < 1e-2);
  CHECK(se.far_branch[0] < 1e-4);
  CHECK(se.tail_estimate[0] < 1e-4);
}

TEST_CASE("separated evolution: data in one angular cluster stay there") {
  auto L = layout(0, 0, -15, 15, 151, 9);
  L.geometry = KerrParams(1.0, 0.1);
  const Hamiltonian H(L);
  const SpinWeightedBasis basis(0, 0, L.n_angular);
  const auto psi0 = to_hamiltonian_state(
      [&](double u, double th) { return cplx(std::exp(-u * u / 4.5) * basis.values(std::cos(th))[1]); },
      [](double, double) { return cplx(0.0); }, L);
  const auto se = evolve_separated(H, psi0, {3.0});
  const double total = H.norm(se.states[0]);
  REQUIRE(se.ledger.size() == static_cast<std::size_t>(L.n_angular));
  for (const auto& e : se.ledger) {
    MESSAGE("cluster " << e.cluster << " final " << e.final_norm / total << " l1 " << e.integrand_l1);
    if (e.cluster != 1) CHECK(e.final_norm < 1e-3 * total);
  }
  CHECK(se.ledger[1].final_norm > 0.99 * total);
}

TEST_CASE("separated evolution: ledger decays for smooth data, zero data, near-mode failure") {
  const auto L = layout(2, 2, -15, 15, 151, 9);
  const Hamiltonian H(L);
  const SpinWeightedBasis basis(2, 2, L.n_angular);
  auto profile = [&](double u, double th) {
    const Eigen::VectorXd f = basis.values(std::cos(th));
    double sum = 0.0;
    for (int n = 0; n < f.size(); ++n) sum += std::pow(0.25, n) * f[n];
    return cplx(std::exp(-u * u / 4.5) * sum);
  };
  const auto psi0 = to_hamiltonian_state(profile, [](double, double) { return cplx(0.0); }, L);
  const auto se = evolve_separated(H, psi0, {3.0});
  for (std::size_t n = 1; n < se.ledger.size(); ++n) {
    MESSAGE("cluster " << n << " l1 " << se.ledger[n].integrand_l1 << " partial change " << se.partial_sum_change[n]
                       << " rate " << se.ledger[n].integrand_l1 / se.ledger[n - 1].integrand_l1);
    CHECK(se.ledger[n].integrand_l1 < se.ledger[n - 1].integrand_l1);
    if (n > 1) CHECK(se.partial_sum_change[n] < se.partial_sum_change[n - 1]);
  }

  const auto zero = evolve_separated(H, TwoComponentState::zero(L), {1.0, 2.0});
  for (const auto& st : zero.states) CHECK(st.psi1.norm() + st.psi2.norm() == 0.0);

  SeparatedOptions opts;
  opts.jost.wronskian_threshold = 1e300;
  CHECK_THROWS_AS(evolve_separated(H, psi0, {1.0}, {}, opts), NearModeError);
}

TEST_CASE("decay experiment: Schwarzschild profile against the time-domain oracle, zero data") {
  auto L = layout(0, 0, -15, 15, 151, 9);
  L.geometry = KerrParams(1.0, 0.0);
  const Hamiltonian H(L);
  const std::vector<double> schedule{0, 10, 20, 30, 40, 50};
  const auto d = decay_experiment(H, standard_bump_state(L), schedule, Region{});
  const SpinWeightedBasis basis(0, 0, L.n_angular);
  FDGrid g;
  g.u_min = -75;
  g.u_max = 75;
  g.n_u = 751;
  g.n_theta = 8;
  const auto run = evolve_fd([&](double u, double th) { return cplx(std::exp(-u * u / 4.5) * basis.values(std::cos(th))[0]); },
                             [](double, double) { return cplx(0.0); }, schedule, g, OracleMode{L.geometry, 0, 0, false});
  for (std::size_t n = 0; n < schedule.size(); ++n) {
    const double fd = sup_abs_phi(run.snapshots[n], Region{});
    MESSAGE("t " << schedule[n] << " separated " << d.sup_abs_phi[n] << " oracle " << fd);
    CHECK(std::abs(d.sup_abs_phi[n] - fd) < 2e-2 * fd);
    CHECK(run.sentinel[n] < 1e-3);
  }
  CHECK(d.initial_sup == doctest::Approx(d.sup_abs_phi[0]).epsilon(1e-3));
  CHECK(decreasing_from(d) >= 0);

  const auto z = decay_experiment(H, TwoComponentState::zero(L), schedule, Region{});
  CHECK(z.initial_sup == 0.0);
  for (double v : z.sup_abs_phi) CHECK(v == 0.0);
}
