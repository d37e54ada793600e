#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kerrstab/angular_spectral.hpp"
#include "kerrstab/ode.hpp"
#include "kerrstab/quadrature.hpp"
#include "oracles.hpp"

using namespace kerr;
using std::numbers::pi;

namespace {

AngularProblem make(double s, double k, cplx aw, double lmax) {
  AngularProblem p;
  p.s = s;
  p.k = k;
  p.a_omega = aw;
  p.l_max = lmax;
  return p;
}

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("problem validation") {
  CHECK_THROWS_AS(make(1.0, 0.5, 0.0, 20).validate(), std::invalid_argument);
  CHECK_THROWS_AS(make(2.0, 2.0, 0.0, 9).validate(), std::invalid_argument);
  CHECK_NOTHROW(make(0.5, 0.5, 0.0, 8.5).validate());
  CHECK(make(0.5, -1.5, 0.0, 20.5).basis_size() == 20);
}

TEST_CASE("spin-weighted basis is orthonormal") {
  for (auto [s, k] : {std::pair{0.0, 0.0}, {2.0, 2.0}, {1.0, -2.0}, {0.5, 0.5}}) {
    SpinWeightedBasis b(s, k, 20);
    const auto q = gauss_legendre(80);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(20, 20);
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      const auto f = b.values(q.nodes[i]);
      G += q.weights[i] * f * f.transpose();
    }
    CHECK((G - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("assembly: Legendre limit and band structure") {
  const auto A = assemble_angular(make(0, 0, 0.0, 12));
  const auto ref = oracle::legendre_collocation(40);
  for (int l = 0; l <= 12; ++l) {
    CHECK(std::abs(A(l, l) - ref[l]) < 1e-8);
    for (int j = 0; j <= 12; ++j)
      if (j != l) CHECK(std::abs(A(l, j)) == 0.0);
  }

  const auto B = assemble_angular(make(0, 0, 0.1, 12));
  bool band_ok = true, some_offdiag = false;
  for (int i = 0; i < B.rows(); ++i)
    for (int j = 0; j < B.cols(); ++j) {
      if (std::abs(i - j) > 2 && B(i, j) != cplx{}) band_ok = false;
      if (i != j && std::abs(B(i, j)) > 0) some_offdiag = true;
    }
  CHECK(band_ok);
  CHECK(some_offdiag);
  CHECK(max_abs(B - B.transpose()) < 1e-14);
}

TEST_CASE("assembly: s=2, k=2 matches the finite-difference oracle") {
  const auto spec = angular_spectrum(make(2, 2, 0.0, 30));
  const auto ref = oracle::fd_angular_extrapolated(2, 2, 0.0, 4000, 5);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(spec.eigenvalues[i] - ref[i]) < 1e-6);

  // the a*omega coupling against the oracle for real spheroidicity
  const auto spec2 = angular_spectrum(make(2, 2, 0.7, 30));
  const auto ref2 = oracle::fd_angular_extrapolated(2, 2, 0.7, 4000, 3);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(spec2.eigenvalues[i] - ref2[i]) < 1e-6);
}

TEST_CASE("spectrum: Legendre values, spin 1, half-integer spin") {
  const auto spec = angular_spectrum(make(0, 0, 0.0, 12));
  const double expected[] = {0, 2, 6, 12, 20};
  for (int i = 0; i < 5; ++i) CHECK(std::abs(spec.eigenvalues[i] - expected[i]) < 1e-8);
  CHECK(spec.resolved_eigenvalues == 6);

  const auto s1 = angular_spectrum(make(1, 1, 0.0, 20));
  CHECK(std::abs(s1.eigenvalues[0] - oracle::fd_angular_extrapolated(1, 1, 0.0, 4000, 1)[0]) < 1e-6);

  // half-integer spin: l(l+1) - s^2 at l = 1/2, 3/2, 5/2, and truncation stability off zero
  const auto half = angular_spectrum(make(0.5, 0.5, 0.0, 20.5));
  const double half_expected[] = {0.5, 3.5, 8.5};
  for (int i = 0; i < 3; ++i) CHECK(std::abs(half.eigenvalues[i] - half_expected[i]) < 1e-12);
  const auto h1 = angular_spectrum(make(0.5, 0.5, cplx(0.4, 0.1), 20.5));
  const auto h2 = angular_spectrum(make(0.5, 0.5, cplx(0.4, 0.1), 28.5));
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(h1.eigenvalues[i] - h2.eigenvalues[i]) < 1e-10);
    CHECK(std::abs(h1.eigenvalues[i] - half_expected[i]) > 1e-3);
  }
}

TEST_CASE("spectrum: Rayleigh perturbation for imaginary spheroidicity") {
  const cplx aw(0.0, 0.05);
  const auto spec = angular_spectrum(make(0, 0, aw, 24));
  const auto q = gauss_legendre(64);
  for (int l = 0; l < 4; ++l) {
    // <Y_l, aw^2 (1 - x^2) Y_l> with normalised Legendre Y_l; first-order term vanishes for k = s = 0
    double num = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      const double x = q.nodes[i];
      const double y = oracle::legendre(l, x);
      num += q.weights[i] * y * y * (1.0 - x * x);
    }
    const double norm = 2.0 / (2.0 * l + 1.0);
    const cplx predicted = double(l * (l + 1)) + aw * aw * num / norm;
    CHECK(std::abs(spec.eigenvalues[l] - predicted) < 10.0 * std::pow(std::abs(aw), 4));
  }
}

TEST_CASE("spectrum: adjoint symmetry and truncation convergence") {
  const cplx aw(0.3, 0.2);
  const auto A = assemble_angular(make(2, 2, aw, 30));
  const auto Abar = assemble_angular(make(2, 2, std::conj(aw), 30));
  CHECK(max_abs(A - A.adjoint()) > 1e-3);
  CHECK(max_abs(A.adjoint() - Abar) < 1e-14);

  const auto s30 = angular_spectrum(make(2, 2, aw, 30));
  const auto s38 = angular_spectrum(make(2, 2, aw, 38));
  for (int i = 0; i < s30.resolved_eigenvalues; ++i)
    CHECK(std::abs(s30.eigenvalues[i] - s38.eigenvalues[i]) < 1e-8);
}

TEST_CASE("clusters respect the dimension bounds") {
  const auto spec = angular_spectrum(make(2, 2, cplx(0.3, 0.2), 30));
  CHECK(spec.clusters[0].size() >= 8);
  for (std::size_t c = 1; c < spec.clusters.size(); ++c) CHECK(spec.clusters[c].size() <= 2);
  std::size_t total = 0;
  for (const auto& c : spec.clusters) total += c.size();
  CHECK(total == spec.eigenvalues.size());
  CHECK(spec.resolved_clusters >= 5);
}

TEST_CASE("projectors: rank-one Legendre projector") {
  ClusterOptions opts;
  opts.cluster0_size = 1;
  const auto spec = angular_spectrum(make(0, 0, 0.0, 12), opts);
  const auto Q1 = projector(spec, 1);
  CHECK(Q1.dim == 1);
  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(13, 13);
  expected(1, 1) = 1.0;
  CHECK(max_abs(Q1.action - expected) < 1e-12);
}

TEST_CASE("projectors: idempotence, orthogonality, completeness, contour cross-check") {
  const auto spec = angular_spectrum(make(2, 2, cplx(0.3, 0.2), 60));
  std::vector<SpectralProjector> Q;
  for (std::size_t n = 0; n < spec.clusters.size(); ++n) Q.push_back(projector(spec, int(n)));
  for (std::size_t n = 0; n < Q.size(); ++n) {
    CHECK(max_abs(Q[n].action * Q[n].action - Q[n].action) < 1e-8);
    for (std::size_t m = 0; m < Q.size(); ++m)
      if (m != n) CHECK(max_abs(Q[n].action * Q[m].action) < 1e-8);
  }

  SpinWeightedBasis basis(2, 2, spec.problem.basis_size());
  const auto v = basis.project([](double x) {
    const double th = std::acos(x);
    return cplx(std::exp(-std::pow(th - pi / 2, 2) / (2 * 0.3 * 0.3)));
  });
  Eigen::VectorXcd partial = Eigen::VectorXcd::Zero(v.size());
  for (int n = 0; n < spec.resolved_clusters; ++n) partial += Q[n].action * v;
  CHECK((partial - v).norm() / v.norm() < 1e-6);

  for (int n = 0; n < std::min(spec.resolved_clusters, 6); ++n) {
    const auto Qc = projector_by_contour(spec, n);
    CHECK(max_abs(Qc.action - Q[n].action) < 1e-6);
  }
}

TEST_CASE("SL form: realness and round trip") {
  const auto sl = angular_sl_form(make(0, 0, 0.0, 12), 2.0);
  for (double th : {0.3, 1.0, 2.0}) CHECK(sl.potential(th).imag() == 0.0);
  const auto sl2 = angular_sl_form(make(2, 1, 0.4, 20), 3.0);
  for (double th : {0.3, 1.0, 2.0}) CHECK(sl2.potential(th).imag() == 0.0);
  const auto sl3 = angular_sl_form(make(2, 1, cplx(0.4, 0.1), 20), 3.0);
  CHECK(std::abs(sl3.potential(1.0).imag()) > 0.0);

  // integrate -phi'' + V phi = 0 from Y = cos(theta) data, map back, compare
  const double h = 1e-2;
  std::vector<double> grid;
  for (double t = 0.1; t <= pi - 0.1 + 1e-12; t += h) grid.push_back(t);
  const auto [phi0, dphi0] = AngularSLForm::to_sl(0.1, std::cos(0.1), -std::sin(0.1));
  ode::Tolerances tol;
  tol.rel = 1e-12;
  tol.abs = 1e-15;
  const auto sol = ode::integrate_schrodinger([&](double t) { return sl.potential(t); }, 0.1, phi0,
                                              dphi0, grid, tol);
  std::vector<cplx> Y(grid.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Y[i] = AngularSLForm::from_sl(grid[i], sol.phi[i], sol.dphi[i]).first;
    worst = std::max(worst, std::abs(Y[i] - std::cos(grid[i])));
  }
  CHECK(worst < 1e-6);
  std::vector<cplx> d1, d2;
  oracle::fd_derivatives(Y, h, d1, d2);
  double res = 0.0;
  for (std::size_t i = 2; i + 2 < grid.size(); ++i) {
    const double t = grid[i];
    const cplx AY = -d2[i] - std::cos(t) / std::sin(t) * d1[i];
    res = std::max(res, std::abs(AY - 2.0 * Y[i]));
  }
  CHECK(res < 1e-6);
}

TEST_CASE("angular resolvent kernel: symmetry, residue, defect") {
  const auto p = make(0, 0, 0.0, 12);
  const cplx lam(1.0, 0.5);
  CHECK(std::abs(angular_resolvent_kernel(p, lam, 0.7, 2.1) - angular_resolvent_kernel(p, lam, 2.1, 0.7)) < 1e-10);

  // -(1/2 pi i) \oint s_lambda around lambda = 2 gives Y_1(u) Y_1(u')
  const double u = 0.8, up = 2.3;
  const int M = 64;
  cplx acc = 0.0;
  for (int j = 0; j < M; ++j) {
    const cplx e = std::polar(1.0, 2 * pi * j / M);
    acc += e * angular_resolvent_kernel(p, 2.0 + e, u, up);
  }
  acc *= -1.0 / double(M);  // -(1/2 pi i) * i r e dtheta summed, r = 1
  const double y1 = std::sqrt(1.5);
  CHECK(std::abs(acc - y1 * std::cos(u) * y1 * std::cos(up)) < 1e-5);

  // (A - lambda) applied to the kernel integral of a bump reproduces the bump
  const auto pk = make(2, 1, cplx(0.4, 0.2), 20);
  const cplx lam2(3.0, 1.0);
  const double h = std::numbers::pi / 4000;
  std::vector<double> grid;
  for (int i = 8; i <= 3992; ++i) grid.push_back(i * h);
  AngularGreen G(pk, lam2, grid);
  std::vector<cplx> f(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) f[i] = oracle::bump(grid[i], 1.5, 0.5);
  const auto F = G.apply(f);
  std::vector<cplx> d1, d2;
  oracle::fd_derivatives(F, h, d1, d2);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 2; i + 2 < grid.size(); ++i) {
    const double t = grid[i];
    if (t < 0.1 || t > pi - 0.1) continue;
    const double st = std::sin(t);
    const cplx b = pk.k - pk.s * std::cos(t) - pk.a_omega * st * st;
    const cplx AF = -d2[i] - std::cos(t) / st * d1[i] + b * b / (st * st) * F[i];
    num += std::norm(AF - lam2 * F[i] - f[i]);
    den += std::norm(f[i]);
  }
  CHECK(std::sqrt(num / den) < 1e-4);

  CHECK_THROWS_AS(angular_resolvent_kernel(p, 2.0, 0.5, 1.0), NearEigenvalueError);
}
