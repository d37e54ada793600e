#include <algorithm>
#include <cmath>
#include <numbers>

#include "kerrstab/angular_spectral.hpp"
#include "kerrstab/ode.hpp"
#include "kerrstab/series.hpp"

namespace kerr {

namespace {

constexpr double kSeriesEdge = std::numbers::pi / 3.0;  // z = 1 - cos <= 1/2

cplx w_term(const AngularProblem& p, double theta) {
  const double st = std::sin(theta), ct = std::cos(theta);
  const cplx b = p.k - p.s * ct - p.a_omega * st * st;
  return b * b / (st * st);
}

// Regular solution at a pole as a Frobenius series in z = 1 -/+ cos(theta).
FrobeniusSeries pole_series(const AngularProblem& p, cplx lambda, bool left) {
  const Polynomial two_z_minus_z2{0.0, 2.0, -1.0};
  const Polynomial q2{-4.0, 4.0, -1.0};
  const Polynomial q1{-4.0, 6.0, -2.0};
  const double sgn = left ? 1.0 : -1.0;
  // left:  k - s + s z - aw (2z - z^2);  right: k + s - s z - aw (2z - z^2)
  const Polynomial b = Polynomial{p.k - sgn * p.s, sgn * p.s} - p.a_omega * two_z_minus_z2;
  const Polynomial q0 = b * b - lambda * two_z_minus_z2;
  const double nu = 0.5 * std::abs(left ? p.k - p.s : p.k + p.s);
  return FrobeniusSeries(q2, q1, q0, nu);
}

struct Sampled {
  std::vector<cplx> y, dy;
};

// Solution regular at theta = 0 (left) or pi (right) at ascending nodes.
Sampled regular_solution(const AngularProblem& p, cplx lambda, bool left,
                         const std::vector<double>& nodes) {
  const FrobeniusSeries series = pole_series(p, lambda, left);
  auto from_series = [&](double theta) -> std::pair<cplx, cplx> {
    if (left) {
      const double z = 2.0 * std::pow(std::sin(0.5 * theta), 2);
      auto [y, dz] = series.eval(z);
      return {y, dz * std::sin(theta)};
    }
    const double z = 2.0 * std::pow(std::cos(0.5 * theta), 2);
    auto [y, dz] = series.eval(z);
    return {y, -dz * std::sin(theta)};
  };

  Sampled out;
  out.y.resize(nodes.size());
  out.dy.resize(nodes.size());
  const double edge = left ? kSeriesEdge : std::numbers::pi - kSeriesEdge;
  std::vector<double> ode_nodes;
  std::vector<std::size_t> ode_idx;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const bool use_series = left ? nodes[i] <= edge : nodes[i] >= edge;
    if (use_series) {
      auto [y, dy] = from_series(nodes[i]);
      out.y[i] = y;
      out.dy[i] = dy;
    } else {
      ode_nodes.push_back(nodes[i]);
      ode_idx.push_back(i);
    }
  }
  if (!ode_nodes.empty()) {
    if (!left) {
      std::reverse(ode_nodes.begin(), ode_nodes.end());
      std::reverse(ode_idx.begin(), ode_idx.end());
    }
    auto [y0, dy0] = from_series(edge);
    const ode::Coefficient q = [&](double t) { return w_term(p, t) - lambda; };
    const ode::Coefficient pc = [](double t) { return cplx(-std::cos(t) / std::sin(t)); };
    ode::Tolerances tol;
    tol.rel = 1e-12;
    tol.abs = 1e-300;
    const auto sol = ode::integrate_linear(q, pc, edge, y0, dy0, ode_nodes, tol);
    for (std::size_t j = 0; j < ode_idx.size(); ++j) {
      out.y[ode_idx[j]] = sol.phi[j];
      out.dy[ode_idx[j]] = sol.dphi[j];
    }
  }
  return out;
}

}  // namespace

cplx AngularSLForm::potential(double theta) const {
  const double st = std::sin(theta);
  return w_term(problem, theta) - 0.25 - 0.25 / (st * st) - lambda;
}

std::pair<cplx, cplx> AngularSLForm::to_sl(double theta, cplx Y, cplx dY) {
  const double r = std::sqrt(std::sin(theta));
  const double half_cot = 0.5 * std::cos(theta) / std::sin(theta);
  return {r * Y, r * (dY + half_cot * Y)};
}

std::pair<cplx, cplx> AngularSLForm::from_sl(double theta, cplx phi, cplx dphi) {
  const double r = std::sqrt(std::sin(theta));
  const double half_cot = 0.5 * std::cos(theta) / std::sin(theta);
  const cplx Y = phi / r;
  return {Y, dphi / r - half_cot * Y};
}

AngularSLForm angular_sl_form(const AngularProblem& problem, cplx lambda) {
  problem.validate();
  return AngularSLForm{problem, lambda};
}

AngularGreen::AngularGreen(const AngularProblem& problem, cplx lambda,
                           std::vector<double> theta_grid)
    : grid_(std::move(theta_grid)) {
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    if (!(grid_[i] > 0.0 && grid_[i] < std::numbers::pi))
      throw std::domain_error("AngularGreen: grid must lie in (0, pi)");
    if (i > 0 && !(grid_[i] > grid_[i - 1]))
      throw std::invalid_argument("AngularGreen: grid must be strictly ascending");
  }
  const Sampled L = regular_solution(problem, lambda, true, grid_);
  const Sampled R = regular_solution(problem, lambda, false, grid_);
  yl_ = L.y;
  dyl_ = L.dy;
  yr_ = R.y;
  dyr_ = R.dy;

  const std::vector<double> mid{0.5 * std::numbers::pi};
  const Sampled Lm = regular_solution(problem, lambda, true, mid);
  const Sampled Rm = regular_solution(problem, lambda, false, mid);
  w_ = Lm.y[0] * Rm.dy[0] - Lm.dy[0] * Rm.y[0];
  const double scale = (std::abs(Lm.y[0]) + std::abs(Lm.dy[0])) * (std::abs(Rm.y[0]) + std::abs(Rm.dy[0]));
  if (!(std::abs(w_) > 1e-10 * scale))
    throw NearEigenvalueError("angular resolvent: lambda is (numerically) an eigenvalue", lambda);
}

cplx AngularGreen::kernel(std::size_t i, std::size_t j) const {
  const std::size_t lo = std::min(i, j), hi = std::max(i, j);
  return -yl_[lo] * yr_[hi] / w_;
}

std::vector<cplx> AngularGreen::apply(const std::vector<cplx>& f) const {
  const std::size_t n = grid_.size();
  if (f.size() != n) throw std::invalid_argument("AngularGreen::apply: size mismatch");
  std::vector<double> wt(n, 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double h = 0.5 * (grid_[j + 1] - grid_[j]);
    wt[j] += h;
    wt[j + 1] += h;
  }
  std::vector<cplx> g(n);
  for (std::size_t j = 0; j < n; ++j) g[j] = f[j] * std::sin(grid_[j]) * wt[j];

  std::vector<cplx> out(n);
  std::vector<cplx> suffix(n + 1, 0.0);
  for (std::size_t j = n; j-- > 0;) suffix[j] = suffix[j + 1] + yr_[j] * g[j];
  cplx prefix = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    prefix += yl_[i] * g[i];
    out[i] = -(yr_[i] * prefix + yl_[i] * suffix[i + 1]) / w_;
  }
  return out;
}

cplx angular_resolvent_kernel(const AngularProblem& problem, cplx lambda, double u,
                              double u_prime) {
  problem.validate();
  if (u == u_prime) {
    AngularGreen g(problem, lambda, {u});
    return g.kernel(0, 0);
  }
  AngularGreen g(problem, lambda, {std::min(u, u_prime), std::max(u, u_prime)});
  return g.kernel(0, 1);
}

}  // namespace kerr
