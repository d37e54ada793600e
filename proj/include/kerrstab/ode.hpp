/**
 * @file ode.hpp
 * @brief Adaptive integration of complex linear second-order ODEs with output at nodes.
 *
 * Thin wrapper over Boost.Odeint's Dormand-Prince 5(4) dense-output stepper.
 */
#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

namespace kerr::ode {

using cplx = std::complex<double>;

struct Tolerances {
  double rel = 1e-10;
  double abs = 1e-14;
  double max_step = 0.0;  // 0: unlimited
};

/// Values of a solution of phi'' = q(u) phi (optionally phi'' = q phi + p phi')
/// sampled at requested nodes.
struct NodalSolution {
  std::vector<double> u;
  std::vector<cplx> phi;
  std::vector<cplx> dphi;
};

using Coefficient = std::function<cplx(double)>;

/// Integrates phi'' = p(u) phi' + q(u) phi starting from (u0, phi0, dphi0).
/// `targets` must be sorted monotonically away from u0 (ascending if they lie
/// to the right, descending otherwise); u0 itself may appear. p may be empty.
NodalSolution integrate_linear(const Coefficient& q, const Coefficient& p, double u0, cplx phi0,
                               cplx dphi0, std::span<const double> targets,
                               const Tolerances& tol = {});

/// Convenience: phi'' = q phi.
inline NodalSolution integrate_schrodinger(const Coefficient& q, double u0, cplx phi0, cplx dphi0,
                                           std::span<const double> targets,
                                           const Tolerances& tol = {}) {
  return integrate_linear(q, {}, u0, phi0, dphi0, targets, tol);
}

/// Integrates a scalar complex first-order ODE y' = f(u, y) with output at
/// targets. Throws std::runtime_error with the bracketing interval if |y|
/// exceeds `blowup` (pole detection).
std::vector<cplx> integrate_scalar(const std::function<cplx(double, cplx)>& f, double u0, cplx y0,
                                   std::span<const double> targets, const Tolerances& tol = {},
                                   double blowup = 1e12);

}  // namespace kerr::ode
