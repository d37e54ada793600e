#include "kerrstab/ode.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>

namespace kerr::ode {

namespace odeint = boost::numeric::odeint;

namespace {

template <class State>
auto make_stepper(const Tolerances& tol) {
  using Stepper = odeint::runge_kutta_dopri5<State>;
  if (tol.max_step > 0.0)
    return odeint::make_dense_output(tol.abs, tol.rel, tol.max_step, Stepper());
  return odeint::make_dense_output(tol.abs, tol.rel, Stepper());
}

template <class State, class System, class Observer>
void run(System sys, State x0, double u0, std::span<const double> targets, const Tolerances& tol,
         Observer obs) {
  std::vector<double> times;
  times.reserve(targets.size() + 1);
  times.push_back(u0);
  const bool forward = targets.empty() || targets.back() >= u0;
  // targets at the start point are reported from the initial data
  std::size_t first = 0;
  while (first < targets.size() && targets[first] == u0) obs(x0, targets[first++]);
  targets = targets.subspan(first);
  for (double t : targets) {
    if ((forward && t < times.back()) || (!forward && t > times.back()))
      throw std::invalid_argument("ode: targets must be monotone away from the start point");
    times.push_back(t);
  }
  if (times.size() == 1) return;
  const double span = std::abs(times.back() - u0);
  double dt = std::max(1e-6, 1e-3 * span);
  if (tol.max_step > 0.0) dt = std::min(dt, tol.max_step);
  if (!forward) dt = -dt;
  std::size_t idx = 0;
  odeint::integrate_times(make_stepper<State>(tol), sys, x0, times.begin(), times.end(), dt,
                          [&](const State& x, double t) {
                            if (idx++ == 0) return;
                            obs(x, t);
                          });
}

}  // namespace

NodalSolution integrate_linear(const Coefficient& q, const Coefficient& p, double u0, cplx phi0,
                               cplx dphi0, std::span<const double> targets,
                               const Tolerances& tol) {
  using State = std::array<cplx, 2>;
  NodalSolution out;
  out.u.reserve(targets.size());
  out.phi.reserve(targets.size());
  out.dphi.reserve(targets.size());
  auto sys = [&](const State& x, State& dx, double u) {
    dx[0] = x[1];
    dx[1] = q(u) * x[0];
    if (p) dx[1] += p(u) * x[1];
  };
  run<State>(sys, State{phi0, dphi0}, u0, targets, tol, [&](const State& x, double u) {
    if (!std::isfinite(std::abs(x[0])) || !std::isfinite(std::abs(x[1])))
      throw std::runtime_error("ode: solution overflow near u = " + std::to_string(u));
    out.u.push_back(u);
    out.phi.push_back(x[0]);
    out.dphi.push_back(x[1]);
  });
  return out;
}

std::vector<cplx> integrate_scalar(const std::function<cplx(double, cplx)>& f, double u0, cplx y0,
                                   std::span<const double> targets, const Tolerances& tol,
                                   double blowup) {
  using State = std::array<cplx, 1>;
  std::vector<cplx> out;
  out.reserve(targets.size());
  double last_ok = u0;
  auto sys = [&](const State& x, State& dx, double u) {
    if (std::abs(x[0]) > blowup) {
      std::ostringstream msg;
      msg << "pole of the Riccati solution in (" << last_ok << ", " << u << ")";
      throw std::runtime_error(msg.str());
    }
    dx[0] = f(u, x[0]);
  };
  run<State>(sys, State{y0}, u0, targets, tol, [&](const State& x, double u) {
    if (!(std::abs(x[0]) <= blowup)) {
      std::ostringstream msg;
      msg << "pole of the Riccati solution in (" << last_ok << ", " << u << ")";
      throw std::runtime_error(msg.str());
    }
    last_ok = u;
    out.push_back(x[0]);
  });
  return out;
}

}  // namespace kerr::ode
