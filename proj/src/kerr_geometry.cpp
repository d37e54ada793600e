#include "kerrstab/kerr_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kerr {

KerrParams::KerrParams(double M, double a) : M_(M), a_(a) {
  if (!(M > 0.0) || !std::isfinite(M))
    throw std::invalid_argument("KerrParams: mass must be positive and finite");
  if (!(a >= 0.0) || !std::isfinite(a))
    throw std::invalid_argument("KerrParams: spin a must be >= 0 (fold sign into k)");
  if (!(M * M > a * a))
    throw std::invalid_argument("KerrParams: non-extremality M^2 > a^2 violated (M=" +
                                std::to_string(M) + ", a=" + std::to_string(a) + ")");
}

GeometryCache make_geometry_cache(const KerrParams& p) {
  const double M = p.M();
  const double root = std::sqrt(M * M - p.a() * p.a());
  const double r1 = M + root;
  // r_- = a^2 / r1 avoids cancellation for small a.
  const double rm = p.a() * p.a() / r1;
  const double d = r1 - rm;
  const double A = 2.0 * M * r1 / d;
  const double B = 2.0 * M * rm / d;
  // offset relative to the raw antiderivative r + A ln(r-r1) - B ln(r-r_-)
  return {r1, rm, -(A - B) * std::log(2.0 * M)};
}

double horizon_radius(const KerrParams& p) {
  return p.M() + std::sqrt(p.M() * p.M() - p.a() * p.a());
}

double delta(const KerrParams& p, double r) {
  return r * r - 2.0 * p.M() * r + p.a() * p.a();
}

double surface_gravity(const KerrParams& p) {
  const double r1 = horizon_radius(p);
  const double rm = p.a() * p.a() / r1;
  return (r1 - rm) / (2.0 * (r1 * r1 + p.a() * p.a()));
}

namespace {

struct Residues {
  double r1, d, A, B, twoM;
};

Residues residues(const KerrParams& p) {
  const double r1 = horizon_radius(p);
  const double rm = p.a() * p.a() / r1;
  const double d = r1 - rm;
  return {r1, d, 2.0 * p.M() * r1 / d, 2.0 * p.M() * rm / d, 2.0 * p.M()};
}

double u_of_x(const Residues& c, double x) {
  double u = c.r1 + x + c.A * std::log(x / c.twoM);
  if (c.B != 0.0) u -= c.B * std::log((x + c.d) / c.twoM);
  return u;
}

}  // namespace

double regge_wheeler_u_from_offset(const KerrParams& p, double x) {
  if (!(x > 0.0)) throw std::domain_error("regge_wheeler_u: r must exceed the horizon radius");
  return u_of_x(residues(p), x);
}

double regge_wheeler_u(const KerrParams& p, double r) {
  const Residues c = residues(p);
  if (!(r > c.r1)) throw std::domain_error("regge_wheeler_u: r must exceed the horizon radius");
  return u_of_x(c, r - c.r1);
}

namespace {

// Last inversion on this thread; ODE integrators query nearby points in sequence.
struct WarmStart {
  double M = 0.0, a = -1.0, u = 0.0, x = 0.0;
};
thread_local WarmStart warm;

// Newton in x from the previous solution; nullopt if it does not settle quickly.
bool warm_offset(const Residues& c, double a, double u, double& x_out) {
  double x = warm.x;
  const double r0 = c.r1 + x;
  x += (u - warm.u) * x * (x + c.d) / (r0 * r0 + a * a);
  for (int it = 0; it < 6; ++it) {
    if (!(x > 0.0) || !std::isfinite(x)) return false;
    const double r = c.r1 + x;
    const double step = (u_of_x(c, x) - u) * x * (x + c.d) / (r * r + a * a);
    const double xn = x - step;
    if (!(xn > 0.5 * x && xn < 2.0 * x)) return false;
    x = xn;
    if (std::abs(step) < 1e-15 * x) {
      x_out = x;
      return true;
    }
  }
  return false;
}

}  // namespace

double regge_wheeler_offset(const KerrParams& p, double u) {
  const Residues c = residues(p);
  if (warm.M == p.M() && warm.a == p.a() && std::abs(u - warm.u) < 1.0) {
    double x;
    if (warm_offset(c, p.a(), u, x)) {
      warm.u = u;
      warm.x = x;
      return x;
    }
  }
  // Solve in y = ln x; du/dy = x (r^2+a^2)/Delta = (r^2+a^2)/(x+d) > 0.
  auto f = [&](double y) { return u_of_x(c, std::exp(y)) - u; };
  auto df = [&](double y) {
    const double x = std::exp(y);
    const double r = c.r1 + x;
    return (r * r + p.a() * p.a()) / (x + c.d);
  };

  double y;
  if (u < c.r1 + 2.0 * c.twoM) {
    // near-horizon asymptotics: u ~ r1 + A ln(x/2M) - B ln(d/2M)
    y = std::log(c.twoM) + (u - c.r1 + c.B * std::log(c.d / c.twoM)) / c.A;
  } else {
    y = std::log(std::max(u - c.r1, 1e-300));
  }
  double lo = y - 1.0, hi = y + 1.0;
  while (f(lo) > 0.0) lo -= 2.0 * (hi - lo);
  while (f(hi) < 0.0) hi += 2.0 * (hi - lo);
  y = std::clamp(y, lo, hi);

  for (int it = 0; it < 200; ++it) {
    const double fy = f(y);
    if (fy > 0.0) hi = y; else lo = y;
    double step = fy / df(y);
    double yn = y - step;
    if (!(yn > lo && yn < hi)) {
      yn = 0.5 * (lo + hi);
      step = y - yn;
    }
    y = yn;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(y)) || hi - lo < 1e-15) break;
  }
  warm = {p.M(), p.a(), u, std::exp(y)};
  return warm.x;
}

double regge_wheeler_r(const KerrParams& p, double u) {
  return horizon_radius(p) + regge_wheeler_offset(p, u);
}

}  // namespace kerr
