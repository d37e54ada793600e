/**
 * @file kerr_geometry.hpp
 * @brief Kerr background: horizon, Delta, and the Regge-Wheeler coordinate.
 */
#pragma once

#include <stdexcept>

namespace kerr {

/// Mass and specific angular momentum of a non-extreme Kerr black hole.
///
/// Construction enforces M > 0, a >= 0 and M^2 > a^2. Negative spin is
/// represented by flipping the sign of the azimuthal index instead.
class KerrParams {
 public:
  KerrParams(double M, double a);

  double M() const { return M_; }
  double a() const { return a_; }

 private:
  double M_;
  double a_;
};

/// Derived radii and the additive constant of the tortoise coordinate.
struct GeometryCache {
  double r1;       // event horizon
  double r_minus;  // inner root of Delta
  double u_offset;
};

GeometryCache make_geometry_cache(const KerrParams& p);

double horizon_radius(const KerrParams& p);

/// Delta(r) = r^2 - 2Mr + a^2.
double delta(const KerrParams& p, double r);

/// Tortoise coordinate with du/dr = (r^2+a^2)/Delta.
///
/// Gauge: u = r + A ln((r-r1)/2M) - B ln((r-r_-)/2M) with A, B the partial
/// fraction residues, which reduces to r + 2M ln(r/2M - 1) at a = 0.
/// Throws std::domain_error for r <= r1.
double regge_wheeler_u(const KerrParams& p, double r);

/// Same as regge_wheeler_u but parametrised by x = r - r1 > 0, which keeps
/// full relative precision arbitrarily close to the horizon.
double regge_wheeler_u_from_offset(const KerrParams& p, double x);

/// Inverse map, returning x = r(u) - r1. Relative accuracy ~1e-13 in x.
double regge_wheeler_offset(const KerrParams& p, double u);

/// Inverse map r(u).
double regge_wheeler_r(const KerrParams& p, double u);

/// Surface gravity (r1 - r_-) / (2 (r1^2 + a^2)); r - r1 ~ exp(2 kappa u) near the horizon.
double surface_gravity(const KerrParams& p);

}  // namespace kerr
