/**
 * @file radial_ode.hpp
 * @brief Radial Teukolsky equation in Sturm-Liouville form, Jost solutions and Green's kernel.
 *
 * With X = sqrt(r^2+a^2) R the radial equation R_omega X = -lambda X reads
 * -X'' + V(u) X = 0 on the whole u-axis, where
 *
 *   V = (d_u^2 sqrt(rho^2)) / sqrt(rho^2)
 *       + Delta/rho^4 [ B^2/Delta - 4 i s r omega + 4 k a omega + lambda ],
 *   B = -i omega rho^2 - i a k - (r - M) s,   rho^2 = r^2 + a^2.
 *
 * V tends to -k_-^2 at the horizon (exponentially in u) and to -omega^2 at
 * infinity (like 1/u for s != 0).
 */
#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kerrstab/kerr_geometry.hpp"
#include "kerrstab/ode.hpp"

namespace kerr {

using cplx = std::complex<double>;

struct RadialProblem {
  KerrParams geometry{1.0, 0.0};
  double s = 0.0;
  double k = 0.0;
  cplx omega{};
  cplx lambda{};

  void validate() const;
};

/// Pointwise potential with its asymptotic data. `horizon_series`, when set,
/// returns the exact horizon-normalised solution (value, d/du) at u; it is
/// used instead of WKB initialisation on the left.
struct RadialPotential {
  std::function<cplx(double)> evaluate;
  cplx v_minus{};        // limit u -> -infinity
  cplx v_plus{};         // limit u -> +infinity
  cplx k_minus{};        // v_minus = -k_minus^2, branch continuous in omega
  cplx k_plus{};         // v_plus = -k_plus^2
  double horizon_rate = 0.0;   // |V - v_minus| ~ exp(horizon_rate * u)
  double infinity_power = 0.0; // |V - v_plus| ~ u^{-infinity_power}
  std::function<std::pair<cplx, cplx>(double, bool)> horizon_series;
  double horizon_series_edge = -1e300;  // series valid for u <= edge

  cplx operator()(double u) const { return evaluate(u); }
};

RadialPotential radial_potential(const RadialProblem& problem);

/// Schwarzschild scalar potential -omega^2 + (1 - 2M/r)(lambda/r^2 + 2M/r^3) at r(u).
cplx schwarzschild_scalar_potential(double M, cplx omega, cplx lambda, double u);

/// Constant potential V = -omega^2, for which the Jost solutions are plane waves.
RadialPotential free_potential(cplx omega);

/// Which asymptotic branches the Jost solutions follow.
enum class JostBranch {
  Automatic,  // recessive (L^2) branches: incoming/outgoing for Im omega >= 0, flipped below
  Upper,      // e^{-i k_- u}, e^{+i k_+ u} regardless of Im omega
  Lower,      // e^{+i k_- u}, e^{-i k_+ u}
};

struct JostOptions {
  double u_match = 60.0;           // in units of M
  double match_stability = 1e-8;   // doubling criterion on the log-derivative at the grid end
  int max_doublings = 4;
  ode::Tolerances tol{1e-10, 1e-300, 0.0};
  JostBranch branch = JostBranch::Automatic;
  double wronskian_threshold = 1e-10;
};

/// Fundamental system sampled on an ascending grid:
/// acute ~ e^{-i k_- u} (u -> -inf), grave ~ e^{+i k_+ u} (u -> +inf) on the upper branch.
struct JostPair {
  std::vector<double> u;
  std::vector<cplx> acute, dacute, grave, dgrave;
  cplx wronskian{};          // acute grave' - acute' grave at the reference node
  double wronskian_drift = 0.0;
  double relative_wronskian = 0.0;  // |w| / ((|acute| + |acute'|)(|grave| + |grave'|)) at the reference node
  double u_left = 0.0, u_right = 0.0;
  cplx omega{}, lambda{};
  bool lower_branch = false;

  /// Solutions at an arbitrary point inside [u.front(), u.back()].
  std::pair<cplx, cplx> acute_at(double x) const;
  std::pair<cplx, cplx> grave_at(double x) const;

  std::function<cplx(double)> potential;
  ode::Tolerances tol;
  double wronskian_threshold = 1e-10;
};

class RadialIntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NearModeError : public std::runtime_error {
 public:
  NearModeError(const std::string& what, cplx omega, cplx lambda)
      : std::runtime_error(what), omega(omega), lambda(lambda) {}
  cplx omega, lambda;
};

JostPair jost_solutions(const RadialProblem& problem, const std::vector<double>& grid,
                        const JostOptions& opts = {});
JostPair jost_solutions(const RadialPotential& potential, const std::vector<double>& grid,
                        const JostOptions& opts = {}, cplx omega = {}, cplx lambda = {});

/// s(u,v) = acute(min) grave(max) / w. With this normalisation
/// (-d^2/du^2 + V) int s(u,v) f(v) dv = -f.
cplx greens_kernel(const JostPair& pair, double u, double v);

/// int s(u_i, v) f(v) dv on the pair's grid, fourth order on uniform grids.
std::vector<cplx> apply_greens(const JostPair& pair, const std::vector<cplx>& f);

/// One detected near-zero of the Wronskian.
struct ModeHit {
  cplx omega;
  double relative_wronskian;
  int winding;   // argument-principle winding of w around the grid cell
  int mode;      // angular eigenvalue index (or -1 for a synthetic family)
};

struct ScanRegion {
  double re_min = 0.1, re_max = 1.2;
  double im_min = 0.05, im_max = 0.5;
  int n_re = 40, n_im = 20;
};

struct ScanResult {
  std::vector<ModeHit> hits;   // positive winding or |w| below tolerance
  std::vector<ModeHit> poles;  // negative winding: poles of the horizon normalisation, not modes
  std::vector<cplx> omegas;
  std::vector<std::vector<cplx>> wronskians;      // per mode, normalised w on the grid
  std::vector<int> modes;
};

/// Scans w(omega) for a family of potentials; `family(omega)` returns the potential.
ScanResult scan_wronskian(const std::function<RadialPotential(cplx)>& family, const ScanRegion& region,
                          const std::vector<double>& grid, const JostOptions& opts = {},
                          double tolerance = 1e-6);

/// Mode-stability scan for the Teukolsky family: lambda(omega) is the angular eigenvalue
/// with index `mode` for each entry of `modes`.
ScanResult mode_stability_scan(const KerrParams& geometry, double s, double k, const ScanRegion& region,
                               const std::vector<int>& modes, double l_max = 24.0,
                               const JostOptions& opts = {}, double tolerance = 1e-6);

/// Uniform grid helper.
std::vector<double> uniform_grid(double a, double b, int n);

}  // namespace kerr
