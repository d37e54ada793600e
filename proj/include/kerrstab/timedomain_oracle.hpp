/**
 * @file timedomain_oracle.hpp
 * @brief Method-of-lines evolution of the fixed-k Teukolsky equation in (t, u, theta).
 *
 * With psi = sqrt(r^2+a^2) phi and x = cos(theta) the k-mode equation is
 *
 *   m psi_tt = psi_uu - V psi + (Delta/rho^4) L psi + B psi_t,
 *   L = d_x (1-x^2) d_x - (k - s x)^2 / (1-x^2),
 *
 * with V = (d_u^2 rho)/rho + beta^2/rho^4, beta = -iak - (r-M)s and
 * B = -2 beta/rho^2 - (Delta/rho^4)(4sr + 2isax + 2iak). The angular direction is
 * collocated at Gauss-Legendre nodes, writing phi = (1-x)^{|k-s|/2} (1+x)^{|k+s|/2} f
 * with f a polynomial, which builds regularity at both poles into the unknowns. The
 * u-direction uses fourth-order differences (one-sided at the ends), time stepping is
 * classical Runge-Kutta, and both ends carry a damping layer.
 */
#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "kerrstab/hamiltonian.hpp"
#include "kerrstab/kerr_geometry.hpp"

namespace kerr {

struct FDGrid {
  double u_min = -60.0, u_max = 80.0;
  int n_u = 1401;
  int n_theta = 10;
  double cfl_factor = 0.4;      // fraction of the measured explicit stability limit, at most 0.5
  double sponge_width = 10.0;   // damping layer at each end
  double sponge_strength = 2.0;

  double h() const { return (u_max - u_min) / (n_u - 1); }
  double u(int i) const { return u_min + i * h(); }
  void validate() const;
};

struct OracleMode {
  KerrParams geometry{1.0, 0.5};
  double s = 0.0;
  double k = 0.0;
  bool frozen_far = false;  // coefficients replaced by their u -> +infinity limits
};

struct OracleOptions {
  double growth_limit = 1e6;  // sup |psi| may not exceed this multiple of its initial value
  int threads = 1;
  int probe_iterations = 60;
};

class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// phi(t) at every u-node and collocation angle; phi(i, j) belongs to u[i], x[j].
struct FieldSnapshot {
  double t = 0.0;
  double s = 0.0, k = 0.0;
  std::vector<double> u;
  std::vector<double> x, weights;  // cos(theta) nodes ascending, Gauss-Legendre weights
  Eigen::MatrixXcd phi;

  /// phi at u[i] and an arbitrary angle, by polynomial interpolation of the regular factor.
  cplx value(int i, double theta) const;
};

struct OracleRun {
  std::vector<FieldSnapshot> snapshots;
  double dt = 0.0;
  double spectral_radius = 0.0;  // of the semi-discrete operator, by power iteration
  double stability_limit = 0.0;  // 2.8 / spectral_radius
  int steps = 0;
  std::vector<double> sentinel;  // sup |psi| inside the damping layers / initial sup, per snapshot
  double max_growth = 0.0;
};

/// Evolves phi0 = phi(0), phi1 = phi_t(0) to every requested time (ascending, >= 0).
/// Throws SupportError if the data reach the damping layers and InstabilityError on
/// growth beyond the configured limit.
OracleRun evolve_fd(const std::function<cplx(double, double)>& phi0,
                    const std::function<cplx(double, double)>& phi1, const std::vector<double>& times,
                    const FDGrid& grid, const OracleMode& mode, const OracleOptions& opts = {});

/// phi of a Hamiltonian state at the snapshot's u-nodes and angles; nodes off the state
/// grid are left at zero.
FieldSnapshot sample_state(const TwoComponentState& state, const FieldSnapshot& like);

/// ||a - b|| / ||b|| in L^2(du dx) over the u-nodes common to both grids.
double relative_l2_difference(const FieldSnapshot& a, const TwoComponentState& b);
double relative_l2_difference(const FieldSnapshot& a, const FieldSnapshot& b);

}  // namespace kerr
