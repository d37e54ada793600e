/**
 * @file hamiltonian.hpp
 * @brief First-order-in-time form of the fixed-k Teukolsky equation on a (u, angular) grid.
 *
 * With psi = sqrt(r^2+a^2) phi the k-mode equation reads
 *
 *   m psi_tt = -T0 psi - i T1 psi_t,
 *   T0 = -d_u^2 + c + beta^2/rho^4 + (Delta/rho^4) A0,
 *   T1 = (-2ak + 2i(r-M)s)/rho^2 + (Delta/rho^4)(-4isr + 2ka + 2as x),
 *   m  = 1 - (a^2 Delta/rho^4) sin^2(theta),
 *
 * where rho^2 = r^2+a^2, beta = -iak - (r-M)s, c = (d_u^2 sqrt(rho^2))/sqrt(rho^2) and
 * A0 is the angular operator at a*omega = 0. For Psi = (psi, i psi_t) this is
 * i Psi_t = H Psi with H = [[0, 1], [m^{-1} T0, m^{-1} T1]], and the frequency-domain
 * operator is T(omega) = T0 + omega T1 - omega^2 m, which equals Delta/rho^4 times the
 * sum of the radial and angular Teukolsky operators.
 *
 * u-derivatives use the five-point fourth-order stencil on a uniform grid with zero
 * extension beyond the ends; the angular direction is the spin-weighted Galerkin basis
 * of angular_spectral, in which x and x^2 act through their Galerkin matrices.
 */
#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kerrstab/angular_spectral.hpp"
#include "kerrstab/kerr_geometry.hpp"

namespace kerr {

using cplx = std::complex<double>;

/// Uniform u-grid times a truncated spin-weighted basis.
struct StateLayout {
  KerrParams geometry{1.0, 0.5};
  double s = 0.0;
  double k = 0.0;
  double u_min = -40.0, u_max = 60.0;
  int n_u = 1001;
  int n_angular = 6;

  double h() const { return (u_max - u_min) / (n_u - 1); }
  double u(int i) const { return u_min + i * h(); }
  int size() const { return n_u * n_angular; }
  void validate() const;
};

/// Psi = sqrt(r^2+a^2) (phi, i phi_t); entry i * n_angular + n holds basis coefficient n at u_i.
struct TwoComponentState {
  StateLayout layout;
  Eigen::VectorXcd psi1, psi2;

  static TwoComponentState zero(const StateLayout& layout);
  TwoComponentState& operator+=(const TwoComponentState& o);
  TwoComponentState& operator*=(cplx z);
};

TwoComponentState operator+(TwoComponentState a, const TwoComponentState& b);
TwoComponentState operator-(TwoComponentState a, const TwoComponentState& b);
TwoComponentState operator*(cplx z, TwoComponentState a);

class SupportError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Samples phi0 = phi(t=0) and phi1 = d_t phi(t=0), given as functions of (u, theta),
/// projects them on the angular basis and applies the sqrt(r^2+a^2) weight.
/// Throws SupportError if the data reach the four outermost nodes at either end.
TwoComponentState to_hamiltonian_state(const std::function<cplx(double, double)>& phi0,
                                       const std::function<cplx(double, double)>& phi1,
                                       const StateLayout& layout);

/// phi = psi1 / sqrt(r^2+a^2) at node i and angle theta.
cplx field_value(const TwoComponentState& state, int i, double theta);
/// Coefficients of phi (first component without the weight) at node i.
Eigen::VectorXcd field_coefficients(const TwoComponentState& state, int i);

enum class ScalarProduct {
  Energy,   // <psi1, E psi1> + <psi2, m psi2>, E = -d_u^2 + (Delta/rho^4) A0 + w
  Sobolev,  // <d_u psi1, d_u psi1> + w <psi1, psi1> + <psi2, psi2>
};

struct HamiltonianOptions {
  ScalarProduct product = ScalarProduct::Energy;
  double weight = 1.0;  // w
};

class ResolventError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Result of the self-adjointness defect measurement.
struct DefectEstimate {
  double c_hat = 0.0;   // sup |Im <Psi, H Psi>| / <Psi, Psi>
  int iterations = 0;
  double change = 0.0;  // last change of the Lanczos estimate
};

class Hamiltonian {
 public:
  explicit Hamiltonian(const StateLayout& layout, const HamiltonianOptions& opts = {});

  const StateLayout& layout() const { return layout_; }
  const HamiltonianOptions& options() const { return opts_; }

  TwoComponentState apply(const TwoComponentState& psi) const;
  /// (H + shift)^p psi.
  TwoComponentState shifted_power(const TwoComponentState& psi, cplx shift, int p) const;
  /// (H - omega)^{-1} rhs by a banded LU solve of T(omega).
  TwoComponentState resolvent(cplx omega, const TwoComponentState& rhs) const;

  /// (H - omega) X = Psi reduces to T(omega) X1 = m Psi2 - T1 Psi1 + omega m Psi1, X2 = Psi1 + omega X1.
  Eigen::VectorXcd reduced_rhs(cplx omega, const TwoComponentState& psi) const;
  TwoComponentState from_reduced(cplx omega, const TwoComponentState& psi, const Eigen::VectorXcd& x1) const;

  cplx inner(const TwoComponentState& a, const TwoComponentState& b) const;
  double norm(const TwoComponentState& a) const;

  /// Measured bound for |Im <Psi, H Psi>| / |Psi|^2 (Lanczos on the generalized
  /// Hermitian pencil); cached after the first call.
  DefectEstimate defect() const;
  double c_hat() const { return defect().c_hat; }

  /// Every eigenvalue of the discretized H satisfies |omega| <= spectral_bound().
  double spectral_bound() const;

  // Coefficient blocks at node i (n_angular x n_angular).
  const Eigen::MatrixXcd& t1_block(int i) const { return t1_[i]; }
  const Eigen::MatrixXd& m_block(int i) const { return m_[i]; }
  cplx scalar_potential(int i) const { return q_[i]; }     // c + beta^2/rho^4
  double angular_factor(int i) const { return dr4_[i]; }   // Delta/rho^4
  double weight_at(int i) const { return sqrt_rho2_[i]; }  // sqrt(r^2+a^2)

 private:
  Eigen::VectorXcd second_derivative(const Eigen::VectorXcd& v) const;
  Eigen::VectorXcd apply_t0(const Eigen::VectorXcd& v) const;
  Eigen::VectorXcd apply_blocks(const std::vector<Eigen::MatrixXcd>& b, const Eigen::VectorXcd& v) const;
  Eigen::VectorXcd apply_m(const Eigen::VectorXcd& v) const;
  Eigen::VectorXcd apply_m_inverse(const Eigen::VectorXcd& v) const;
  Eigen::VectorXcd apply_e(const Eigen::VectorXcd& v) const;    // E of the scalar product
  Eigen::VectorXcd solve_e(const Eigen::VectorXcd& v) const;
  Eigen::VectorXcd apply_g2(const Eigen::VectorXcd& v) const;   // second-component Gram block
  Eigen::VectorXcd solve_g2(const Eigen::VectorXcd& v) const;

  StateLayout layout_;
  HamiltonianOptions opts_;
  int na_ = 0, nu_ = 0;
  std::vector<double> sqrt_rho2_, dr4_;
  std::vector<cplx> q_;
  Eigen::VectorXd a0_;  // diagonal of A0
  std::vector<Eigen::MatrixXcd> t1_;
  std::vector<Eigen::MatrixXd> m_, m_inv_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> m_llt_;
  std::vector<std::vector<double>> e_factor_;  // banded Cholesky of E, one per angular index
  mutable std::shared_ptr<DefectEstimate> defect_;
};

/// One sample of the resolvent-bound probe.
struct ResolventSample {
  cplx omega;
  int state = 0;
  double norm_x = 0.0, norm_psi = 0.0;
  double bound = 0.0;      // |Psi| / (|Im omega| - c_hat)
  double residual = 0.0;   // |(H - omega) X - Psi| / |Psi|
  bool bound_holds = false;
};

struct ResolventReport {
  double c_hat = 0.0;
  std::vector<ResolventSample> samples;
  bool all_bounds_hold = true;
  double max_residual = 0.0;
};

/// Solves (H - omega) X = Psi for every pair and checks |X| <= |Psi| / (|Im omega| - c_hat)
/// together with the residual identity. Requires |Im omega| > c_hat.
ResolventReport resolvent_bound_probe(const Hamiltonian& H, const std::vector<cplx>& omegas,
                                      const std::vector<TwoComponentState>& states);

/// Smooth random state supported in [u_lo, u_hi] (both components, low angular indices).
TwoComponentState random_smooth_state(const StateLayout& layout, double u_lo, double u_hi,
                                      unsigned long long seed);

}  // namespace kerr
