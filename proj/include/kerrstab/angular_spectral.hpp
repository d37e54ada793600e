/**
 * @file angular_spectral.hpp
 * @brief Spectral decomposition of the complex angular Teukolsky operator.
 *
 * The operator acting on functions of x = cos(theta) is
 *
 *   A = -d/dx (1-x^2) d/dx + (k - s x - a*omega (1-x^2))^2 / (1-x^2),
 *
 * which is discretised in the orthonormal basis of spin-weighted spherical
 * harmonics  f_n(x) ~ (1-x)^{|k-s|/2} (1+x)^{|k+s|/2} P_n^{(|k-s|,|k+s|)}(x).
 * Expanding the square gives A = A_0 - 2 a omega (k - s x) + (a omega)^2 (1-x^2),
 * so the a*omega dependence enters only through the Galerkin matrices of x
 * and x^2, which are tri- and penta-diagonal.
 */
#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kerr {

using cplx = std::complex<double>;

/// Spin weight, azimuthal index, spheroidicity and truncation of one angular problem.
struct AngularProblem {
  double s = 0.0;
  double k = 0.0;
  cplx a_omega{};
  double l_max = 16.0;

  /// Throws std::invalid_argument on bad (s, k) pairing or insufficient truncation.
  void validate() const;
  double l_min() const;
  int basis_size() const;
};

/// Orthonormal (w.r.t. dx on [-1,1]) spin-weighted basis and its Galerkin matrices.
class SpinWeightedBasis {
 public:
  SpinWeightedBasis(double s, double k, int size);

  int size() const { return size_; }
  double l_min() const { return l_min_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  /// All basis functions at x (|x| <= 1).
  Eigen::VectorXd values(double x) const;

  /// Eigenvalue of A_0 on f_n: l(l+1) - s^2 with l = l_min + n.
  double diagonal(int n) const;

  const Eigen::MatrixXd& x_matrix() const { return x_; }
  const Eigen::MatrixXd& x2_matrix() const { return x2_; }

  /// Coefficients c_n = int f(x) f_n(x) dx by Gauss-Legendre quadrature.
  Eigen::VectorXcd project(const std::function<cplx(double)>& f, int quad_points = 0) const;

  /// Synthesis sum_n c_n f_n(x).
  cplx evaluate(const Eigen::VectorXcd& coeffs, double x) const;

 private:
  double s_, k_;
  int size_;
  double l_min_, alpha_, beta_;
  std::vector<double> norm_;
  Eigen::MatrixXd x_, x2_;
};

/// Matrix of the angular operator in the spin-weighted basis (complex symmetric).
Eigen::MatrixXcd assemble_angular(const AngularProblem& problem);

struct ClusterOptions {
  int cluster0_size = 8;           // N of the leading invariant subspace
  double merge_fraction = 0.1;     // merge when gap < fraction * local mean gap
  double jordan_tolerance = 1e-6;  // smallest normalised singular value of a cluster's eigenbasis
};

class EigensolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Eigenpairs of the truncated operator grouped into spectral clusters.
struct AngularSpectrum {
  AngularProblem problem;
  Eigen::MatrixXcd matrix;
  std::vector<cplx> eigenvalues;      // sorted by real part, then imaginary part
  Eigen::MatrixXcd eigenvectors;      // columns match `eigenvalues`
  Eigen::MatrixXcd left_eigenvectors; // rows of V^{-1}
  std::vector<std::vector<int>> clusters;
  std::vector<bool> defective;        // per cluster: near-Jordan structure detected
  int resolved_eigenvalues = 0;       // leading count trusted under truncation
  int resolved_clusters = 0;          // clusters made only of resolved eigenvalues
  double cluster0_threshold = 0.0;    // Lambda_0
};

AngularSpectrum angular_spectrum(const AngularProblem& problem, const ClusterOptions& opts = {});

/// Finite-rank Riesz projector on the truncated basis.
struct SpectralProjector {
  int n = 0;
  Eigen::MatrixXcd action;
  int dim = 0;
  double norm = 0.0;  // operator 2-norm, a conditioning indicator
};

class ProjectorError : public std::runtime_error {
 public:
  ProjectorError(const std::string& what, double condition)
      : std::runtime_error(what), condition(condition) {}
  double condition;
};

/// Projector from (generalised) eigenvectors.
SpectralProjector projector(const AngularSpectrum& spectrum, int n);

/// Circle enclosing cluster n and no other eigenvalue: centre and radius.
std::pair<cplx, double> cluster_contour(const AngularSpectrum& spectrum, int n);

/// Cross-check path: trapezoidal quadrature of (1/2 pi i) \oint (lambda - A)^{-1} on the
/// cluster circle, refined until successive results agree to `tol`.
SpectralProjector projector_by_contour(const AngularSpectrum& spectrum, int n, double tol = 1e-13);

// ---------------------------------------------------------------------------
// Sturm-Liouville form and angular resolvent kernel

/// Liouville-transformed angular equation -phi'' + V(theta) phi = 0 with
/// phi = sqrt(sin theta) Y, so (A - lambda) Y = 0 <=> -phi'' + V phi = 0.
struct AngularSLForm {
  AngularProblem problem;
  cplx lambda;
  /// V(theta) = W(theta) - 1/4 - 1/(4 sin^2 theta) - lambda,
  /// W = (k - s cos theta - a omega sin^2 theta)^2 / sin^2 theta.
  cplx potential(double theta) const;
  /// Leading exponents: phi ~ theta^{1/2 + |k-s|/2} at 0, (pi-theta)^{1/2 + |k+s|/2} at pi.
  double exponent_left() const { return 0.5 + 0.5 * std::abs(problem.k - problem.s); }
  double exponent_right() const { return 0.5 + 0.5 * std::abs(problem.k + problem.s); }
  /// Transformation weights: phi = sqrt(sin) Y, phi' = sqrt(sin) (Y' + cot/2 Y).
  static std::pair<cplx, cplx> to_sl(double theta, cplx Y, cplx dY);
  static std::pair<cplx, cplx> from_sl(double theta, cplx phi, cplx dphi);
};

AngularSLForm angular_sl_form(const AngularProblem& problem, cplx lambda);

/// Solutions of (A - lambda) Y = 0 regular at theta = 0 (left) and theta = pi (right),
/// sampled on an ascending theta grid, with the resolvent kernel
///   s(theta, theta') = -Y_L(min) Y_R(max) / w,   w = sin(theta) (Y_L Y_R' - Y_L' Y_R),
/// which is the kernel of (A - lambda)^{-1} w.r.t. the measure sin(theta') dtheta'.
class AngularGreen {
 public:
  AngularGreen(const AngularProblem& problem, cplx lambda, std::vector<double> theta_grid);

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<cplx>& left() const { return yl_; }
  const std::vector<cplx>& right() const { return yr_; }
  const std::vector<cplx>& left_derivative() const { return dyl_; }
  const std::vector<cplx>& right_derivative() const { return dyr_; }
  cplx wronskian() const { return w_; }

  cplx kernel(std::size_t i, std::size_t j) const;

  /// (A - lambda)^{-1} f on the grid, f given at the nodes; trapezoidal rule
  /// in theta with the sin(theta) measure.
  std::vector<cplx> apply(const std::vector<cplx>& f) const;

 private:
  std::vector<double> grid_;
  std::vector<cplx> yl_, dyl_, yr_, dyr_;
  cplx w_;
};

class NearEigenvalueError : public std::runtime_error {
 public:
  NearEigenvalueError(const std::string& what, cplx lambda) : std::runtime_error(what), lambda(lambda) {}
  cplx lambda;
};

/// Point evaluation of the angular resolvent kernel.
cplx angular_resolvent_kernel(const AngularProblem& problem, cplx lambda, double u, double u_prime);

/// Lowest `count` eigenvalues for real a*omega from a conservative second-order
/// finite-difference scheme on a cell-centred grid in x = cos(theta), located by Sturm
/// bisection and Richardson-extrapolated from `cells` and 2 `cells` cells.
std::vector<double> angular_fd_eigenvalues(double s, double k, double a_omega, int cells, int count);

}  // namespace kerr
