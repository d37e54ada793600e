/**
 * @file propagator.hpp
 * @brief Time evolution of Cauchy data through contour integrals of the resolvent.
 *
 * For t >= 0 the solution of i Psi_t = H Psi is
 *
 *   Psi(t) = -1/(2 pi i) oint e^{-i omega t} (omega - 3ic)^{-p} R_omega (H - 3ic)^p Psi0 d omega,
 *
 * the contour running counter-clockwise around the strip |Im omega| <= 2c. For t < 0 the
 * factor uses +3ic instead. evolve_contour closes the two lines beyond a bound on every
 * eigenvalue of the discretized H; evolve_separated moves the upper line onto the real axis
 * and assembles R_omega from angular eigenvectors and radial Green's kernels.
 */
#pragma once

#include <string>
#include <vector>

#include "kerrstab/angular_spectral.hpp"
#include "kerrstab/hamiltonian.hpp"
#include "kerrstab/radial_ode.hpp"
#include "kerrstab/timedomain_oracle.hpp"

namespace kerr {

/// Composite Gauss-Legendre quadrature along the rectangle with corners +-omega_max +- 2ic.
struct ContourSpec {
  double panel_width = 0.5;
  int nodes = 16;
  double omega_max = 0.0;  // 0: 1.05 * spectral_bound + 1
};

struct HamiltonianConfig {
  double c = 0.0;  // 0: 1.25 * c_hat
  int p = 2;
  ContourSpec contour;

  void validate() const;
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ContourEvolution {
  std::vector<double> times;
  std::vector<TwoComponentState> states;
  std::vector<double> error_estimate;  // relative change against panels of twice the width
  std::vector<double> closure;         // relative size of the two vertical segments
  double c = 0.0, c_hat = 0.0, omega_max = 0.0;
  int p = 2;
  int resolvent_solves = 0;
};

ContourEvolution evolve_contour(const Hamiltonian& H, const TwoComponentState& psi0,
                                const std::vector<double>& times, const HamiltonianConfig& config = {});

struct SeparatedOptions {
  int n_max = -1;  // last cluster kept; -1 keeps every cluster of the truncated basis
  std::vector<double> epsilons{1e-2, 5e-3, 2.5e-3};
  double omega_max = 0.0;       // 0: from the tail envelope, capped at omega_cap
  double omega_cap = 20.0;
  int tail_terms = 3;           // terms of the large-|omega| expansion integrated beyond omega_max
  double tail_tolerance = 1e-4;
  double inner_width = 0.1;     // panel width for |Re omega| < inner_edge
  double outer_width = 0.25;
  double inner_edge = 2.0;
  int nodes = 12;
  int grading_levels = 6;       // geometric refinement towards branch points on the axis
  double far_factor = 8.0;      // discarded line at Im omega = -far_factor * c
  double component_cutoff = 1e-12;
  double greens_resolution = 0.25;  // Green's integrals sampled with spacing * |omega| below this
  ClusterOptions clusters{1, 0.1, 1e-6};
  int threads = 1;              // frequency nodes of one panel evaluated concurrently
  JostOptions jost{60.0, 1e-6, 4, ode::Tolerances{1e-9, 1e-300, 0.0}, JostBranch::Automatic, 1e-10};
};

struct ModeLedgerEntry {
  int cluster = 0;
  bool resolved = false;
  double integrand_l1 = 0.0;  // (1/2pi) int |F_n(omega)| d omega, bounds the contribution at every t
  double final_norm = 0.0;    // norm of the contribution at the last requested time
};

struct SeparatedEvolution {
  std::vector<double> times;
  std::vector<TwoComponentState> states;
  std::vector<ModeLedgerEntry> ledger;
  std::vector<double> partial_sum_change;  // |sum_{n<=m} - sum_{n<=m-1}| / |total| at the last time
  std::vector<double> epsilon_spread;      // |extrapolated - finest level| / |result| per time
                                           // (extrapolation only for |Re omega| <= inner_edge)
  std::vector<double> tail_estimate;       // envelope of the remainder beyond omega_max, relative
  std::vector<double> tail_change;         // change between cut-offs 0.8 omega_max and omega_max
  std::vector<double> far_branch;          // relative size of the discarded lower line
  double c = 0.0, omega_max = 0.0;
  int p = 2;
  int frequency_nodes = 0, radial_solves = 0;
};

/// R_omega rhs assembled from angular eigenvectors and radial Green's kernels, split by cluster.
struct SeparatedResolvent {
  std::vector<TwoComponentState> clusters;  // R_omega Q_n rhs for n = 0..n_max
  int resolved_clusters = 0;
  int radial_solves = 0;
};

SeparatedResolvent separated_resolvent(const Hamiltonian& H, cplx omega, const TwoComponentState& rhs,
                                       const SeparatedOptions& opts = {});

/// Separated evolution for t > 0. The result lives on H's layout, which must cover the
/// data and the region of interest. Throws NearModeError if a radial Wronskian vanishes
/// on the shifted axis.
SeparatedEvolution evolve_separated(const Hamiltonian& H, const TwoComponentState& psi0,
                                    const std::vector<double>& times, const HamiltonianConfig& config = {},
                                    const SeparatedOptions& opts = {});

/// Compact (u, theta) box for sup-norms.
struct Region {
  double u_min = -10.0, u_max = 10.0;
  double theta_min = 0.05, theta_max = 3.0916;
  int n_theta = 32;
};

struct DecaySeries {
  std::vector<double> times;
  std::vector<double> sup_abs_phi;
  std::vector<double> uncertainty;  // sup times the summed relative error indicators of the evolution
  double initial_sup = 0.0;         // from the data themselves
  SeparatedEvolution evolution;
};

/// Index of the series maximum if every later value stays below its predecessor up to the
/// two uncertainties, -1 otherwise.
int decreasing_from(const DecaySeries& d);

DecaySeries decay_experiment(const Hamiltonian& H, const TwoComponentState& psi0,
                             const std::vector<double>& schedule, const Region& region,
                             const HamiltonianConfig& config = {}, const SeparatedOptions& opts = {});

double sup_abs_phi(const TwoComponentState& state, const Region& region);
/// Same sampling of the region, applied to an oracle snapshot.
double sup_abs_phi(const FieldSnapshot& snap, const Region& region);

/// phi0 = exp(-(u - centre)^2 / (2 width^2)) times the lowest basis function, phi1 = 0.
/// The profile drops below the support threshold well inside a window of half-width 10 width,
/// and its spectrum is negligible beyond |omega| ~ 8 / width.
TwoComponentState standard_bump_state(const StateLayout& layout, double centre = 0.0, double width = 1.5);

/// Copy of the nodes of `state` that lie on `target` (same spacing, grid aligned).
TwoComponentState restrict_state(const TwoComponentState& state, const StateLayout& target);

}  // namespace kerr
