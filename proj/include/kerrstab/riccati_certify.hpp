/**
 * @file riccati_certify.hpp
 * @brief Invariant-disk enclosures for the complex Riccati equation y' = V - y^2.
 *
 * A disk (m, R) moving with
 *   m' = V - m^2 - R^2 + dm,   R' = -2 R Re m + dR
 * contains every Riccati trajectory that starts inside it as long as dR >= |dm|.
 * Here dm is computed from a prescribed centre path and dR = (1 + margin) sup|dm|
 * on each grid cell, so the radius follows by quadrature.
 */
#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kerr {

using cplx = std::complex<double>;

struct Disk {
  cplx m{};
  double R = 0.0;
  bool contains(cplx y, double slack = 0.0) const { return std::abs(y - m) <= R + slack; }
};

struct RiccatiProblem {
  std::function<cplx(double)> V;
  double u0 = 0.0, u1 = 1.0;
  cplx y0{};
  Disk initial_disk;

  void validate() const;
};

/// Centre path with optional exact derivative (finite differences otherwise).
struct CenterPath {
  std::function<cplx(double)> m;
  std::function<cplx(double)> dm;

  cplx derivative(double u) const;
};

/// High-accuracy reference solution at the nodes (ascending, starting at or after u0).
/// Throws std::runtime_error "pole of the Riccati solution in (a, b)" when y blows up.
std::vector<cplx> riccati_flow(const RiccatiProblem& problem, const std::vector<double>& nodes,
                               double rel_tol = 1e-12);

struct DiskFlow {
  std::vector<double> nodes;
  std::vector<cplx> center;
  std::vector<cplx> dm;      // defect at the nodes (with the radius there)
  std::vector<double> dR;    // radius source per cell, stored at the cell's left node
  std::vector<double> R;
  bool criterion_held = true;       // dR >= sup|dm| on every cell
  std::optional<double> failure_point;
  std::string failure_reason;
};

struct CertifyOptions {
  double margin = 0.05;
  int samples_per_cell = 4;
  double radius_cap = 1e6;
  double nodes_per_phase = 2000.0;  // grid density per unit of WKB phase int |sqrt V|
  int max_refinements = 4;
  double refinement_tolerance = 0.01;
};

/// Radius equation along `path` on `nodes` starting from R0, with dR = (1 + margin) sup|dm|.
DiskFlow disk_flow(const CenterPath& path, const std::function<cplx(double)>& V,
                   const std::vector<double>& nodes, double R0, const CertifyOptions& opts = {});

struct CertifiedEnclosure {
  std::vector<double> nodes;
  std::vector<Disk> disks;
  std::vector<cplx> dm;
  bool certified = false;
  std::optional<double> failure_point;
  std::string failure_reason;
  int refinements = 0;
};

CertifiedEnclosure certify(const RiccatiProblem& problem, const CenterPath& path,
                           const CertifyOptions& opts = {});
/// Same on a caller-supplied grid (no refinement).
CertifiedEnclosure certify_on_grid(const RiccatiProblem& problem, const CenterPath& path,
                                   const std::vector<double>& nodes, const CertifyOptions& opts = {});

class TurningPointError : public std::runtime_error {
 public:
  TurningPointError(const std::string& what, double u) : std::runtime_error(what), u(u) {}
  double u;
};

/// m = sigma sqrt(V) - V'/(4V) with sqrt(V) continued along `grid` and sigma = +-1 fixed
/// so that Re m(u0) has the sign of Re y0 (sigma = -1 if Re y0 == 0).
/// Throws TurningPointError if |V| < threshold * max|V| on the grid.
CenterPath wkb_center(const std::function<cplx(double)>& V, const std::vector<double>& grid,
                      cplx y0 = {}, double threshold = 0.1);

}  // namespace kerr
