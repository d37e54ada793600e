#include "kerrstab/riccati_certify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "kerrstab/ode.hpp"

namespace kerr {

void RiccatiProblem::validate() const {
  if (!V) throw std::invalid_argument("RiccatiProblem: potential missing");
  if (!(u1 > u0)) throw std::invalid_argument("RiccatiProblem: need u1 > u0");
  if (!(initial_disk.R >= 0.0) || !std::isfinite(initial_disk.R))
    throw std::invalid_argument("RiccatiProblem: initial radius must be finite and >= 0");
  if (!initial_disk.contains(y0, 1e-14 * (1.0 + std::abs(y0))))
    throw std::invalid_argument("RiccatiProblem: y0 is not inside the initial disk");
}

namespace {

// Five-point first and second derivatives.
std::pair<cplx, cplx> fd12(const std::function<cplx(double)>& f, double u, double h) {
  const cplx fm2 = f(u - 2 * h), fm1 = f(u - h), f0 = f(u), fp1 = f(u + h), fp2 = f(u + 2 * h);
  const cplx d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
  const cplx d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
  return {d1, d2};
}

}  // namespace

cplx CenterPath::derivative(double u) const {
  if (dm) return dm(u);
  return fd12(m, u, 1e-3 * std::max(1.0, std::abs(u))).first;
}

std::vector<cplx> riccati_flow(const RiccatiProblem& problem, const std::vector<double>& nodes,
                               double rel_tol) {
  problem.validate();
  ode::Tolerances tol;
  tol.rel = rel_tol;
  tol.abs = 1e-15;
  const auto& V = problem.V;
  return ode::integrate_scalar([&V](double u, cplx y) { return V(u) - y * y; }, problem.u0, problem.y0,
                               nodes, tol);
}

DiskFlow disk_flow(const CenterPath& path, const std::function<cplx(double)>& V,
                   const std::vector<double>& nodes, double R0, const CertifyOptions& opts) {
  const std::size_t n = nodes.size();
  if (n < 2) throw std::invalid_argument("disk_flow: need at least two nodes");
  const int K = std::max(1, opts.samples_per_cell);

  DiskFlow out;
  out.nodes = nodes;
  out.center.reserve(n);
  out.dm.reserve(n);
  out.R.reserve(n);
  out.dR.reserve(n);

  auto base_defect = [&](double u, cplx m) { return path.derivative(u) - V(u) + m * m; };

  std::vector<double> us(K + 1), P(K + 1), Q(K + 1), Rs(K + 1);
  std::vector<cplx> ms(K + 1), A(K + 1);
  double R = R0;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx mi = path.m(nodes[i]);
    out.center.push_back(mi);
    out.R.push_back(R);
    out.dm.push_back(base_defect(nodes[i], mi) + R * R);
    if (i + 1 == n) {
      out.dR.push_back(0.0);
      break;
    }

    const double a = nodes[i], b = nodes[i + 1];
    for (int j = 0; j <= K; ++j) {
      us[j] = a + (b - a) * j / K;
      ms[j] = j == 0 ? mi : path.m(us[j]);
      A[j] = base_defect(us[j], ms[j]);
    }
    // P(u) = 2 int_a^u Re m, Q(u) = int_a^u exp(P)
    P[0] = Q[0] = 0.0;
    for (int j = 1; j <= K; ++j) {
      const double h = us[j] - us[j - 1];
      P[j] = P[j - 1] + h * (ms[j - 1].real() + ms[j].real());
      Q[j] = Q[j - 1] + 0.5 * h * (std::exp(P[j - 1]) + std::exp(P[j]));
    }

    // |A + R^2| is convex in R^2, so its sup over the cell's radius range sits at the ends.
    double r_lo = R, r_hi = R, dR = 0.0, sup_dm = 0.0;
    for (int pass = 0; pass < 4; ++pass) {
      double sup = 0.0, jump = 0.0, prev = 0.0;
      for (int j = 0; j <= K; ++j) {
        const double v = std::max(std::abs(A[j] + r_lo * r_lo), std::abs(A[j] + r_hi * r_hi));
        sup = std::max(sup, v);
        if (j > 0) jump = std::max(jump, std::abs(v - prev));
        prev = v;
      }
      sup_dm = sup + jump;  // Lipschitz inflation between samples
      dR = (1.0 + opts.margin) * sup_dm;
      double lo = R, hi = R;
      for (int j = 0; j <= K; ++j) {
        Rs[j] = std::exp(-P[j]) * (R + dR * Q[j]);
        lo = std::min(lo, Rs[j]);
        hi = std::max(hi, Rs[j]);
      }
      const bool settled = hi <= r_hi * (1.0 + 1e-12) && lo >= r_lo * (1.0 - 1e-12);
      r_lo = lo;
      r_hi = hi;
      if (settled) break;
    }
    out.dR.push_back(dR);
    if (dR < sup_dm) out.criterion_held = false;
    R = Rs[K];
    if (!(R <= opts.radius_cap)) {
      out.failure_point = b;
      std::ostringstream msg;
      msg << "radius exceeded the cap " << opts.radius_cap << " at u = " << b;
      out.failure_reason = msg.str();
      out.nodes.resize(i + 1);
      break;
    }
  }
  return out;
}

CertifiedEnclosure certify_on_grid(const RiccatiProblem& problem, const CenterPath& path,
                                   const std::vector<double>& nodes, const CertifyOptions& opts) {
  problem.validate();
  if (nodes.empty() || nodes.front() != problem.u0)
    throw std::invalid_argument("certify: grid must start at u0");
  // enlarge the initial disk so it is centred on the path
  const cplx m0 = path.m(problem.u0);
  const double R0 = std::abs(problem.initial_disk.m - m0) + problem.initial_disk.R;
  const DiskFlow flow = disk_flow(path, problem.V, nodes, R0, opts);

  CertifiedEnclosure enc;
  enc.nodes = flow.nodes;
  enc.dm.assign(flow.dm.begin(), flow.dm.begin() + long(flow.nodes.size()));
  for (std::size_t i = 0; i < flow.nodes.size(); ++i) enc.disks.push_back({flow.center[i], flow.R[i]});
  enc.certified = flow.criterion_held && !flow.failure_point;
  enc.failure_point = flow.failure_point;
  enc.failure_reason = flow.failure_reason;
  if (!flow.criterion_held && enc.failure_reason.empty())
    enc.failure_reason = "dR < |dm| on some cell (negative margin)";
  return enc;
}

CertifiedEnclosure certify(const RiccatiProblem& problem, const CenterPath& path, const CertifyOptions& opts) {
  problem.validate();
  // WKB phase int |sqrt V| sets the grid density
  const int probe = 1000;
  double phase = 0.0;
  for (int j = 0; j < probe; ++j) {
    const double u = problem.u0 + (problem.u1 - problem.u0) * (j + 0.5) / probe;
    phase += std::sqrt(std::abs(problem.V(u))) * (problem.u1 - problem.u0) / probe;
  }
  int cells = std::max(100, int(std::ceil(opts.nodes_per_phase * phase)));
  auto grid_of = [&](int c) {
    std::vector<double> g(std::size_t(c) + 1);
    for (int j = 0; j <= c; ++j) g[j] = problem.u0 + (problem.u1 - problem.u0) * j / c;
    g.back() = problem.u1;
    return g;
  };

  CertifiedEnclosure best = certify_on_grid(problem, path, grid_of(cells), opts);
  for (int ref = 1; ref <= opts.max_refinements; ++ref) {
    if (best.failure_point) break;
    cells *= 2;
    CertifiedEnclosure next = certify_on_grid(problem, path, grid_of(cells), opts);
    next.refinements = ref;
    const double r0 = best.disks.back().R, r1 = next.disks.back().R;
    const bool settled = std::abs(r1 - r0) <= opts.refinement_tolerance * std::max(r1, 1e-300);
    best = std::move(next);
    if (settled || best.failure_point) break;
  }
  return best;
}

CenterPath wkb_center(const std::function<cplx(double)>& V, const std::vector<double>& grid, cplx y0,
                      double threshold) {
  if (grid.size() < 2) throw std::invalid_argument("wkb_center: need at least two nodes");
  double vmax = 0.0;
  std::vector<cplx> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    vals[i] = V(grid[i]);
    vmax = std::max(vmax, std::abs(vals[i]));
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (std::abs(vals[i]) < threshold * vmax) {
      std::ostringstream msg;
      msg << "wkb_center: turning point near u = " << grid[i] << " (split the region)";
      throw TurningPointError(msg.str(), grid[i]);
    }

  // continue sqrt(V) along the grid
  auto roots = std::make_shared<std::vector<cplx>>(grid.size());
  (*roots)[0] = std::sqrt(vals[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const cplx r = std::sqrt(vals[i]);
    (*roots)[i] = std::abs(r - (*roots)[i - 1]) <= std::abs(r + (*roots)[i - 1]) ? r : -r;
  }
  double sigma = -1.0;
  if (y0.real() != 0.0 && (*roots)[0].real() != 0.0)
    sigma = (y0.real() > 0.0) == ((*roots)[0].real() > 0.0) ? 1.0 : -1.0;

  auto nodes = std::make_shared<std::vector<double>>(grid);
  auto root_at = [nodes, roots](double u, cplx v) {
    auto it = std::lower_bound(nodes->begin(), nodes->end(), u);
    std::size_t i = std::size_t(std::min<std::ptrdiff_t>(it - nodes->begin(), std::ptrdiff_t(nodes->size()) - 1));
    if (i > 0 && std::abs((*nodes)[i - 1] - u) < std::abs((*nodes)[i] - u)) --i;
    const cplx r = std::sqrt(v);
    return std::abs(r - (*roots)[i]) <= std::abs(r + (*roots)[i]) ? r : -r;
  };

  CenterPath path;
  path.m = [V, root_at, sigma](double u) {
    const cplx v = V(u);
    const auto [d1, d2] = fd12(V, u, 1e-3 * std::max(1.0, std::abs(u)));
    (void)d2;
    return sigma * root_at(u, v) - d1 / (4.0 * v);
  };
  path.dm = [V, root_at, sigma](double u) {
    const cplx v = V(u);
    const auto [d1, d2] = fd12(V, u, 1e-3 * std::max(1.0, std::abs(u)));
    return sigma * d1 / (2.0 * root_at(u, v)) - d2 / (4.0 * v) + d1 * d1 / (4.0 * v * v);
  };
  return path;
}

}  // namespace kerr
