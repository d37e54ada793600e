#include "kerrstab/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "kerrstab/quadrature.hpp"

namespace kerr {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);

// Composite Gauss-Legendre nodes on the segment a -> b; weights include dz.
void segment_rule(cplx a, cplx b, double width, const QuadratureRule& q, std::vector<cplx>& z,
                  std::vector<cplx>& w) {
  const int n = std::max(1, int(std::ceil(std::abs(b - a) / width - 1e-9)));
  const cplx d = (b - a) / double(n);
  for (int j = 0; j < n; ++j) {
    const cplx mid = a + (j + 0.5) * d;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      z.push_back(mid + 0.5 * d * q.nodes[i]);
      w.push_back(0.5 * d * q.weights[i]);
    }
  }
}

double resolve_c(const Hamiltonian& H, const HamiltonianConfig& cfg) {
  const double c_hat = H.c_hat();
  const double c = cfg.c > 0.0 ? cfg.c : 1.25 * c_hat;
  if (!(c > c_hat)) {
    std::ostringstream msg;
    msg << "contour half-width c = " << c << " must exceed the measured defect " << c_hat;
    throw std::invalid_argument(msg.str());
  }
  return c;
}

struct Sweep {
  std::vector<TwoComponentState> total, vertical;
  int solves = 0;
};

// -1/(2 pi i) oint e^{-i w t} (w - sigma)^{-p} R_w phi dw over the closed rectangle.
Sweep rectangle_sweep(const Hamiltonian& H, const TwoComponentState& phi, cplx sigma, int p,
                      const std::vector<double>& times, double omega_max, double c, double width, int nodes) {
  const QuadratureRule q = gauss_legendre(nodes);
  const double y = 2.0 * c;
  const cplx corners[4] = {cplx(-omega_max, -y), cplx(omega_max, -y), cplx(omega_max, y), cplx(-omega_max, y)};
  Sweep out;
  for (std::size_t j = 0; j < times.size(); ++j) {
    out.total.push_back(TwoComponentState::zero(H.layout()));
    out.vertical.push_back(TwoComponentState::zero(H.layout()));
  }
  const cplx pref = -1.0 / (2.0 * kPi * kI);
  for (int e = 0; e < 4; ++e) {
    std::vector<cplx> z, w;
    segment_rule(corners[e], corners[(e + 1) % 4], width, q, z, w);
    const bool vertical = (e % 2 == 1);
    for (std::size_t m = 0; m < z.size(); ++m) {
      const TwoComponentState X = H.resolvent(z[m], phi);
      ++out.solves;
      const cplx base = pref * w[m] * std::pow(z[m] - sigma, -p);
      for (std::size_t j = 0; j < times.size(); ++j) {
        const cplx f = base * std::exp(-kI * z[m] * times[j]);
        out.total[j].psi1 += f * X.psi1;
        out.total[j].psi2 += f * X.psi2;
        if (vertical) {
          out.vertical[j].psi1 += f * X.psi1;
          out.vertical[j].psi2 += f * X.psi2;
        }
      }
    }
  }
  return out;
}

// Six-point Lagrange interpolation of uniform samples onto a grid refined by `refine`.
std::vector<cplx> refine_samples(const Eigen::RowVectorXcd& v, int refine) {
  const int n = int(v.size());
  if (refine == 1 || n < 6) {
    std::vector<cplx> out(n);
    for (int i = 0; i < n; ++i) out[i] = v[i];
    return out;
  }
  std::vector<cplx> out(std::size_t(n - 1) * refine + 1);
  for (int i = 0; i + 1 < n; ++i) {
    const int s0 = std::clamp(i - 2, 0, n - 6);
    for (int r = 0; r < refine; ++r) {
      const double x = i + double(r) / refine;
      cplx acc = 0.0;
      for (int a = s0; a < s0 + 6; ++a) {
        double l = 1.0;
        for (int b = s0; b < s0 + 6; ++b)
          if (b != a) l *= (x - b) / double(a - b);
        acc += l * v[a];
      }
      out[std::size_t(i) * refine + r] = acc;
    }
  }
  out.back() = v[n - 1];
  return out;
}

// Values at zero of the polynomial through (eps_i, .): weights prod_{j != i} eps_j / (eps_j - eps_i).
std::vector<double> extrapolation_weights(const std::vector<double>& eps) {
  std::vector<double> w(eps.size(), 1.0);
  for (std::size_t i = 0; i < eps.size(); ++i)
    for (std::size_t j = 0; j < eps.size(); ++j)
      if (j != i) w[i] *= eps[j] / (eps[j] - eps[i]);
  return w;
}

// Barycentric interpolation matrix from the nodes x to the points y.
Eigen::MatrixXd interpolation_matrix(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = int(x.size());
  std::vector<double> bw(n, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) bw[i] /= (x[i] - x[j]);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(int(y.size()), n);
  for (std::size_t k = 0; k < y.size(); ++k) {
    int hit = -1;
    double den = 0.0;
    for (int i = 0; i < n; ++i) {
      if (y[k] == x[i]) hit = i;
      den += bw[i] / (y[k] - x[i]);
    }
    if (hit >= 0) {
      M(k, hit) = 1.0;
      continue;
    }
    for (int i = 0; i < n; ++i) M(k, i) = bw[i] / (y[k] - x[i]) / den;
  }
  return M;
}

// int_panel e^{-i w t} P(w) dw as weights on the panel values of P, P the interpolant.
std::vector<cplx> oscillatory_weights(double a, double b, const QuadratureRule& q, double t) {
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  const int nf = int(q.nodes.size()) + 4 + int(std::ceil(0.6 * std::abs(t) * half * 2.0));
  static thread_local std::map<std::pair<int, int>, std::pair<QuadratureRule, Eigen::MatrixXd>> cache;
  auto key = std::make_pair(int(q.nodes.size()), nf);
  auto it = cache.find(key);
  if (it == cache.end()) {
    QuadratureRule f = gauss_legendre(nf);
    it = cache.emplace(key, std::make_pair(f, interpolation_matrix(q.nodes, f.nodes))).first;
  }
  const auto& [f, M] = it->second;
  std::vector<cplx> w(q.nodes.size(), cplx(0.0));
  for (int k = 0; k < nf; ++k) {
    const cplx e = half * f.weights[k] * std::exp(-kI * (mid + half * f.nodes[k]) * t);
    for (std::size_t j = 0; j < q.nodes.size(); ++j) w[j] += e * M(k, int(j));
  }
  return w;
}

// g_j(t) = (1/2 pi i) int_{|w| > cut} e^{-i w t} (w - sigma)^{-p} w^{-j-1} dw on the real axis, j < J.
std::vector<cplx> asymptotic_tail_weights(double cut, double t, cplx sigma, int p, int J) {
  const QuadratureRule q = gauss_legendre(12);
  const double far = 4000.0;  // the remainder is below far^{-p-1}
  std::vector<cplx> acc(J, 0.0);
  for (int side : {1, -1}) {
    for (double a = cut; a < far; a += 1.0) {
      const double b = std::min(a + 1.0, far);
      const double lo = side > 0 ? a : -b, hi = side > 0 ? b : -a;
      const std::vector<cplx> w = oscillatory_weights(lo, hi, q, t);
      const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
      for (std::size_t m = 0; m < q.nodes.size(); ++m) {
        const double x = mid + half * q.nodes[m];
        cplx v = w[m] * std::pow(cplx(x) - sigma, -p) / x;
        for (int j = 0; j < J; ++j, v /= x) acc[j] += v;
      }
    }
  }
  for (auto& g : acc) g /= 2.0 * kPi * kI;
  return acc;
}

std::vector<double> frequency_breakpoints(const StateLayout& L, double omega_max, const SeparatedOptions& o) {
  std::set<double> pts;
  const double edge = std::min(o.inner_edge, omega_max);
  for (double x = -omega_max; x < -edge - 1e-12; x += o.outer_width) pts.insert(x);
  for (double x = -edge; x < edge - 1e-12; x += o.inner_width) pts.insert(x);
  for (double x = edge; x < omega_max - 1e-12; x += o.outer_width) pts.insert(x);
  pts.insert(omega_max);
  // branch points of sqrt(-V) on the axis: k_+ = omega and, for real omega_0, k_- = omega - omega_0
  RadialProblem rp;
  rp.geometry = L.geometry;
  rp.s = L.s;
  rp.k = L.k;
  const RadialPotential pot = radial_potential(rp);
  std::vector<double> special{0.0};
  const cplx omega0 = -pot.k_minus;
  if (std::abs(omega0.imag()) < 1e-12 && std::abs(omega0.real()) > 1e-12) special.push_back(omega0.real());
  for (double c : special) {
    if (std::abs(c) >= omega_max) continue;
    pts.insert(c);
    for (int j = 1; j <= o.grading_levels; ++j) {
      const double d = o.inner_width * std::pow(0.5, j);
      pts.insert(c - d);
      pts.insert(c + d);
    }
  }
  std::vector<double> out;
  for (double x : pts)
    if (out.empty() || x - out.back() > 1e-9) out.push_back(x);
  return out;
}

double relative(const Hamiltonian& H, const TwoComponentState& diff, const TwoComponentState& ref) {
  const double r = H.norm(ref), d = H.norm(diff);
  return r > 0.0 ? d / r : d;
}

}  // namespace

void HamiltonianConfig::validate() const {
  if (p < 1) throw std::invalid_argument("HamiltonianConfig: p must be >= 1");
  if (c < 0.0 || !std::isfinite(c)) throw std::invalid_argument("HamiltonianConfig: c must be positive (0 selects the default)");
  if (!(contour.panel_width > 0.0)) throw std::invalid_argument("ContourSpec: panel_width must be positive");
  if (contour.nodes < 2) throw std::invalid_argument("ContourSpec: nodes must be >= 2");
  if (contour.omega_max < 0.0) throw std::invalid_argument("ContourSpec: omega_max must be >= 0");
}

ContourEvolution evolve_contour(const Hamiltonian& H, const TwoComponentState& psi0,
                                const std::vector<double>& times, const HamiltonianConfig& config) {
  config.validate();
  ContourEvolution res;
  res.times = times;
  res.p = config.p;
  res.c_hat = H.c_hat();
  res.c = resolve_c(H, config);
  const double bound = H.spectral_bound();
  res.omega_max = config.contour.omega_max > 0.0 ? config.contour.omega_max : 1.05 * bound + 1.0;
  if (res.omega_max <= bound) {
    std::ostringstream msg;
    msg << "evolve_contour: omega_max = " << res.omega_max << " does not clear the eigenvalue bound " << bound;
    throw std::invalid_argument(msg.str());
  }
  res.states.assign(times.size(), TwoComponentState::zero(H.layout()));
  res.error_estimate.assign(times.size(), 0.0);
  res.closure.assign(times.size(), 0.0);

  for (int sign : {1, -1}) {
    std::vector<std::size_t> idx;
    std::vector<double> ts;
    for (std::size_t j = 0; j < times.size(); ++j)
      if ((times[j] >= 0.0) == (sign > 0)) {
        idx.push_back(j);
        ts.push_back(times[j]);
      }
    if (idx.empty()) continue;
    // pole of the regularizing factor on the side where e^{-i omega t} grows
    const cplx sigma = sign * 3.0 * kI * res.c;
    const TwoComponentState phi = H.shifted_power(psi0, -sigma, config.p);
    const auto fine = rectangle_sweep(H, phi, sigma, config.p, ts, res.omega_max, res.c,
                                      config.contour.panel_width, config.contour.nodes);
    const auto coarse = rectangle_sweep(H, phi, sigma, config.p, ts, res.omega_max, res.c,
                                        2.0 * config.contour.panel_width, config.contour.nodes);
    res.resolvent_solves += fine.solves + coarse.solves;
    for (std::size_t m = 0; m < idx.size(); ++m) {
      res.states[idx[m]] = fine.total[m];
      res.error_estimate[idx[m]] = relative(H, fine.total[m] - coarse.total[m], fine.total[m]);
      res.closure[idx[m]] = relative(H, fine.vertical[m], fine.total[m]);
    }
  }
  return res;
}

SeparatedResolvent separated_resolvent(const Hamiltonian& H, cplx omega, const TwoComponentState& rhs,
                                       const SeparatedOptions& opts) {
  const StateLayout& L = H.layout();
  const int na = L.n_angular, nu = L.n_u;
  AngularProblem ap;
  ap.s = L.s;
  ap.k = L.k;
  ap.a_omega = L.geometry.a() * omega;
  ap.l_max = ap.l_min() + na - 1;
  const AngularSpectrum spec = angular_spectrum(ap, opts.clusters);
  // the Green's integral oscillates like e^{i omega v}: sub-sample so that h |omega| stays small
  const int refine = std::clamp(int(std::ceil(L.h() * std::abs(omega) / opts.greens_resolution)), 1, 32);
  const int nf = (nu - 1) * refine + 1;
  std::vector<double> grid(nf);
  for (int i = 0; i < nf; ++i) grid[i] = L.u_min + i * (L.h() / refine);

  const Eigen::VectorXcd red = H.reduced_rhs(omega, rhs);
  const Eigen::Map<const Eigen::MatrixXcd> R(red.data(), na, nu);
  const Eigen::MatrixXcd G = spec.left_eigenvectors * R;  // row j: radial source along eigenvector j
  const Eigen::Map<const Eigen::MatrixXcd> P1(rhs.psi1.data(), na, nu);
  const Eigen::MatrixXcd WP1 = spec.left_eigenvectors * P1;
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(na, nu);
  const double gnorm = G.norm();
  SeparatedResolvent out;
  out.resolved_clusters = spec.resolved_clusters;
  for (int j = 0; j < na; ++j) {
    if (gnorm == 0.0 || G.row(j).norm() <= opts.component_cutoff * gnorm) continue;
    RadialProblem rp;
    rp.geometry = L.geometry;
    rp.s = L.s;
    rp.k = L.k;
    rp.omega = omega;
    rp.lambda = spec.eigenvalues[j];
    const JostPair pair = jost_solutions(rp, grid, opts.jost);
    ++out.radial_solves;
    const std::vector<cplx> y = apply_greens(pair, refine_samples(G.row(j), refine));
    // (-d^2 + V) int s f = -f
    for (int i = 0; i < nu; ++i) Y(j, i) = -y[std::size_t(i) * refine];
  }
  const int ncl = int(spec.clusters.size());
  const int last = opts.n_max < 0 ? ncl - 1 : std::min(opts.n_max, ncl - 1);
  for (int n = 0; n <= last; ++n) {
    Eigen::MatrixXcd X1 = Eigen::MatrixXcd::Zero(na, nu), Q1 = Eigen::MatrixXcd::Zero(na, nu);
    for (int j : spec.clusters[n]) {
      X1 += spec.eigenvectors.col(j) * Y.row(j);
      Q1 += spec.eigenvectors.col(j) * WP1.row(j);
    }
    TwoComponentState part = TwoComponentState::zero(L);
    part.psi1 = Eigen::Map<Eigen::VectorXcd>(X1.data(), X1.size());
    part.psi2 = Eigen::Map<Eigen::VectorXcd>(Q1.data(), Q1.size()) + omega * part.psi1;
    out.clusters.push_back(std::move(part));
  }
  return out;
}

SeparatedEvolution evolve_separated(const Hamiltonian& H, const TwoComponentState& psi0,
                                    const std::vector<double>& times, const HamiltonianConfig& config,
                                    const SeparatedOptions& opts) {
  config.validate();
  if (opts.epsilons.empty()) throw std::invalid_argument("evolve_separated: at least one epsilon is required");
  for (double e : opts.epsilons)
    if (!(e > 0.0)) throw std::invalid_argument("evolve_separated: epsilons must be positive");
  for (double t : times)
    if (t < 0.0) throw std::invalid_argument("evolve_separated: only t >= 0 is supported");
  if (opts.nodes < 2 || !(opts.inner_width > 0.0) || !(opts.outer_width > 0.0))
    throw std::invalid_argument("evolve_separated: bad panel parameters");

  const StateLayout& L = H.layout();
  SeparatedEvolution res;
  res.times = times;
  res.p = config.p;
  res.c = resolve_c(H, config);
  const cplx sigma = 3.0 * kI * res.c;
  const TwoComponentState phi = H.shifted_power(psi0, -sigma, config.p);
  const double n0 = H.norm(psi0);

  // Large-|omega| expansion R_w = -sum_{j<J} H^j / w^{j+1} + (H/w)^J R_w: the first J terms are
  // integrated beyond omega_max in closed form up to scalar quadrature, the remainder is an envelope.
  const int J = opts.tail_terms;
  std::vector<TwoComponentState> hphi{phi};
  for (int j = 1; j <= J; ++j) hphi.push_back(H.apply(hphi.back()));
  const double nrem = H.norm(hphi[J]);
  auto tail = [&](double Om) { return nrem / (kPi * (config.p + J) * std::pow(Om, config.p + J)); };
  if (opts.omega_max > 0.0) {
    res.omega_max = opts.omega_max;
  } else {
    // half the budget: the result norm may fall below |Psi0|
    double Om = opts.inner_edge;
    while (Om < opts.omega_cap && tail(Om) > 0.5 * opts.tail_tolerance * n0) Om *= 1.05;
    res.omega_max = std::min(Om, opts.omega_cap);
  }
  auto tail_correction = [&](double cut, double t) {
    TwoComponentState corr = TwoComponentState::zero(L);
    const std::vector<cplx> g = asymptotic_tail_weights(cut, t, sigma, config.p, J);
    for (int j = 0; j < J; ++j) corr += (-g[j]) * hphi[j];
    return corr;
  };

  const std::vector<double> eps = opts.epsilons;
  const std::vector<double> ew = extrapolation_weights(eps);
  const std::size_t ne = eps.size();
  const QuadratureRule q = gauss_legendre(opts.nodes);
  const std::vector<double> bp = frequency_breakpoints(L, res.omega_max, opts);
  const double edge = std::min(opts.inner_edge, res.omega_max);

  const std::size_t nt = times.size();
  std::vector<TwoComponentState> total(nt, TwoComponentState::zero(L)), finest(nt, TwoComponentState::zero(L)),
      shorter(nt, TwoComponentState::zero(L));
  std::vector<TwoComponentState> last_parts;
  std::vector<double> l1;
  int resolved = -1;
  // the upper line runs right to left: Psi(t) = (1/2 pi i) int e^{-i w t} F(w) dw along Im w = eps
  const cplx pref = 1.0 / (2.0 * kPi * kI);

  for (std::size_t b = 0; b + 1 < bp.size(); ++b) {
    const double a0 = bp[b], a1 = bp[b + 1];
    const double half = 0.5 * (a1 - a0), mid = 0.5 * (a0 + a1);
    // away from the axis structure every level gives the same line integral; only the finest is used there
    const bool inner = std::max(std::abs(a0), std::abs(a1)) <= edge + 1e-12;
    const std::size_t first = inner ? 0 : ne - 1;
    auto node_value = [&](std::size_t m) {
      const double wr = mid + half * q.nodes[m];
      std::vector<std::vector<TwoComponentState>> lv(ne);
      int solves = 0, res_cl = -1;
      for (std::size_t e = first; e < ne; ++e) {
        const cplx om(wr, eps[e]);
        SeparatedResolvent smp = separated_resolvent(H, om, phi, opts);
        for (auto& part : smp.clusters) part *= std::pow(om - sigma, -config.p);
        solves += smp.radial_solves;
        res_cl = std::max(res_cl, smp.resolved_clusters);
        lv[e] = std::move(smp.clusters);
      }
      return std::make_tuple(std::move(lv), solves, res_cl);
    };
    std::vector<decltype(node_value(0))> vals;
    if (opts.threads > 1) {
      std::vector<std::future<decltype(node_value(0))>> jobs;
      for (std::size_t m = 0; m < q.nodes.size(); ++m) jobs.push_back(std::async(std::launch::async, node_value, m));
      for (auto& j : jobs) vals.push_back(j.get());
    } else {
      for (std::size_t m = 0; m < q.nodes.size(); ++m) vals.push_back(node_value(m));
    }
    for (auto& [lv, solves, res_cl] : vals) {
      res.radial_solves += solves;
      if (std::abs(mid) < 0.5) resolved = std::max(resolved, res_cl);
      ++res.frequency_nodes;
    }
    std::size_t ncl = 0;
    for (auto& v : vals)
      for (std::size_t e = first; e < ne; ++e) ncl = std::max(ncl, std::get<0>(v)[e].size());
    if (l1.size() < ncl) l1.resize(ncl, 0.0);
    if (last_parts.size() < ncl) last_parts.resize(ncl, TwoComponentState::zero(L));
    auto level_weight = [&](std::size_t e, double t) {
      return (inner ? ew[e] : 1.0) * std::exp(eps[e] * t);
    };
    for (std::size_t m = 0; m < q.nodes.size(); ++m) {
      const auto& lv = std::get<0>(vals[m]);
      for (std::size_t n = 0; n < ncl; ++n) {
        TwoComponentState f0 = TwoComponentState::zero(L);
        for (std::size_t e = first; e < ne; ++e)
          if (n < lv[e].size()) f0 += cplx(level_weight(e, 0.0)) * lv[e][n];
        l1[n] += std::abs(pref) * half * q.weights[m] * H.norm(f0);
      }
    }
    const bool in_shorter = std::max(std::abs(a0), std::abs(a1)) <= 0.8 * res.omega_max + 1e-12;
    for (std::size_t j = 0; j < nt; ++j) {
      const std::vector<cplx> w = oscillatory_weights(a0, a1, q, times[j]);
      for (std::size_t m = 0; m < q.nodes.size(); ++m) {
        const auto& lv = std::get<0>(vals[m]);
        for (std::size_t e = first; e < ne; ++e) {
          const cplx f = pref * w[m] * level_weight(e, times[j]);
          for (std::size_t n = 0; n < lv[e].size(); ++n) {
            total[j] += f * lv[e][n];
            if (in_shorter) shorter[j] += f * lv[e][n];
            if (j + 1 == nt) last_parts[n] += f * lv[e][n];
          }
        }
        const cplx ff = pref * w[m] * std::exp(eps[ne - 1] * times[j]);
        for (const auto& part : lv[ne - 1]) finest[j] += ff * part;
      }
    }
  }

  // the lower line at Im omega = -far_factor c, evaluated coarsely with direct solves and discarded
  std::vector<TwoComponentState> far(nt, TwoComponentState::zero(L));
  {
    const QuadratureRule qf = gauss_legendre(8);
    std::vector<cplx> z, w;
    const double y = -opts.far_factor * res.c;
    segment_rule(cplx(-res.omega_max, y), cplx(res.omega_max, y), 2.0, qf, z, w);
    const cplx fp = -1.0 / (2.0 * kPi * kI);
    for (std::size_t m = 0; m < z.size(); ++m) {
      const TwoComponentState X = H.resolvent(z[m], phi);
      const cplx base = fp * w[m] * std::pow(z[m] - sigma, -config.p);
      for (std::size_t j = 0; j < nt; ++j) far[j] += (base * std::exp(-kI * z[m] * times[j])) * X;
    }
  }

  for (std::size_t j = 0; j < nt; ++j) {
    const TwoComponentState corr = tail_correction(res.omega_max, times[j]);
    total[j] += corr;
    finest[j] += corr;
    shorter[j] += tail_correction(0.8 * res.omega_max, times[j]);
  }
  res.states = total;
  for (std::size_t j = 0; j < nt; ++j) {
    const double nr = H.norm(total[j]);
    const double scale = nr > 0.0 ? nr : 1.0;
    res.epsilon_spread.push_back(H.norm(total[j] - finest[j]) / scale);
    res.tail_estimate.push_back(tail(res.omega_max) / scale);
    res.tail_change.push_back(H.norm(total[j] - shorter[j]) / scale);
    res.far_branch.push_back(H.norm(far[j]) / scale);
  }
  TwoComponentState partial = TwoComponentState::zero(L);
  const double ntot = nt ? H.norm(total.back()) : 0.0;
  for (std::size_t n = 0; n < l1.size(); ++n) {
    ModeLedgerEntry e;
    e.cluster = int(n);
    e.resolved = int(n) < resolved;
    e.integrand_l1 = l1[n];
    if (n < last_parts.size()) {
      e.final_norm = H.norm(last_parts[n]);
      partial += last_parts[n];
    }
    res.ledger.push_back(e);
    if (n < last_parts.size())
      res.partial_sum_change.push_back(ntot > 0.0 ? H.norm(last_parts[n]) / ntot : 0.0);
  }
  return res;
}

double sup_abs_phi(const TwoComponentState& state, const Region& region) {
  const StateLayout& L = state.layout;
  const SpinWeightedBasis basis(L.s, L.k, L.n_angular);
  std::vector<Eigen::VectorXd> vals;
  for (int j = 0; j < region.n_theta; ++j) {
    const double th = region.n_theta == 1 ? region.theta_min
                                          : region.theta_min + (region.theta_max - region.theta_min) * j / (region.n_theta - 1);
    vals.push_back(basis.values(std::cos(th)));
  }
  double sup = 0.0;
  for (int i = 0; i < L.n_u; ++i) {
    const double u = L.u(i);
    if (u < region.u_min || u > region.u_max) continue;
    const Eigen::VectorXcd c = field_coefficients(state, i);
    for (const auto& v : vals) sup = std::max(sup, std::abs((v.cast<cplx>().transpose() * c)(0)));
  }
  return sup;
}

double sup_abs_phi(const FieldSnapshot& snap, const Region& region) {
  double sup = 0.0;
  for (std::size_t i = 0; i < snap.u.size(); ++i) {
    if (snap.u[i] < region.u_min || snap.u[i] > region.u_max) continue;
    for (int j = 0; j < region.n_theta; ++j) {
      const double th = region.n_theta == 1 ? region.theta_min
                                            : region.theta_min + (region.theta_max - region.theta_min) * j / (region.n_theta - 1);
      sup = std::max(sup, std::abs(snap.value(static_cast<int>(i), th)));
    }
  }
  return sup;
}

DecaySeries decay_experiment(const Hamiltonian& H, const TwoComponentState& psi0,
                             const std::vector<double>& schedule, const Region& region,
                             const HamiltonianConfig& config, const SeparatedOptions& opts) {
  if (!(region.u_min < region.u_max) || region.n_theta < 1)
    throw std::invalid_argument("decay_experiment: empty region");
  DecaySeries out;
  out.times = schedule;
  out.initial_sup = sup_abs_phi(psi0, region);
  out.evolution = evolve_separated(H, psi0, schedule, config, opts);
  const SeparatedEvolution& ev = out.evolution;
  for (std::size_t j = 0; j < ev.states.size(); ++j) {
    out.sup_abs_phi.push_back(sup_abs_phi(ev.states[j], region));
    const double rel = ev.epsilon_spread[j] + ev.tail_estimate[j] + ev.tail_change[j] + ev.far_branch[j];
    out.uncertainty.push_back(rel * out.sup_abs_phi.back());
  }
  return out;
}

int decreasing_from(const DecaySeries& d) {
  const auto& v = d.sup_abs_phi;
  if (v.empty()) return -1;
  const int peak = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  for (std::size_t n = peak + 1; n < v.size(); ++n)
    if (v[n] > v[n - 1] + d.uncertainty[n] + d.uncertainty[n - 1]) return -1;
  return peak;
}

TwoComponentState standard_bump_state(const StateLayout& layout, double centre, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("standard_bump_state: width must be positive");
  const SpinWeightedBasis basis(layout.s, layout.k, layout.n_angular);
  return to_hamiltonian_state(
      [&](double u, double theta) {
        const double t = (u - centre) / width;
        return cplx(std::exp(-0.5 * t * t) * basis.values(std::cos(theta))[0]);
      },
      [](double, double) { return cplx(0.0); }, layout);
}

TwoComponentState restrict_state(const TwoComponentState& state, const StateLayout& target) {
  const StateLayout& L = state.layout;
  if (target.n_angular != L.n_angular || std::abs(target.h() - L.h()) > 1e-12 * L.h())
    throw std::invalid_argument("restrict_state: layouts differ in spacing or angular size");
  const double off = (target.u_min - L.u_min) / L.h();
  const int i0 = int(std::lround(off));
  if (std::abs(off - i0) > 1e-9 || i0 < 0 || i0 + target.n_u > L.n_u)
    throw std::invalid_argument("restrict_state: target grid is not a sub-grid");
  TwoComponentState out = TwoComponentState::zero(target);
  const int na = L.n_angular;
  out.psi1 = state.psi1.segment(std::size_t(i0) * na, std::size_t(target.n_u) * na);
  out.psi2 = state.psi2.segment(std::size_t(i0) * na, std::size_t(target.n_u) * na);
  return out;
}

}  // namespace kerr
