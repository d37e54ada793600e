#include "kerrstab/radial_ode.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "kerrstab/angular_spectral.hpp"
#include "kerrstab/series.hpp"

namespace kerr {

namespace {

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-12; }

// Pick the square root of -v closest to `hint` (continuity across omega).
cplx momentum(cplx v, cplx hint) {
  const cplx k = std::sqrt(-v);
  return std::abs(k - hint) <= std::abs(k + hint) ? k : -k;
}

struct TeukolskyData {
  KerrParams geo;
  double M, a, r1, d, A, B, s, k;
  cplx omega, lambda;
};

cplx teukolsky_v_of_x(const TeukolskyData& t, double x) {
  const double r = t.r1 + x;
  const double g2 = r * r + t.a * t.a;
  const double Delta = x * (x + t.d);
  const double dDelta = 2.0 * x + t.d;
  const double curvature = Delta / (g2 * g2 * g2) * (dDelta * r + Delta - 3.0 * Delta * r * r / g2);
  const cplx bracket = cplx(0.0, -1.0) * t.omega * g2 - cplx(0.0, t.a * t.k) - (r - t.M) * t.s;
  const cplx E = cplx(0.0, -4.0 * t.s * r) * t.omega + 4.0 * t.k * t.a * t.omega + t.lambda;
  return curvature + (bracket * bracket + Delta * E) / (g2 * g2);
}

}  // namespace

void RadialProblem::validate() const {
  if (!(s >= 0.0) || !is_integer(2.0 * s))
    throw std::invalid_argument("RadialProblem: 2s must be a non-negative integer");
  if (!is_integer(k - s)) throw std::invalid_argument("RadialProblem: k - s must be an integer");
  if (!std::isfinite(std::abs(omega)) || !std::isfinite(std::abs(lambda)))
    throw std::invalid_argument("RadialProblem: omega and lambda must be finite");
}

RadialPotential radial_potential(const RadialProblem& problem) {
  problem.validate();
  const KerrParams& geo = problem.geometry;
  const GeometryCache cache = make_geometry_cache(geo);
  TeukolskyData t{geo, geo.M(), geo.a(), cache.r1, cache.r1 - cache.r_minus, 0.0, 0.0,
                  problem.s, problem.k, problem.omega, problem.lambda};
  t.A = 2.0 * t.M * t.r1 / t.d;
  t.B = 2.0 * t.M * cache.r_minus / t.d;

  RadialPotential pot;
  pot.evaluate = [t](double u) { return teukolsky_v_of_x(t, regge_wheeler_offset(t.geo, u)); };
  const double two_m_r1 = 2.0 * t.M * t.r1;
  const cplx omega0 = -t.a * t.k / two_m_r1 + cplx(0.0, t.s * (t.r1 - t.M) / two_m_r1);
  pot.k_minus = problem.omega - omega0;
  pot.k_plus = problem.omega;
  pot.v_minus = -pot.k_minus * pot.k_minus;
  pot.v_plus = -problem.omega * problem.omega;
  pot.horizon_rate = 2.0 * surface_gravity(geo);
  pot.infinity_power = problem.s != 0.0 ? 1.0 : 2.0;

  // Frobenius data of Delta^2 R'' + Delta Delta' R' - (B^2 + Delta E) R = 0 in x = r - r1.
  const cplx I(0.0, 1.0);
  const Polynomial q2 = Polynomial{t.d, 1.0} * Polynomial{t.d, 1.0};
  const Polynomial q1 = Polynomial{t.d, 1.0} * Polynomial{t.d, 2.0};
  const Polynomial bracket{-I * problem.omega * (t.r1 * t.r1 + t.a * t.a) - I * t.a * t.k -
                               (t.r1 - t.M) * t.s,
                           -2.0 * I * problem.omega * t.r1 - t.s, -I * problem.omega};
  const Polynomial E{-4.0 * I * t.s * t.r1 * problem.omega + 4.0 * t.k * t.a * problem.omega +
                         problem.lambda,
                     -4.0 * I * t.s * problem.omega};
  const Polynomial q0 = cplx(-1.0) * (bracket * bracket + Polynomial{0.0, t.d, 1.0} * E);
  const cplx mu = bracket.coeff(0) / t.d;

  std::shared_ptr<FrobeniusSeries> upper, lower;
  try { upper = std::make_shared<FrobeniusSeries>(q2, q1, q0, mu); } catch (const std::exception&) {}
  try { lower = std::make_shared<FrobeniusSeries>(q2, q1, q0, -mu); } catch (const std::exception&) {}

  const double x_edge = 0.25 * t.d;
  pot.horizon_series_edge = regge_wheeler_u_from_offset(geo, x_edge);
  // ln x - L0 -> u / A as x -> 0, so exp(nu (ln x - L0)) ~ exp(-+ i k_- u).
  const double L0 = std::log(2.0 * t.M) + (t.B * std::log(t.d / (2.0 * t.M)) - t.r1) / t.A;
  const double g1 = std::sqrt(two_m_r1);
  pot.horizon_series = [t, upper, lower, L0, g1](double u, bool lower_branch) -> std::pair<cplx, cplx> {
    const auto& series = lower_branch ? lower : upper;
    if (!series) throw RadialIntegrationError("horizon Frobenius series is resonant at this omega");
    const double x = regge_wheeler_offset(t.geo, u);
    const double r = t.r1 + x;
    const double g2 = r * r + t.a * t.a;
    const auto [S, T] = series->eval_scaled(x);
    const cplx phi = std::exp(series->exponent() * (std::log(x) - L0)) * (std::sqrt(g2) / g1) * S;
    const cplx dphi = phi * (x * (x + t.d) * r / (g2 * g2) + (x + t.d) * T / (g2 * S));
    return {phi, dphi};
  };
  return pot;
}

cplx schwarzschild_scalar_potential(double M, cplx omega, cplx lambda, double u) {
  const double r = regge_wheeler_r(KerrParams(M, 0.0), u);
  return -omega * omega + (1.0 - 2.0 * M / r) * (lambda / (r * r) + 2.0 * M / (r * r * r));
}

RadialPotential free_potential(cplx omega) {
  RadialPotential pot;
  const cplx v = -omega * omega;
  pot.evaluate = [v](double) { return v; };
  pot.v_minus = pot.v_plus = v;
  pot.k_minus = pot.k_plus = omega;
  return pot;
}

std::vector<double> uniform_grid(double a, double b, int n) {
  if (n < 2) throw std::invalid_argument("uniform_grid: need at least two nodes");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = a + (b - a) * i / (n - 1);
  g.back() = b;
  return g;
}

namespace {

// Second-order WKB log-derivative sigma i k(u) - V'/(4V) with k continued from k_inf.
cplx wkb_log_derivative(const RadialPotential& pot, double u, cplx k_inf, double sigma) {
  const cplx v = pot(u);
  const double h = 1e-3 * std::max(1.0, std::abs(u));
  const cplx dv = (pot(u + h) - pot(u - h)) / (2.0 * h);
  const cplx k = momentum(v, k_inf);
  cplx y = sigma * cplx(0.0, 1.0) * k;
  if (std::abs(v) > 0.0) y -= dv / (4.0 * v);
  return y;
}

std::vector<double> targets_from(const std::vector<double>& grid, std::size_t lo, std::size_t hi,
                                 bool descending) {
  std::vector<double> t(grid.begin() + lo, grid.begin() + hi);
  if (descending) std::reverse(t.begin(), t.end());
  return t;
}

ode::NodalSolution integrate(const RadialPotential& pot, double u0, cplx phi0, cplx dphi0,
                             const std::vector<double>& targets, const ode::Tolerances& tol) {
  try {
    return ode::integrate_schrodinger([&pot](double u) { return pot(u); }, u0, phi0, dphi0, targets, tol);
  } catch (const std::runtime_error& e) {
    throw RadialIntegrationError(std::string("radial integration failed: ") + e.what());
  }
}

}  // namespace

JostPair jost_solutions(const RadialProblem& problem, const std::vector<double>& grid,
                        const JostOptions& opts) {
  return jost_solutions(radial_potential(problem), grid, opts, problem.omega, problem.lambda);
}

JostPair jost_solutions(const RadialPotential& pot, const std::vector<double>& grid,
                        const JostOptions& opts, cplx omega, cplx lambda) {
  const std::size_t n = grid.size();
  if (n < 2) throw std::invalid_argument("jost_solutions: grid needs at least two nodes");
  for (std::size_t i = 1; i < n; ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("jost_solutions: grid must be ascending");

  bool lower = opts.branch == JostBranch::Lower;
  if (opts.branch == JostBranch::Automatic) lower = pot.k_plus.imag() < 0.0;
  const double sigma_a = lower ? 1.0 : -1.0;  // acute ~ exp(sigma_a i k_- u)
  const double sigma_g = -sigma_a;            // grave ~ exp(sigma_g i k_+ u)
  const cplx I(0.0, 1.0);

  JostPair out;
  out.u = grid;
  out.omega = omega;
  out.lambda = lambda;
  out.lower_branch = lower;
  out.potential = pot.evaluate;
  out.tol = opts.tol;
  out.wronskian_threshold = opts.wronskian_threshold;
  out.acute.resize(n);
  out.dacute.resize(n);
  out.grave.resize(n);
  out.dgrave.resize(n);

  // acute: exact horizon series where available, else WKB at u_L with doubling
  if (pot.horizon_series) {
    const double edge = pot.horizon_series_edge;
    std::size_t split = 0;
    while (split < n && grid[split] <= edge) {
      std::tie(out.acute[split], out.dacute[split]) = pot.horizon_series(grid[split], lower);
      ++split;
    }
    out.u_left = std::min(edge, grid.front());
    if (split < n) {
      const auto [p0, d0] = pot.horizon_series(edge, lower);
      const auto sol = integrate(pot, edge, p0, d0, targets_from(grid, split, n, false), opts.tol);
      for (std::size_t i = split; i < n; ++i) {
        out.acute[i] = sol.phi[i - split];
        out.dacute[i] = sol.dphi[i - split];
      }
    }
  } else {
    double uL = std::min(-opts.u_match, grid.front());
    cplx prev_y{}, p0{}, d0{};
    for (int it = 0; it <= opts.max_doublings; ++it) {
      const cplx phi = std::exp(sigma_a * I * pot.k_minus * uL);
      const cplx dphi = phi * wkb_log_derivative(pot, uL, pot.k_minus, sigma_a);
      const auto sol = integrate(pot, uL, phi, dphi, {grid.front()}, opts.tol);
      p0 = sol.phi[0];
      d0 = sol.dphi[0];
      const cplx y = d0 / p0;
      out.u_left = uL;
      if (it > 0 && std::abs(y - prev_y) <= opts.match_stability * std::max(1.0, std::abs(y))) break;
      prev_y = y;
      uL *= 2.0;
      if (uL > -1.0) uL = -1.0 - std::abs(uL);
    }
    const auto sol = integrate(pot, grid.front(), p0, d0, grid, opts.tol);
    out.acute = sol.phi;
    out.dacute = sol.dphi;
  }

  // grave: WKB at u_R, doubled until the log-derivative at the right end settles
  std::vector<std::optional<cplx>> series_w(n);
  {
    double uR = std::max(opts.u_match, grid.back());
    cplx prev_y{}, p0{}, d0{};
    for (int it = 0; it <= opts.max_doublings; ++it) {
      const cplx phi = std::exp(sigma_g * I * pot.k_plus * uR);
      const cplx dphi = phi * wkb_log_derivative(pot, uR, pot.k_plus, sigma_g);
      const auto sol = integrate(pot, uR, phi, dphi, {grid.back()}, opts.tol);
      p0 = sol.phi[0];
      d0 = sol.dphi[0];
      const cplx y = d0 / p0;
      out.u_right = uR;
      if (it > 0 && std::abs(y - prev_y) <= opts.match_stability * std::max(1.0, std::abs(y))) break;
      prev_y = y;
      uR = 2.0 * std::max(uR, 1.0);
    }
    // Inside the series region grave is expanded in the two Frobenius solutions,
    // which avoids losing the horizon-recessive component to cancellation.
    std::size_t split = 0;
    std::function<std::pair<cplx, cplx>(double)> other;
    if (pot.horizon_series) {
      while (split < n && grid[split] <= pot.horizon_series_edge) ++split;
      try {
        pot.horizon_series(pot.horizon_series_edge, !lower);
        other = [&pot, lower](double u) { return pot.horizon_series(u, !lower); };
      } catch (const RadialIntegrationError&) {
        split = 0;
      }
    }
    std::vector<double> targets = targets_from(grid, split, n, true);
    if (split > 0) targets.push_back(pot.horizon_series_edge);
    const auto sol = integrate(pot, grid.back(), p0, d0, targets, opts.tol);
    for (std::size_t i = split; i < n; ++i) {
      out.grave[i] = sol.phi[n - 1 - i];
      out.dgrave[i] = sol.dphi[n - 1 - i];
    }
    if (split > 0) {
      const double edge = pot.horizon_series_edge;
      const cplx g = sol.phi.back(), dg = sol.dphi.back();
      const auto [a, da] = pot.horizon_series(edge, lower);
      const auto [b, db] = other(edge);
      const cplx det = a * db - da * b;
      const cplx alpha = (g * db - dg * b) / det, beta = (a * dg - da * g) / det;
      for (std::size_t i = 0; i < split; ++i) {
        const auto [bi, dbi] = other(grid[i]);
        out.grave[i] = alpha * out.acute[i] + beta * bi;
        out.dgrave[i] = alpha * out.dacute[i] + beta * dbi;
        // the alpha part drops out of the Wronskian analytically
        series_w[i] = beta * (out.acute[i] * dbi - out.dacute[i] * bi);
      }
    }
  }

  // Wronskian at the node closest to u = 0, drift over the grid
  std::size_t ref = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(grid[i]) < std::abs(grid[ref])) ref = i;
  auto wr = [&](std::size_t i) {
    return series_w[i] ? *series_w[i] : out.acute[i] * out.dgrave[i] - out.dacute[i] * out.grave[i];
  };
  out.wronskian = wr(ref);
  const double scale = (std::abs(out.acute[ref]) + std::abs(out.dacute[ref])) *
                       (std::abs(out.grave[ref]) + std::abs(out.dgrave[ref]));
  out.relative_wronskian = scale > 0.0 ? std::abs(out.wronskian) / scale : 0.0;
  double drift = 0.0;
  for (std::size_t i = 0; i < n; ++i) drift = std::max(drift, std::abs(wr(i) - out.wronskian));
  out.wronskian_drift = drift / std::max(std::abs(out.wronskian), 1e-300);
  return out;
}

namespace {

std::pair<cplx, cplx> continue_from_node(const JostPair& pair, const std::vector<cplx>& phi,
                                         const std::vector<cplx>& dphi, double x) {
  if (!(x >= pair.u.front() && x <= pair.u.back()))
    throw std::domain_error("JostPair: evaluation point outside the grid");
  const auto it = std::lower_bound(pair.u.begin(), pair.u.end(), x);
  std::size_t i = std::size_t(it - pair.u.begin());
  if (i < pair.u.size() && pair.u[i] == x) return {phi[i], dphi[i]};
  if (i > 0 && (i == pair.u.size() || x - pair.u[i - 1] < pair.u[i] - x)) --i;
  const double xs[] = {x};
  const auto sol = ode::integrate_schrodinger(pair.potential, pair.u[i], phi[i], dphi[i], xs, pair.tol);
  return {sol.phi[0], sol.dphi[0]};
}

void require_regular(const JostPair& pair) {
  if (!(pair.relative_wronskian > pair.wronskian_threshold))
    throw NearModeError("greens kernel: Wronskian below threshold (near a mode)", pair.omega, pair.lambda);
}

}  // namespace

std::pair<cplx, cplx> JostPair::acute_at(double x) const { return continue_from_node(*this, acute, dacute, x); }
std::pair<cplx, cplx> JostPair::grave_at(double x) const { return continue_from_node(*this, grave, dgrave, x); }

cplx greens_kernel(const JostPair& pair, double u, double v) {
  require_regular(pair);
  const double lo = std::min(u, v), hi = std::max(u, v);
  return pair.acute_at(lo).first * pair.grave_at(hi).first / pair.wronskian;
}

namespace {

// C[i] = int_{u_0}^{u_i} g; cubic-interpolation interval rule on uniform grids, trapezoid otherwise.
std::vector<cplx> cumulative_integral(const std::vector<double>& u, const std::vector<cplx>& g) {
  const std::size_t n = u.size();
  std::vector<cplx> C(n, 0.0);
  bool uniform = n >= 4;
  const double h = n > 1 ? (u.back() - u.front()) / double(n - 1) : 0.0;
  for (std::size_t j = 0; uniform && j + 1 < n; ++j)
    if (std::abs(u[j + 1] - u[j] - h) > 1e-9 * std::abs(h)) uniform = false;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    cplx I;
    if (!uniform) {
      I = 0.5 * (u[k + 1] - u[k]) * (g[k] + g[k + 1]);
    } else if (k == 0) {
      I = h / 24.0 * (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3]);
    } else if (k + 2 == n) {
      I = h / 24.0 * (9.0 * g[k + 1] + 19.0 * g[k] - 5.0 * g[k - 1] + g[k - 2]);
    } else {
      I = h / 24.0 * (-g[k - 1] + 13.0 * g[k] + 13.0 * g[k + 1] - g[k + 2]);
    }
    C[k + 1] = C[k] + I;
  }
  return C;
}

}  // namespace

std::vector<cplx> apply_greens(const JostPair& pair, const std::vector<cplx>& f) {
  require_regular(pair);
  const std::size_t n = pair.u.size();
  if (f.size() != n) throw std::invalid_argument("apply_greens: size mismatch");
  std::vector<cplx> ga(n), gg(n);
  for (std::size_t j = 0; j < n; ++j) {
    ga[j] = pair.acute[j] * f[j];
    gg[j] = pair.grave[j] * f[j];
  }
  const std::vector<cplx> A = cumulative_integral(pair.u, ga), G = cumulative_integral(pair.u, gg);
  std::vector<cplx> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = (pair.grave[i] * A[i] + pair.acute[i] * (G[n - 1] - G[i])) / pair.wronskian;
  return out;
}

ScanResult scan_wronskian(const std::function<RadialPotential(cplx)>& family, const ScanRegion& region,
                          const std::vector<double>& grid, const JostOptions& opts, double tolerance) {
  ScanResult res;
  res.modes = {-1};
  const int nr = region.n_re, ni = region.n_im;
  if (nr < 2 || ni < 2) throw std::invalid_argument("scan: need at least a 2x2 grid");
  std::vector<cplx> w(std::size_t(nr) * ni), wn(std::size_t(nr) * ni);
  std::vector<double> rel(std::size_t(nr) * ni);
  for (int j = 0; j < ni; ++j)
    for (int i = 0; i < nr; ++i) {
      const cplx om(region.re_min + (region.re_max - region.re_min) * i / (nr - 1),
                    region.im_min + (region.im_max - region.im_min) * j / (ni - 1));
      const std::size_t idx = std::size_t(j) * nr + i;
      res.omegas.push_back(om);
      const JostPair pr = jost_solutions(family(om), grid, opts, om);
      w[idx] = pr.wronskian;
      rel[idx] = pr.relative_wronskian;
      wn[idx] = pr.wronskian / std::max(std::abs(pr.wronskian), 1e-300) * pr.relative_wronskian;
    }
  res.wronskians.push_back(wn);

  auto arg_step = [](cplx a, cplx b) { return std::arg(b / a); };
  for (int j = 0; j + 1 < ni; ++j)
    for (int i = 0; i + 1 < nr; ++i) {
      const std::size_t c[4] = {std::size_t(j) * nr + i, std::size_t(j) * nr + i + 1,
                                std::size_t(j + 1) * nr + i + 1, std::size_t(j + 1) * nr + i};
      double total = 0.0;
      for (int e = 0; e < 4; ++e) total += arg_step(w[c[e]], w[c[(e + 1) % 4]]);
      const int winding = int(std::lround(total / (2.0 * std::numbers::pi)));
      double smallest = rel[c[0]];
      for (int e = 1; e < 4; ++e) smallest = std::min(smallest, rel[c[e]]);
      const cplx centre = 0.25 * (res.omegas[c[0]] + res.omegas[c[1]] + res.omegas[c[2]] + res.omegas[c[3]]);
      if (winding > 0 || smallest < tolerance)
        res.hits.push_back({centre, smallest, winding, -1});
      else if (winding < 0)
        res.poles.push_back({centre, smallest, winding, -1});
    }
  return res;
}

ScanResult mode_stability_scan(const KerrParams& geometry, double s, double k, const ScanRegion& region,
                               const std::vector<int>& modes, double l_max, const JostOptions& opts,
                               double tolerance) {
  ScanResult all;
  const std::vector<double> grid = uniform_grid(-opts.u_match, opts.u_match, 241);
  for (int mode : modes) {
    auto family = [&](cplx om) {
      AngularProblem ap;
      ap.s = s;
      ap.k = k;
      ap.a_omega = geometry.a() * om;
      ap.l_max = l_max;
      const auto spec = angular_spectrum(ap);
      if (mode < 0 || mode >= spec.resolved_eigenvalues)
        throw std::invalid_argument("mode_stability_scan: mode index not resolved by the truncation");
      RadialProblem rp;
      rp.geometry = geometry;
      rp.s = s;
      rp.k = k;
      rp.omega = om;
      rp.lambda = spec.eigenvalues[std::size_t(mode)];
      return radial_potential(rp);
    };
    ScanResult one = scan_wronskian(family, region, grid, opts, tolerance);
    if (all.omegas.empty()) all.omegas = one.omegas;
    all.wronskians.push_back(one.wronskians[0]);
    all.modes.push_back(mode);
    for (auto h : one.hits) {
      h.mode = mode;
      all.hits.push_back(h);
    }
    for (auto h : one.poles) {
      h.mode = mode;
      all.poles.push_back(h);
    }
  }
  return all;
}

}  // namespace kerr
