#include <cmath>
#include <random>

#include "kerrstab/angular_spectral.hpp"
#include "kerrstab/cli_io.hpp"
#include "kerrstab/kerr_geometry.hpp"
#include "kerrstab/quadrature.hpp"
#include "kerrstab/radial_ode.hpp"
#include "kerrstab/riccati_certify.hpp"

namespace kerr {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json finish(const std::string& name, const RunConfig& cfg, const fs::path& out, const json& measured,
            const std::vector<std::string>& files) {
  json m = make_manifest(name, cfg, measured, files);
  write_manifest(out, m);
  return m;
}

// Snapshot of phi on the state's u-nodes and Gauss-Legendre angles.
FieldSnapshot snapshot_of(const TwoComponentState& st, double t, int n_theta) {
  FieldSnapshot like;
  like.t = t;
  like.s = st.layout.s;
  like.k = st.layout.k;
  const QuadratureRule q = gauss_legendre(n_theta);
  like.x = q.nodes;
  like.weights = q.weights;
  for (int i = 0; i < st.layout.n_u; ++i) like.u.push_back(st.layout.u(i));
  like.phi = Eigen::MatrixXcd::Zero(st.layout.n_u, n_theta);
  FieldSnapshot out = sample_state(st, like);
  out.t = t;
  return out;
}

TwoComponentState initial_state(const RunConfig& cfg) {
  return standard_bump_state(state_layout(cfg), cfg.data.centre, cfg.data.width);
}

json cmd_geometry(const RunConfig& cfg, const fs::path& out) {
  const KerrParams p(cfg.M, cfg.a);
  const GeometryCache g = make_geometry_cache(p);
  std::vector<std::vector<double>> rows;
  const int n = 200;
  const double lo = std::log(1e-6 * g.r1), hi = std::log(100.0 * cfg.M);
  for (int i = 0; i < n; ++i) {
    const double x = std::exp(lo + (hi - lo) * i / (n - 1));
    rows.push_back({g.r1 + x, delta(p, g.r1 + x), regge_wheeler_u_from_offset(p, x)});
  }
  write_csv(out / "geometry.csv", "r,delta,u", rows);
  json m{{"r1", g.r1}, {"r_minus", g.r_minus}, {"u_offset", g.u_offset}, {"surface_gravity", surface_gravity(p)}};
  return finish("geometry", cfg, out, m, {"geometry.csv"});
}

json cmd_angular(const RunConfig& cfg, const fs::path& out, bool oracle) {
  AngularProblem pr;
  pr.s = cfg.s;
  pr.k = cfg.k;
  pr.a_omega = cfg.a * cplx(cfg.angular.omega_re, cfg.angular.omega_im);
  pr.l_max = cfg.angular.l_max;
  ClusterOptions co{cfg.angular.cluster0_size, cfg.angular.merge_fraction, cfg.angular.jordan_tolerance};
  const AngularSpectrum sp = angular_spectrum(pr, co);
  json eig = json::array();
  for (cplx l : sp.eigenvalues) eig.push_back(complex_json(l));
  std::vector<SpectralProjector> Q;
  json clusters = json::array();
  double idem = 0.0, cross = 0.0, max_norm = 0.0;
  for (int n = 0; n < sp.resolved_clusters; ++n) {
    Q.push_back(projector(sp, n));
    idem = std::max(idem, (Q[n].action * Q[n].action - Q[n].action).norm());
    max_norm = std::max(max_norm, Q[n].norm);
    clusters.push_back({{"members", sp.clusters[n]}, {"dim", Q[n].dim}, {"norm", Q[n].norm},
                        {"defective", static_cast<bool>(sp.defective[n])}});
  }
  for (std::size_t n = 0; n < Q.size(); ++n)
    for (std::size_t m = 0; m < Q.size(); ++m)
      if (n != m) cross = std::max(cross, (Q[n].action * Q[m].action).norm());
  json doc{{"eigenvalues", eig},
           {"clusters", clusters},
           {"resolved_eigenvalues", sp.resolved_eigenvalues},
           {"resolved_clusters", sp.resolved_clusters},
           {"cluster0_threshold", sp.cluster0_threshold}};
  json m{{"idempotency_error", idem}, {"orthogonality_error", cross}, {"max_projector_norm", max_norm}};
  if (oracle) {
    if (pr.a_omega.imag() != 0.0) throw std::invalid_argument("angular-modes --oracle needs real a*omega");
    const int count = std::min(5, sp.resolved_eigenvalues);
    const auto ref = angular_fd_eigenvalues(pr.s, pr.k, pr.a_omega.real(), cfg.angular.oracle_cells, count);
    double diff = 0.0;
    for (int i = 0; i < count; ++i) diff = std::max(diff, std::abs(sp.eigenvalues[i] - ref[i]));
    doc["oracle_eigenvalues"] = ref;
    m["oracle_max_difference"] = diff;
  }
  write_text(out / "angular.json", doc.dump(2) + "\n");
  return finish("angular-modes", cfg, out, m, {"angular.json"});
}

cplx angular_lambda(const RunConfig& cfg, cplx omega, int mode, double l_max) {
  AngularProblem pr;
  pr.s = cfg.s;
  pr.k = cfg.k;
  pr.a_omega = cfg.a * omega;
  pr.l_max = l_max;
  const AngularSpectrum sp = angular_spectrum(pr);
  if (mode >= sp.resolved_eigenvalues) throw std::invalid_argument("radial.mode exceeds the resolved angular eigenvalues");
  return sp.eigenvalues[mode];
}

json cmd_radial(const RunConfig& cfg, const fs::path& out) {
  const cplx om(cfg.radial.omega_re, cfg.radial.omega_im);
  RadialProblem pr;
  pr.geometry = KerrParams(cfg.M, cfg.a);
  pr.s = cfg.s;
  pr.k = cfg.k;
  pr.omega = om;
  pr.lambda = angular_lambda(cfg, om, cfg.radial.mode, cfg.radial.l_max);
  JostOptions jo;
  jo.u_match = cfg.radial.u_match;
  const auto grid = uniform_grid(cfg.radial.u_min, cfg.radial.u_max, cfg.radial.n_u);
  const JostPair pair = jost_solutions(pr, grid, jo);
  std::vector<std::vector<double>> pot, ker;
  for (double u : grid) {
    const cplx v = pair.potential(u);
    const cplx s = greens_kernel(pair, u, cfg.radial.kernel_v);
    pot.push_back({u, v.real(), v.imag()});
    ker.push_back({u, s.real(), s.imag()});
  }
  write_csv(out / "potential.csv", "u,re_v,im_v", pot);
  write_csv(out / "kernel.csv", "u,re_s,im_s", ker);
  json m{{"lambda", complex_json(pr.lambda)},
         {"wronskian", complex_json(pair.wronskian)},
         {"wronskian_drift", pair.wronskian_drift},
         {"relative_wronskian", pair.relative_wronskian},
         {"u_left", pair.u_left},
         {"u_right", pair.u_right}};
  return finish("radial-green", cfg, out, m, {"potential.csv", "kernel.csv"});
}

json cmd_scan(const RunConfig& cfg, const fs::path& out) {
  ScanRegion reg;
  reg.re_min = cfg.scan.re_min;
  reg.re_max = cfg.scan.re_max;
  reg.im_min = cfg.scan.im_min;
  reg.im_max = cfg.scan.im_max;
  reg.n_re = cfg.scan.n_re;
  reg.n_im = cfg.scan.n_im;
  const ScanResult res = mode_stability_scan(KerrParams(cfg.M, cfg.a), cfg.s, cfg.k, reg, cfg.scan.modes,
                                             cfg.scan.l_max, JostOptions{}, cfg.scan.tolerance);
  json omegas = json::array(), hits = json::array(), poles = json::array(), w = json::array();
  for (cplx o : res.omegas) omegas.push_back(complex_json(o));
  for (const auto& row : res.wronskians) {
    json r = json::array();
    for (cplx z : row) r.push_back(complex_json(z));
    w.push_back(r);
  }
  for (const auto& h : res.hits)
    hits.push_back({{"omega", complex_json(h.omega)}, {"relative_wronskian", h.relative_wronskian},
                    {"winding", h.winding}, {"mode", h.mode}});
  for (const auto& h : res.poles)
    poles.push_back({{"omega", complex_json(h.omega)}, {"winding", h.winding}, {"mode", h.mode}});
  json doc{{"omegas", omegas}, {"modes", res.modes}, {"wronskians", w}, {"hits", hits}, {"poles", poles}};
  write_text(out / "scan.json", doc.dump(2) + "\n");
  return finish("mode-scan", cfg, out, json{{"hits", res.hits.size()}, {"poles", res.poles.size()}}, {"scan.json"});
}

json cmd_certify(const RunConfig& cfg, const fs::path& out) {
  const auto& c = cfg.certify;
  std::function<cplx(double)> V;
  json family;
  if (c.family == "random") {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const cplx c0(1.5 + 2.5 * U(rng), -1.0 + 2.0 * U(rng));
    std::array<cplx, 3> amp;
    std::array<double, 3> freq, phase;
    for (int j = 0; j < 3; ++j) {
      amp[j] = std::polar(0.3 * U(rng), 2.0 * std::numbers::pi * U(rng));
      freq[j] = 0.5 + 2.5 * U(rng);
      phase[j] = 2.0 * std::numbers::pi * U(rng);
    }
    V = [=](double u) {
      cplx v = c0;
      for (int j = 0; j < 3; ++j) v += amp[j] * std::sin(freq[j] * u + phase[j]);
      return v;
    };
    family = {{"constant", complex_json(c0)}, {"frequencies", freq}, {"phases", phase}};
  } else {
    const cplx v0(c.v0_re, c.v0_im), amp(c.amplitude_re, c.amplitude_im);
    V = [=](double u) { return v0 + amp * std::sin(c.frequency * u + c.phase); };
  }
  const auto path = wkb_center(V, uniform_grid(c.u0, c.u1, 501), cplx(1.0));
  RiccatiProblem pr;
  pr.V = V;
  pr.u0 = c.u0;
  pr.u1 = c.u1;
  pr.y0 = path.m(c.u0);
  pr.initial_disk = {pr.y0, c.initial_radius};
  CertifyOptions opts;
  opts.margin = c.margin;
  opts.nodes_per_phase = c.nodes_per_phase;
  const CertifiedEnclosure enc = certify(pr, path, opts);
  const auto y = riccati_flow(pr, enc.nodes);
  int outside = 0;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < enc.nodes.size(); ++i) {
    const Disk& d = enc.disks[i];
    rows.push_back({enc.nodes[i], d.m.real(), d.m.imag(), d.R, std::abs(enc.dm[i])});
    if (!d.contains(y[i], 1e-10 * (1.0 + std::abs(y[i])))) ++outside;
  }
  write_csv(out / "enclosure.csv", "u,re_center,im_center,radius,abs_defect", rows);
  json m{{"certified", enc.certified},
         {"refinements", enc.refinements},
         {"nodes", enc.nodes.size()},
         {"reference_outside", outside},
         {"failure_reason", enc.failure_reason}};
  if (enc.failure_point) m["failure_point"] = *enc.failure_point;
  if (!family.is_null()) m["random_family"] = family;
  return finish("certify", cfg, out, m, {"enclosure.csv"});
}

json evolution_measured(const Hamiltonian& H, const SeparatedEvolution& ev) {
  json ledger = json::array();
  for (const auto& e : ev.ledger)
    ledger.push_back({{"cluster", e.cluster}, {"resolved", e.resolved}, {"integrand_l1", e.integrand_l1},
                      {"final_norm", e.final_norm}});
  return {{"method", "separated"},
          {"c_hat", H.c_hat()},
          {"c", ev.c},
          {"p", ev.p},
          {"omega_max", ev.omega_max},
          {"tail_estimate", ev.tail_estimate},
          {"tail_change", ev.tail_change},
          {"epsilon_spread", ev.epsilon_spread},
          {"far_branch", ev.far_branch},
          {"partial_sum_change", ev.partial_sum_change},
          {"ledger", ledger},
          {"frequency_nodes", ev.frequency_nodes},
          {"radial_solves", ev.radial_solves}};
}

json cmd_evolve(const RunConfig& cfg, const fs::path& out, bool decay_only) {
  const StateLayout L = state_layout(cfg);
  const Hamiltonian H(L, hamiltonian_options(cfg));
  const TwoComponentState psi0 = initial_state(cfg);
  std::vector<TwoComponentState> states;
  json m;
  std::vector<double> sup, unc;
  if (cfg.contour.method == "contour" && !decay_only) {
    const ContourEvolution ev = evolve_contour(H, psi0, cfg.schedule, hamiltonian_config(cfg));
    states = ev.states;
    m = {{"method", "contour"},   {"c_hat", ev.c_hat},         {"c", ev.c},
         {"p", ev.p},             {"omega_max", ev.omega_max}, {"error_estimate", ev.error_estimate},
         {"closure", ev.closure}, {"resolvent_solves", ev.resolvent_solves}};
    for (const auto& st : states) sup.push_back(sup_abs_phi(st, cfg.region));
  } else {
    const DecaySeries d = decay_experiment(H, psi0, cfg.schedule, cfg.region, hamiltonian_config(cfg),
                                           separated_options(cfg));
    states = d.evolution.states;
    sup = d.sup_abs_phi;
    m = evolution_measured(H, d.evolution);
    m["initial_sup"] = d.initial_sup;
    m["uncertainty"] = d.uncertainty;
    m["decreasing_from"] = decreasing_from(d);
  }
  std::vector<std::string> files{"decay.csv"};
  write_decay_csv(out / "decay.csv", cfg.schedule, sup);
  if (!decay_only) {
    std::vector<FieldSnapshot> snaps;
    for (std::size_t j = 0; j < states.size(); ++j) snaps.push_back(snapshot_of(states[j], cfg.schedule[j], cfg.snapshot_theta));
    write_snapshots_csv(out / "snapshots.csv", snaps);
    files.push_back("snapshots.csv");
  }
  return finish(decay_only ? "decay" : "evolve", cfg, out, m, files);
}

json cmd_oracle(const RunConfig& cfg, const fs::path& out) {
  const SpinWeightedBasis basis(cfg.s, cfg.k, cfg.grid.n_angular);
  const double c0 = cfg.data.centre, w = cfg.data.width;
  auto phi0 = [&](double u, double th) {
    const double t = (u - c0) / w;
    return cplx(std::exp(-0.5 * t * t) * basis.values(std::cos(th))[0]);
  };
  OracleOptions oo;
  oo.threads = cfg.threads;
  const OracleRun run = evolve_fd(phi0, [](double, double) { return cplx(0.0); }, cfg.schedule, cfg.oracle,
                                  OracleMode{KerrParams(cfg.M, cfg.a), cfg.s, cfg.k, false}, oo);
  const QuadratureRule q = gauss_legendre(cfg.snapshot_theta);
  std::vector<FieldSnapshot> snaps;
  std::vector<double> sup;
  for (const auto& s : run.snapshots) {
    sup.push_back(sup_abs_phi(s, cfg.region));
    FieldSnapshot r;
    r.t = s.t;
    r.s = s.s;
    r.k = s.k;
    r.x = q.nodes;
    r.weights = q.weights;
    std::vector<int> rows;
    for (std::size_t i = 0; i < s.u.size(); ++i)
      if (s.u[i] >= cfg.grid.u_min - 1e-9 && s.u[i] <= cfg.grid.u_max + 1e-9) rows.push_back(static_cast<int>(i));
    r.phi.resize(static_cast<Eigen::Index>(rows.size()), q.nodes.size());
    for (std::size_t n = 0; n < rows.size(); ++n) {
      r.u.push_back(s.u[rows[n]]);
      for (std::size_t j = 0; j < q.nodes.size(); ++j) r.phi(n, j) = s.value(rows[n], std::acos(q.nodes[j]));
    }
    snaps.push_back(std::move(r));
  }
  write_snapshots_csv(out / "snapshots.csv", snaps);
  write_decay_csv(out / "decay.csv", cfg.schedule, sup);
  json m{{"dt", run.dt},
         {"spectral_radius", run.spectral_radius},
         {"stability_limit", run.stability_limit},
         {"steps", run.steps},
         {"sentinel", run.sentinel},
         {"max_growth", run.max_growth}};
  return finish("oracle-evolve", cfg, out, m, {"snapshots.csv", "decay.csv"});
}

json cmd_compare(const RunConfig& cfg, const fs::path& out, const std::vector<fs::path>& files) {
  if (files.size() != 2) throw std::invalid_argument("compare needs two snapshot files");
  const auto a = read_snapshots_csv(files[0]);
  const auto b = read_snapshots_csv(files[1]);
  std::vector<std::vector<double>> rows;
  double worst = 0.0;
  for (const auto& sa : a)
    for (const auto& sb : b)
      if (sa.t == sb.t) {
        const double d = relative_l2_difference(sa, sb);
        rows.push_back({sa.t, d});
        worst = std::max(worst, d);
      }
  if (rows.empty()) throw std::invalid_argument("compare: the snapshot files share no time");
  write_csv(out / "compare.csv", "t,relative_l2", rows);
  json m{{"max_relative_l2", worst}, {"inputs", {files[0].string(), files[1].string()}}};
  return finish("compare", cfg, out, m, {"compare.csv"});
}

}  // namespace

std::vector<std::string> command_names() {
  return {"geometry", "angular-modes", "radial-green", "mode-scan", "certify",
          "evolve",   "oracle-evolve", "compare",      "decay"};
}

nlohmann::json run_command(const std::string& name, const RunConfig& cfg, const fs::path& out,
                           const CommandInputs& inputs) {
  if (name == "geometry") return cmd_geometry(cfg, out);
  if (name == "angular-modes") return cmd_angular(cfg, out, inputs.angular_oracle);
  if (name == "radial-green") return cmd_radial(cfg, out);
  if (name == "mode-scan") return cmd_scan(cfg, out);
  if (name == "certify") return cmd_certify(cfg, out);
  if (name == "evolve") return cmd_evolve(cfg, out, false);
  if (name == "decay") return cmd_evolve(cfg, out, true);
  if (name == "oracle-evolve") return cmd_oracle(cfg, out);
  if (name == "compare") return cmd_compare(cfg, out, inputs.files);
  throw std::invalid_argument("unknown command " + name);
}

}  // namespace kerr
