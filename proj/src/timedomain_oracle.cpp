#include "kerrstab/timedomain_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <string>

#include "kerrstab/quadrature.hpp"

namespace kerr {

namespace {

using Field = Eigen::MatrixXcd;  // rows: u-nodes, columns: angles

struct Angular {
  std::vector<double> x, w;
  Eigen::VectorXd regular;  // (1-x)^alpha (1+x)^beta at the nodes
  Eigen::VectorXd bary;
  Eigen::MatrixXd L;        // acts on phi values at the nodes
  double alpha = 0.0, beta = 0.0;
};

Angular make_angular(int n, double s, double k) {
  Angular A;
  const QuadratureRule q = gauss_legendre(n);
  A.x = q.nodes;
  A.w = q.weights;
  A.alpha = std::abs(k - s) / 2.0;
  A.beta = std::abs(k + s) / 2.0;
  A.bary = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) A.bary[i] /= A.x[i] - A.x[j];
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (i != j) D(i, j) = A.bary[j] / A.bary[i] / (A.x[i] - A.x[j]);
    D(i, i) = -D.row(i).sum();
  }
  const Eigen::MatrixXd D2 = D * D;
  // For phi = regular * f: L phi / regular = (1-x^2) f'' + 2(G - x) f' + C f.
  const double C = (A.beta - A.alpha) * (A.beta - A.alpha) - k * k - A.alpha - A.beta;
  Eigen::MatrixXd Lf(n, n);
  A.regular.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = A.x[i];
    const double G = -A.alpha * (1.0 + x) + A.beta * (1.0 - x);
    Lf.row(i) = (1.0 - x * x) * D2.row(i) + 2.0 * (G - x) * D.row(i);
    Lf(i, i) += C;
    A.regular[i] = std::pow(1.0 - x, A.alpha) * std::pow(1.0 + x, A.beta);
  }
  A.L = A.regular.asDiagonal() * Lf * A.regular.cwiseInverse().asDiagonal();
  return A;
}

struct Coefficients {
  std::vector<cplx> V;
  std::vector<double> D, weight;
  Field B;                // first-order term including the damping layer
  Eigen::MatrixXd m_inv;
  std::vector<char> in_sponge;
};

Coefficients make_coefficients(const FDGrid& g, const OracleMode& mode, const Angular& A) {
  const double M = mode.geometry.M(), a = mode.geometry.a(), s = mode.s, k = mode.k;
  const int nu = g.n_u, nt = g.n_theta;
  Coefficients c;
  c.V.assign(nu, 0.0);
  c.D.assign(nu, 0.0);
  c.weight.assign(nu, 1.0);
  c.B = Field::Zero(nu, nt);
  c.m_inv = Eigen::MatrixXd::Ones(nu, nt);
  c.in_sponge.assign(nu, 0);
  for (int i = 0; i < nu; ++i) {
    const double u = g.u(i);
    const double r = regge_wheeler_r(mode.geometry, u);
    const double rho2 = r * r + a * a;
    const double Delta = r * r - 2.0 * M * r + a * a;
    c.weight[i] = std::sqrt(rho2);
    double sigma = 0.0;
    const double dl = g.u_min + g.sponge_width - u, dr = u - (g.u_max - g.sponge_width);
    if (dl > 0.0) sigma = g.sponge_strength * (dl / g.sponge_width) * (dl / g.sponge_width);
    if (dr > 0.0) sigma = g.sponge_strength * (dr / g.sponge_width) * (dr / g.sponge_width);
    c.in_sponge[i] = dl > 0.0 || dr > 0.0;
    if (mode.frozen_far) {
      for (int j = 0; j < nt; ++j) c.B(i, j) = -sigma;
      continue;
    }
    // (d_u^2 sqrt(rho2)) / sqrt(rho2) with dr/du = Delta/rho2.
    const double drdu = Delta / rho2;
    const double f_r = r / std::sqrt(rho2);
    const double f_rr = a * a / (rho2 * std::sqrt(rho2));
    const double d_drdu = ((2.0 * r - 2.0 * M) * rho2 - Delta * 2.0 * r) / (rho2 * rho2);
    const double curvature = (drdu * drdu * f_rr + drdu * d_drdu * f_r) / std::sqrt(rho2);
    const cplx beta(-(r - M) * s, -a * k);
    c.V[i] = curvature + beta * beta / (rho2 * rho2);
    c.D[i] = Delta / (rho2 * rho2);
    for (int j = 0; j < nt; ++j) {
      const double x = A.x[j];
      const cplx first = -2.0 * beta / rho2 - c.D[i] * cplx(4.0 * s * r, 2.0 * s * a * x + 2.0 * a * k);
      c.B(i, j) = first - sigma;
      c.m_inv(i, j) = 1.0 / (1.0 - a * a * c.D[i] * (1.0 - x * x));
    }
  }
  return c;
}

template <class F>
void parallel_rows(int n, int threads, F&& f) {
  if (threads <= 1 || n < 64) {
    f(0, n);
    return;
  }
  std::vector<std::future<void>> jobs;
  const int chunk = (n + threads - 1) / threads;
  for (int b = 0; b < n; b += chunk) jobs.push_back(std::async(std::launch::async, f, b, std::min(n, b + chunk)));
  for (auto& j : jobs) j.get();
}

class Operator {
 public:
  Operator(const FDGrid& g, const Angular& A, const Coefficients& c, int threads)
      : g_(g), A_(A), c_(c), threads_(threads) {}

  // (P, Q) -> (Q, Q_t)
  void apply(const Field& P, const Field& Q, Field& dP, Field& dQ) const {
    const int nu = g_.n_u, nt = g_.n_theta;
    const double ih2 = 1.0 / (12.0 * g_.h() * g_.h());
    dP = Q;
    dQ.resize(nu, nt);
    const Eigen::MatrixXd Lt = A_.L.transpose();
    parallel_rows(nu, threads_, [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i) {
        Eigen::RowVectorXcd uu;
        if (i >= 2 && i < nu - 2) {
          uu = (-P.row(i - 2) + 16.0 * P.row(i - 1) - 30.0 * P.row(i) + 16.0 * P.row(i + 1) - P.row(i + 2)) * ih2;
        } else {
          const int e = i < 2 ? 0 : nu - 1, d = i < 2 ? 1 : -1, o = i < 2 ? i : nu - 1 - i;
          auto p = [&](int n) { return P.row(e + d * n); };
          if (o == 0)
            uu = (45.0 * p(0) - 154.0 * p(1) + 214.0 * p(2) - 156.0 * p(3) + 61.0 * p(4) - 10.0 * p(5)) * ih2;
          else
            uu = (10.0 * p(0) - 15.0 * p(1) - 4.0 * p(2) + 14.0 * p(3) - 6.0 * p(4) + p(5)) * ih2;
        }
        Eigen::RowVectorXcd rhs = uu - c_.V[i] * P.row(i);
        if (c_.D[i] != 0.0) rhs += c_.D[i] * (P.row(i) * Lt);
        rhs += c_.B.row(i).cwiseProduct(Q.row(i));
        dQ.row(i) = rhs.cwiseProduct(c_.m_inv.row(i).cast<cplx>());
      }
    });
  }

 private:
  const FDGrid& g_;
  const Angular& A_;
  const Coefficients& c_;
  int threads_;
};

double sup_abs(const Field& P) { return P.cwiseAbs().maxCoeff(); }

}  // namespace

void FDGrid::validate() const {
  if (!(u_max > u_min) || n_u < 16) throw std::invalid_argument("FDGrid: need u_max > u_min and n_u >= 16");
  if (n_theta < 2) throw std::invalid_argument("FDGrid: n_theta must be at least 2");
  if (!(cfl_factor > 0.0 && cfl_factor <= 0.5))
    throw std::invalid_argument("FDGrid: cfl_factor must lie in (0, 0.5]");
  if (!(sponge_width >= 0.0) || 2.0 * sponge_width >= u_max - u_min || sponge_strength < 0.0)
    throw std::invalid_argument("FDGrid: damping layers must be non-negative and leave an interior");
}

cplx FieldSnapshot::value(int i, double theta) const {
  const int n = static_cast<int>(x.size());
  const double xt = std::cos(theta);
  const double alpha = std::abs(k - s) / 2.0, beta = std::abs(k + s) / 2.0;
  auto regular = [&](double y) { return std::pow(1.0 - y, alpha) * std::pow(1.0 + y, beta); };
  cplx num = 0.0;
  double den = 0.0;
  for (int j = 0; j < n; ++j) {
    double b = 1.0;
    for (int l = 0; l < n; ++l)
      if (l != j) b /= x[j] - x[l];
    const cplx f = phi(i, j) / regular(x[j]);
    if (xt == x[j]) return phi(i, j);
    const double wj = b / (xt - x[j]);
    num += wj * f;
    den += wj;
  }
  return num / den * regular(xt);
}

OracleRun evolve_fd(const std::function<cplx(double, double)>& phi0,
                    const std::function<cplx(double, double)>& phi1, const std::vector<double>& times,
                    const FDGrid& grid, const OracleMode& mode, const OracleOptions& opts) {
  grid.validate();
  for (std::size_t n = 0; n < times.size(); ++n)
    if (!(times[n] >= 0.0) || (n > 0 && times[n] < times[n - 1]))
      throw std::invalid_argument("evolve_fd: times must be ascending and non-negative");
  const int nu = grid.n_u, nt = grid.n_theta;
  const Angular A = make_angular(nt, mode.s, mode.k);
  const Coefficients C = make_coefficients(grid, mode, A);

  Field P(nu, nt), Q(nu, nt);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nt; ++j) {
      const double u = grid.u(i), th = std::acos(A.x[j]);
      P(i, j) = C.weight[i] * phi0(u, th);
      Q(i, j) = C.weight[i] * phi1(u, th);
    }
  const double initial = std::max(sup_abs(P), sup_abs(Q));
  double layer = 0.0;
  for (int i = 0; i < nu; ++i)
    if (C.in_sponge[i] || i < 4 || i >= nu - 4) layer = std::max({layer, P.row(i).cwiseAbs().maxCoeff(), Q.row(i).cwiseAbs().maxCoeff()});
  if (layer > 1e-14 * initial) throw SupportError("evolve_fd: data reach the damping layers");

  const Operator op(grid, A, C, opts.threads);
  OracleRun run;
  {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    Field p(nu, nt), q(nu, nt), dp, dq;
    for (int i = 0; i < nu; ++i)
      for (int j = 0; j < nt; ++j) {
        p(i, j) = cplx(nd(rng), nd(rng));
        q(i, j) = cplx(nd(rng), nd(rng));
      }
    double lambda = 0.0;
    for (int it = 0; it < opts.probe_iterations; ++it) {
      const double nrm = std::sqrt(p.squaredNorm() + q.squaredNorm());
      p /= nrm;
      q /= nrm;
      op.apply(p, q, dp, dq);
      lambda = std::max(lambda, std::sqrt(dp.squaredNorm() + dq.squaredNorm()));
      p = dp;
      q = dq;
    }
    run.spectral_radius = lambda;
    run.stability_limit = 2.8 / lambda;
  }
  const double dt_max = grid.cfl_factor * run.stability_limit;
  run.dt = dt_max;

  auto snapshot = [&](double t) {
    FieldSnapshot s;
    s.t = t;
    s.s = mode.s;
    s.k = mode.k;
    s.x = A.x;
    s.weights = A.w;
    s.u.resize(nu);
    s.phi.resize(nu, nt);
    double sponge = 0.0;
    for (int i = 0; i < nu; ++i) {
      s.u[i] = grid.u(i);
      s.phi.row(i) = P.row(i) / C.weight[i];
      if (C.in_sponge[i]) sponge = std::max(sponge, P.row(i).cwiseAbs().maxCoeff());
    }
    run.snapshots.push_back(std::move(s));
    run.sentinel.push_back(initial > 0.0 ? sponge / initial : 0.0);
  };

  Field k1p, k1q, k2p, k2q, k3p, k3q, k4p, k4q;
  double t = 0.0;
  for (double target : times) {
    const double span = target - t;
    const int steps = span > 0.0 ? static_cast<int>(std::ceil(span / dt_max - 1e-12)) : 0;
    const double dt = steps > 0 ? span / steps : 0.0;
    for (int n = 0; n < steps; ++n) {
      op.apply(P, Q, k1p, k1q);
      op.apply(P + 0.5 * dt * k1p, Q + 0.5 * dt * k1q, k2p, k2q);
      op.apply(P + 0.5 * dt * k2p, Q + 0.5 * dt * k2q, k3p, k3q);
      op.apply(P + dt * k3p, Q + dt * k3q, k4p, k4q);
      P += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
      Q += dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
      ++run.steps;
      if (run.steps % 16 == 0 || n + 1 == steps) {
        const double now = sup_abs(P);
        if (!std::isfinite(now) || (initial > 0.0 && now > opts.growth_limit * initial))
          throw InstabilityError("evolve_fd: sup |psi| grew to " + std::to_string(now) + " times " +
                                 std::to_string(initial) + " by t = " + std::to_string(t + (n + 1) * dt) +
                                 " (dt " + std::to_string(dt) + ", spectral radius " +
                                 std::to_string(run.spectral_radius) + ")");
        if (initial > 0.0) run.max_growth = std::max(run.max_growth, now / initial);
      }
    }
    t = target;
    snapshot(t);
  }
  return run;
}

FieldSnapshot sample_state(const TwoComponentState& state, const FieldSnapshot& like) {
  FieldSnapshot out = like;
  out.phi.setZero();
  out.s = state.layout.s;
  out.k = state.layout.k;
  const StateLayout& L = state.layout;
  for (std::size_t i = 0; i < like.u.size(); ++i) {
    const double pos = (like.u[i] - L.u_min) / L.h();
    const int n = static_cast<int>(std::lround(pos));
    if (std::abs(pos - n) > 1e-6 || n < 0 || n >= L.n_u) continue;
    for (std::size_t j = 0; j < like.x.size(); ++j)
      out.phi(i, j) = field_value(state, n, std::acos(like.x[j]));
  }
  return out;
}

namespace {

double l2_difference(const FieldSnapshot& a, const FieldSnapshot& b, const std::vector<int>& rows_a,
                     const std::vector<int>& rows_b, double& ref) {
  double diff = 0.0;
  ref = 0.0;
  for (std::size_t n = 0; n < rows_a.size(); ++n)
    for (std::size_t j = 0; j < a.x.size(); ++j) {
      diff += a.weights[j] * std::norm(a.phi(rows_a[n], j) - b.phi(rows_b[n], j));
      ref += a.weights[j] * std::norm(b.phi(rows_b[n], j));
    }
  return diff;
}

}  // namespace

double relative_l2_difference(const FieldSnapshot& a, const TwoComponentState& b) {
  const FieldSnapshot sb = sample_state(b, a);
  const StateLayout& L = b.layout;
  std::vector<int> rows;
  for (std::size_t i = 0; i < a.u.size(); ++i) {
    const double pos = (a.u[i] - L.u_min) / L.h();
    if (std::abs(pos - std::lround(pos)) <= 1e-6 && pos > -0.5 && pos < L.n_u - 0.5) rows.push_back(static_cast<int>(i));
  }
  double ref = 0.0;
  const double diff = l2_difference(a, sb, rows, rows, ref);
  return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

double relative_l2_difference(const FieldSnapshot& a, const FieldSnapshot& b) {
  if (a.x != b.x) throw std::invalid_argument("relative_l2_difference: snapshots use different angles");
  std::vector<int> ra, rb;
  const double hb = b.u.size() > 1 ? b.u[1] - b.u[0] : 1.0;
  for (std::size_t i = 0; i < a.u.size(); ++i) {
    const double pos = (a.u[i] - b.u.front()) / hb;
    const long n = std::lround(pos);
    if (std::abs(pos - n) <= 1e-6 && n >= 0 && n < static_cast<long>(b.u.size())) {
      ra.push_back(static_cast<int>(i));
      rb.push_back(static_cast<int>(n));
    }
  }
  double ref = 0.0;
  const double diff = l2_difference(a, b, ra, rb, ref);
  return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

}  // namespace kerr
