#include "kerrstab/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace kerr {

namespace {

constexpr int kEdge = 4;  // nodes that must stay free of data at each end

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-12; }

}  // namespace

void StateLayout::validate() const {
  if (!(s >= 0.0) || !is_integer(2.0 * s)) throw std::invalid_argument("StateLayout: 2s must be a non-negative integer");
  if (!is_integer(k - s)) throw std::invalid_argument("StateLayout: k - s must be an integer");
  if (!(u_max > u_min)) throw std::invalid_argument("StateLayout: need u_max > u_min");
  if (n_u < 2 * kEdge + 5) throw std::invalid_argument("StateLayout: too few u-nodes");
  if (n_angular < 1) throw std::invalid_argument("StateLayout: need at least one angular basis function");
}

TwoComponentState TwoComponentState::zero(const StateLayout& layout) {
  TwoComponentState z;
  z.layout = layout;
  z.psi1 = Eigen::VectorXcd::Zero(layout.size());
  z.psi2 = Eigen::VectorXcd::Zero(layout.size());
  return z;
}

TwoComponentState& TwoComponentState::operator+=(const TwoComponentState& o) {
  psi1 += o.psi1;
  psi2 += o.psi2;
  return *this;
}

TwoComponentState& TwoComponentState::operator*=(cplx z) {
  psi1 *= z;
  psi2 *= z;
  return *this;
}

TwoComponentState operator+(TwoComponentState a, const TwoComponentState& b) { return a += b; }
TwoComponentState operator-(TwoComponentState a, const TwoComponentState& b) {
  a.psi1 -= b.psi1;
  a.psi2 -= b.psi2;
  return a;
}
TwoComponentState operator*(cplx z, TwoComponentState a) { return a *= z; }

namespace {

double weight_of(const StateLayout& L, int i) {
  const double r = regge_wheeler_r(L.geometry, L.u(i));
  return std::sqrt(r * r + L.geometry.a() * L.geometry.a());
}

void check_support(const TwoComponentState& st) {
  const int na = st.layout.n_angular, nu = st.layout.n_u;
  const double peak = std::max(st.psi1.cwiseAbs().maxCoeff(), st.psi2.cwiseAbs().maxCoeff());
  if (peak == 0.0) return;
  for (int i = 0; i < nu; ++i) {
    if (i >= kEdge && i < nu - kEdge) continue;
    for (int n = 0; n < na; ++n) {
      const int j = i * na + n;
      if (std::abs(st.psi1[j]) > 1e-14 * peak || std::abs(st.psi2[j]) > 1e-14 * peak) {
        std::ostringstream msg;
        msg << "to_hamiltonian_state: data reach the grid boundary at u = " << st.layout.u(i);
        throw SupportError(msg.str());
      }
    }
  }
}

}  // namespace

TwoComponentState to_hamiltonian_state(const std::function<cplx(double, double)>& phi0,
                                       const std::function<cplx(double, double)>& phi1,
                                       const StateLayout& layout) {
  layout.validate();
  const SpinWeightedBasis basis(layout.s, layout.k, layout.n_angular);
  TwoComponentState st = TwoComponentState::zero(layout);
  const int na = layout.n_angular;
  for (int i = 0; i < layout.n_u; ++i) {
    const double u = layout.u(i);
    const double w = weight_of(layout, i);
    const Eigen::VectorXcd c0 = basis.project([&](double x) { return phi0(u, std::acos(x)); });
    const Eigen::VectorXcd c1 = basis.project([&](double x) { return phi1(u, std::acos(x)); });
    st.psi1.segment(i * na, na) = w * c0;
    st.psi2.segment(i * na, na) = cplx(0.0, w) * c1;
  }
  check_support(st);
  return st;
}

Eigen::VectorXcd field_coefficients(const TwoComponentState& state, int i) {
  const int na = state.layout.n_angular;
  return state.psi1.segment(i * na, na) / weight_of(state.layout, i);
}

cplx field_value(const TwoComponentState& state, int i, double theta) {
  const SpinWeightedBasis basis(state.layout.s, state.layout.k, state.layout.n_angular);
  return basis.evaluate(field_coefficients(state, i), std::cos(theta));
}

// ---------------------------------------------------------------------------

Hamiltonian::Hamiltonian(const StateLayout& layout, const HamiltonianOptions& opts)
    : layout_(layout), opts_(opts), na_(layout.n_angular), nu_(layout.n_u) {
  layout_.validate();
  if (!(opts.weight > 0.0)) throw std::invalid_argument("Hamiltonian: weight must be positive");
  const SpinWeightedBasis basis(layout.s, layout.k, na_);
  const Eigen::MatrixXd X = basis.x_matrix(), X2 = basis.x2_matrix();
  const Eigen::MatrixXd Id = Eigen::MatrixXd::Identity(na_, na_);
  a0_.resize(na_);
  for (int n = 0; n < na_; ++n) a0_[n] = basis.diagonal(n);

  const double M = layout.geometry.M(), a = layout.geometry.a(), s = layout.s, k = layout.k;
  const GeometryCache cache = make_geometry_cache(layout.geometry);
  const double d = cache.r1 - cache.r_minus;
  const cplx I(0.0, 1.0);
  sqrt_rho2_.resize(nu_);
  dr4_.resize(nu_);
  q_.resize(nu_);
  t1_.resize(nu_);
  m_.resize(nu_);
  m_inv_.resize(nu_);
  m_llt_.resize(nu_);
  for (int i = 0; i < nu_; ++i) {
    const double x = regge_wheeler_offset(layout.geometry, layout.u(i));
    const double r = cache.r1 + x;
    const double rho2 = r * r + a * a;
    const double Delta = x * (x + d);
    const double dDelta = 2.0 * (r - M);
    const double curv = Delta / (rho2 * rho2 * rho2) * (dDelta * r + Delta - 3.0 * Delta * r * r / rho2);
    const cplx beta = -I * a * k - (r - M) * s;
    sqrt_rho2_[i] = std::sqrt(rho2);
    dr4_[i] = Delta / (rho2 * rho2);
    q_[i] = curv + beta * beta / (rho2 * rho2);
    const cplx scalar = (-2.0 * a * k + 2.0 * I * (r - M) * s) / rho2 + dr4_[i] * (-4.0 * I * s * r + 2.0 * k * a);
    t1_[i] = scalar * Id.cast<cplx>() + (dr4_[i] * 2.0 * a * s) * X.cast<cplx>();
    m_[i] = Id - a * a * dr4_[i] * (Id - X2);
    m_llt_[i].compute(m_[i]);
    if (m_llt_[i].info() != Eigen::Success) throw std::runtime_error("Hamiltonian: m is not positive definite");
    m_inv_[i] = m_llt_[i].solve(Id);
  }

  // banded Cholesky of E for each angular index (lower storage, kd = 2)
  const double h = layout.h(), c2 = 1.0 / (12.0 * h * h);
  e_factor_.resize(na_);
  for (int n = 0; n < na_; ++n) {
    auto& ab = e_factor_[n];
    ab.assign(3 * std::size_t(nu_), 0.0);
    for (int i = 0; i < nu_; ++i) {
      double diag = 30.0 * c2 + opts_.weight;
      if (opts_.product == ScalarProduct::Energy) diag += dr4_[i] * a0_[n];
      ab[3 * i] = diag;
      if (i + 1 < nu_) ab[3 * i + 1] = -16.0 * c2;
      if (i + 2 < nu_) ab[3 * i + 2] = c2;
    }
    const lapack_int info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', nu_, 2, ab.data(), 3);
    if (info != 0) throw std::runtime_error("Hamiltonian: scalar-product operator is not positive definite");
  }
}

Eigen::VectorXcd Hamiltonian::second_derivative(const Eigen::VectorXcd& v) const {
  const double h = layout_.h(), c2 = 1.0 / (12.0 * h * h);
  Eigen::VectorXcd out(v.size());
  auto at = [&](int i, int n) { return (i < 0 || i >= nu_) ? cplx(0.0) : v[i * na_ + n]; };
  for (int i = 0; i < nu_; ++i)
    for (int n = 0; n < na_; ++n)
      out[i * na_ + n] =
          c2 * (-at(i - 2, n) + 16.0 * at(i - 1, n) - 30.0 * at(i, n) + 16.0 * at(i + 1, n) - at(i + 2, n));
  return out;
}

Eigen::VectorXcd Hamiltonian::apply_t0(const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd out = -second_derivative(v);
  for (int i = 0; i < nu_; ++i)
    for (int n = 0; n < na_; ++n) out[i * na_ + n] += (q_[i] + dr4_[i] * a0_[n]) * v[i * na_ + n];
  return out;
}

Eigen::VectorXcd Hamiltonian::apply_blocks(const std::vector<Eigen::MatrixXcd>& b, const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd out(v.size());
  for (int i = 0; i < nu_; ++i) out.segment(i * na_, na_) = b[i] * v.segment(i * na_, na_);
  return out;
}

Eigen::VectorXcd Hamiltonian::apply_m(const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd out(v.size());
  for (int i = 0; i < nu_; ++i) out.segment(i * na_, na_) = m_[i] * v.segment(i * na_, na_);
  return out;
}

Eigen::VectorXcd Hamiltonian::apply_m_inverse(const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd out(v.size());
  for (int i = 0; i < nu_; ++i) out.segment(i * na_, na_) = m_inv_[i] * v.segment(i * na_, na_);
  return out;
}

Eigen::VectorXcd Hamiltonian::apply_e(const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd out = -second_derivative(v);
  for (int i = 0; i < nu_; ++i)
    for (int n = 0; n < na_; ++n) {
      double d = opts_.weight;
      if (opts_.product == ScalarProduct::Energy) d += dr4_[i] * a0_[n];
      out[i * na_ + n] += d * v[i * na_ + n];
    }
  return out;
}

Eigen::VectorXcd Hamiltonian::solve_e(const Eigen::VectorXcd& v) const {
  Eigen::VectorXcd out(v.size());
  std::vector<double> rhs(2 * std::size_t(nu_));
  for (int n = 0; n < na_; ++n) {
    for (int i = 0; i < nu_; ++i) {
      rhs[i] = v[i * na_ + n].real();
      rhs[nu_ + i] = v[i * na_ + n].imag();
    }
    LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'L', nu_, 2, 2, e_factor_[n].data(), 3, rhs.data(), nu_);
    for (int i = 0; i < nu_; ++i) out[i * na_ + n] = cplx(rhs[i], rhs[nu_ + i]);
  }
  return out;
}

Eigen::VectorXcd Hamiltonian::apply_g2(const Eigen::VectorXcd& v) const {
  return opts_.product == ScalarProduct::Energy ? apply_m(v) : v;
}

Eigen::VectorXcd Hamiltonian::solve_g2(const Eigen::VectorXcd& v) const {
  return opts_.product == ScalarProduct::Energy ? apply_m_inverse(v) : v;
}

TwoComponentState Hamiltonian::apply(const TwoComponentState& psi) const {
  TwoComponentState out;
  out.layout = layout_;
  out.psi1 = psi.psi2;
  out.psi2 = apply_m_inverse(apply_t0(psi.psi1) + apply_blocks(t1_, psi.psi2));
  return out;
}

TwoComponentState Hamiltonian::shifted_power(const TwoComponentState& psi, cplx shift, int p) const {
  if (p < 0) throw std::invalid_argument("shifted_power: p must be >= 0");
  TwoComponentState out = psi;
  for (int j = 0; j < p; ++j) out = apply(out) + shift * out;
  return out;
}

Eigen::VectorXcd Hamiltonian::reduced_rhs(cplx omega, const TwoComponentState& psi) const {
  return apply_m(psi.psi2 + omega * psi.psi1) - apply_blocks(t1_, psi.psi1);
}

TwoComponentState Hamiltonian::from_reduced(cplx omega, const TwoComponentState& psi,
                                            const Eigen::VectorXcd& x1) const {
  TwoComponentState out;
  out.layout = layout_;
  out.psi1 = x1;
  out.psi2 = psi.psi1 + omega * x1;
  return out;
}

TwoComponentState Hamiltonian::resolvent(cplx omega, const TwoComponentState& rhs) const {
  const int N = nu_ * na_;
  const int kl = 2 * na_, ku = 2 * na_, ld = 2 * kl + ku + 1;
  std::vector<cplx> ab(std::size_t(ld) * N, cplx(0.0));
  auto put = [&](int row, int col, cplx v) { ab[std::size_t(kl + ku + row - col) + std::size_t(col) * ld] += v; };
  const double h = layout_.h(), c2 = 1.0 / (12.0 * h * h);
  const double stencil[5] = {c2, -16.0 * c2, 30.0 * c2, -16.0 * c2, c2};  // -D2
  const cplx w2 = omega * omega;
  for (int i = 0; i < nu_; ++i) {
    for (int n = 0; n < na_; ++n) {
      const int row = i * na_ + n;
      for (int dI = -2; dI <= 2; ++dI) {
        const int j = i + dI;
        if (j < 0 || j >= nu_) continue;
        put(row, j * na_ + n, stencil[dI + 2]);
      }
      put(row, row, q_[i] + dr4_[i] * a0_[n]);
      for (int nn = 0; nn < na_; ++nn) put(row, i * na_ + nn, omega * t1_[i](n, nn) - w2 * m_[i](n, nn));
    }
  }
  Eigen::VectorXcd b = reduced_rhs(omega, rhs);
  std::vector<lapack_int> ipiv(N);
  const lapack_int info = LAPACKE_zgbsv(LAPACK_COL_MAJOR, N, kl, ku, 1, ab.data(), ld, ipiv.data(), b.data(), N);
  if (info != 0) {
    std::ostringstream msg;
    msg << "resolvent: T(omega) is singular at omega = " << omega << " (info " << info << ")";
    throw ResolventError(msg.str());
  }
  return from_reduced(omega, rhs, b);
}

cplx Hamiltonian::inner(const TwoComponentState& a, const TwoComponentState& b) const {
  return layout_.h() * (a.psi1.dot(apply_e(b.psi1)) + a.psi2.dot(apply_g2(b.psi2)));
}

double Hamiltonian::norm(const TwoComponentState& a) const { return std::sqrt(std::max(0.0, inner(a, a).real())); }

DefectEstimate Hamiltonian::defect() const {
  if (defect_) return *defect_;
  // Lanczos for K v = mu G v with G the Gram operator and K = (G H - H^* G) / 2i,
  // where H^* is the conjugate transpose of the discrete H.
  const int N = nu_ * na_;
  auto gram = [&](const Eigen::VectorXcd& v) {
    Eigen::VectorXcd out(2 * N);
    out.head(N) = apply_e(v.head(N));
    out.tail(N) = apply_g2(v.tail(N));
    return out;
  };
  auto gram_solve = [&](const Eigen::VectorXcd& v) {
    Eigen::VectorXcd out(2 * N);
    out.head(N) = solve_e(v.head(N));
    out.tail(N) = solve_g2(v.tail(N));
    return out;
  };
  std::vector<Eigen::MatrixXcd> t1_adj(nu_);
  for (int i = 0; i < nu_; ++i) t1_adj[i] = t1_[i].adjoint();
  auto K = [&](const Eigen::VectorXcd& v) {
    TwoComponentState st;
    st.layout = layout_;
    st.psi1 = v.head(N);
    st.psi2 = v.tail(N);
    const TwoComponentState hv = apply(st);
    Eigen::VectorXcd ghv(2 * N);
    ghv.head(N) = apply_e(hv.psi1);
    ghv.tail(N) = apply_g2(hv.psi2);
    const Eigen::VectorXcd gv = gram(v);
    // H^* w = (T0^* m^{-1} w2, w1 + T1^* m^{-1} w2)
    const Eigen::VectorXcd mw2 = apply_m_inverse(gv.tail(N));
    Eigen::VectorXcd t0adj = -second_derivative(mw2);
    for (int i = 0; i < nu_; ++i)
      for (int n = 0; n < na_; ++n) t0adj[i * na_ + n] += std::conj(q_[i] + dr4_[i] * a0_[n]) * mw2[i * na_ + n];
    Eigen::VectorXcd hg(2 * N);
    hg.head(N) = t0adj;
    hg.tail(N) = gv.head(N) + apply_blocks(t1_adj, mw2);
    return Eigen::VectorXcd((ghv - hg) / cplx(0.0, 2.0));
  };

  std::mt19937_64 rng(20240611ULL);
  std::normal_distribution<double> nd;
  Eigen::VectorXcd q(2 * N);
  for (int j = 0; j < 2 * N; ++j) q[j] = cplx(nd(rng), nd(rng));
  q /= std::sqrt(q.dot(gram(q)).real());

  const int max_steps = std::min(400, 2 * N);
  std::vector<Eigen::VectorXcd> basis{q};
  std::vector<Eigen::VectorXcd> gbasis{gram(q)};
  std::vector<double> alpha, beta;
  DefectEstimate est;
  double previous = -1.0;
  for (int j = 0; j < max_steps; ++j) {
    const Eigen::VectorXcd z = K(basis[j]);
    alpha.push_back(basis[j].dot(z).real());
    Eigen::VectorXcd w = gram_solve(z);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t l = 0; l < basis.size(); ++l) w -= basis[l] * gbasis[l].dot(w);
    const Eigen::VectorXcd gw = gram(w);
    const double b = std::sqrt(std::max(0.0, w.dot(gw).real()));

    const int m = int(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T, Eigen::EigenvaluesOnly).eigenvalues();
    const double current = std::max(std::abs(ev[0]), std::abs(ev[m - 1]));
    est.c_hat = current;
    est.iterations = m;
    if (previous >= 0.0) est.change = std::abs(current - previous);
    if (m >= 20 && previous >= 0.0 && est.change <= 1e-10 * std::max(current, 1e-300)) break;
    previous = current;
    if (b <= 1e-14 * std::max(1.0, current)) break;  // invariant subspace found
    beta.push_back(b);
    basis.push_back(w / b);
    gbasis.push_back(gw / b);
  }
  defect_ = std::make_shared<DefectEstimate>(est);
  return est;
}

double Hamiltonian::spectral_bound() const {
  // Eigenpairs satisfy T(omega) X1 = 0, so |omega|^2 m_min <= |T0| + |omega| |T1|.
  const double h = layout_.h();
  double t0 = 0.0, t1 = 0.0, mmin = 1e300;
  for (int i = 0; i < nu_; ++i) {
    for (int n = 0; n < na_; ++n) t0 = std::max(t0, 64.0 / (12.0 * h * h) + std::abs(q_[i] + dr4_[i] * a0_[n]));
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(t1_[i]);
    t1 = std::max(t1, svd.singularValues()[0]);
    mmin = std::min(mmin, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m_[i]).eigenvalues()[0]);
  }
  return (t1 + std::sqrt(t1 * t1 + 4.0 * mmin * t0)) / (2.0 * mmin);
}

// ---------------------------------------------------------------------------

ResolventReport resolvent_bound_probe(const Hamiltonian& H, const std::vector<cplx>& omegas,
                                      const std::vector<TwoComponentState>& states) {
  ResolventReport rep;
  rep.c_hat = H.c_hat();
  for (const cplx om : omegas) {
    if (!(std::abs(om.imag()) > rep.c_hat)) {
      std::ostringstream msg;
      msg << "resolvent_bound_probe: |Im omega| must exceed c_hat = " << rep.c_hat << " (omega = " << om << ")";
      throw std::invalid_argument(msg.str());
    }
    for (std::size_t j = 0; j < states.size(); ++j) {
      const TwoComponentState& psi = states[j];
      const TwoComponentState X = H.resolvent(om, psi);
      ResolventSample smp;
      smp.omega = om;
      smp.state = int(j);
      smp.norm_x = H.norm(X);
      smp.norm_psi = H.norm(psi);
      smp.bound = smp.norm_psi / (std::abs(om.imag()) - rep.c_hat);
      smp.residual = H.norm(H.apply(X) - om * X - psi) / smp.norm_psi;
      smp.bound_holds = smp.norm_x <= smp.bound;
      rep.all_bounds_hold = rep.all_bounds_hold && smp.bound_holds;
      rep.max_residual = std::max(rep.max_residual, smp.residual);
      rep.samples.push_back(smp);
    }
  }
  return rep;
}

TwoComponentState random_smooth_state(const StateLayout& layout, double u_lo, double u_hi,
                                      unsigned long long seed) {
  layout.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  TwoComponentState st = TwoComponentState::zero(layout);
  const int na = layout.n_angular;
  const int modes = std::min(3, na);
  for (int comp = 0; comp < 2; ++comp) {
    for (int n = 0; n < modes; ++n) {
      const double width = 0.25 * (u_hi - u_lo) * (0.5 + 0.5 * U(rng));
      const double centre = u_lo + width + (u_hi - u_lo - 2.0 * width) * U(rng);
      const cplx amp = std::polar(1.0 / (1.0 + n), 2.0 * std::acos(-1.0) * U(rng));
      for (int i = 0; i < layout.n_u; ++i) {
        const double t = (layout.u(i) - centre) / width;
        if (std::abs(t) >= 1.0) continue;
        const cplx v = amp * std::exp(1.0 - 1.0 / (1.0 - t * t));
        (comp == 0 ? st.psi1 : st.psi2)[i * na + n] += v;
      }
    }
  }
  check_support(st);
  return st;
}

}  // namespace kerr
