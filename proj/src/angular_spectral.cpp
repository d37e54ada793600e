#include "kerrstab/angular_spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "kerrstab/quadrature.hpp"

namespace kerr {

namespace {

bool is_integer(double v) { return std::abs(v - std::round(v)) < 1e-12; }

}  // namespace

void AngularProblem::validate() const {
  if (!(s >= 0.0) || !is_integer(2.0 * s))
    throw std::invalid_argument("AngularProblem: spin weight s must be a non-negative half-integer");
  if (!is_integer(k - s))
    throw std::invalid_argument("AngularProblem: k - s must be an integer");
  if (!is_integer(l_max - l_min()))
    throw std::invalid_argument("AngularProblem: l_max - max(|s|,|k|) must be an integer");
  if (l_max < l_min() + 8.0 - 1e-12)
    throw std::invalid_argument("AngularProblem: l_max must be at least max(|s|,|k|) + 8");
  if (!std::isfinite(a_omega.real()) || !std::isfinite(a_omega.imag()))
    throw std::invalid_argument("AngularProblem: a*omega must be finite");
}

double AngularProblem::l_min() const { return std::max(std::abs(s), std::abs(k)); }

int AngularProblem::basis_size() const {
  return static_cast<int>(std::lround(l_max - l_min())) + 1;
}

// ---------------------------------------------------------------------------

SpinWeightedBasis::SpinWeightedBasis(double s, double k, int size)
    : s_(s), k_(k), size_(size) {
  if (size < 1) throw std::invalid_argument("SpinWeightedBasis: size must be positive");
  alpha_ = std::round(std::abs(k - s));
  beta_ = std::round(std::abs(k + s));
  l_min_ = 0.5 * (alpha_ + beta_);

  // squared norm of P_n^{(alpha,beta)} against (1-x)^alpha (1+x)^beta
  norm_.resize(size);
  const double ab = alpha_ + beta_;
  for (int n = 0; n < size; ++n) {
    const double lg = (ab + 1.0) * std::log(2.0) - std::log(2.0 * n + ab + 1.0) +
                      std::lgamma(n + alpha_ + 1.0) + std::lgamma(n + beta_ + 1.0) -
                      std::lgamma(n + ab + 1.0) - std::lgamma(n + 1.0);
    norm_[n] = std::exp(-0.5 * lg);
  }

  const QuadratureRule q = gauss_legendre(size + static_cast<int>(l_min_) + 4);
  x_ = Eigen::MatrixXd::Zero(size, size);
  x2_ = Eigen::MatrixXd::Zero(size, size);
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const double x = q.nodes[i];
    const Eigen::VectorXd f = values(x);
    x_.noalias() += (q.weights[i] * x) * f * f.transpose();
    x2_.noalias() += (q.weights[i] * x * x) * f * f.transpose();
  }
  // exact band structure: drop quadrature round-off outside the band
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      if (std::abs(i - j) > 1) x_(i, j) = 0.0;
      if (std::abs(i - j) > 2) x2_(i, j) = 0.0;
    }
}

Eigen::VectorXd SpinWeightedBasis::values(double x) const {
  Eigen::VectorXd out(size_);
  const double a = alpha_, b = beta_, ab = a + b;
  const double weight = std::pow(std::max(0.0, 1.0 - x), 0.5 * a) *
                        std::pow(std::max(0.0, 1.0 + x), 0.5 * b);
  double pm2 = 1.0;
  double pm1 = (a + 1.0) + (ab + 2.0) * (x - 1.0) / 2.0;
  out(0) = pm2;
  if (size_ > 1) out(1) = pm1;
  for (int n = 2; n < size_; ++n) {
    const double c = 2.0 * n + ab;
    const double lhs = 2.0 * n * (n + ab) * (c - 2.0);
    const double p = ((c - 1.0) * (c * (c - 2.0) * x + a * a - b * b) * pm1 -
                      2.0 * (n + a - 1.0) * (n + b - 1.0) * c * pm2) / lhs;
    out(n) = p;
    pm2 = pm1;
    pm1 = p;
  }
  for (int n = 0; n < size_; ++n) out(n) *= weight * norm_[n];
  return out;
}

double SpinWeightedBasis::diagonal(int n) const {
  const double l = l_min_ + n;
  return l * (l + 1.0) - s_ * s_;
}

Eigen::VectorXcd SpinWeightedBasis::project(const std::function<cplx(double)>& f,
                                            int quad_points) const {
  if (quad_points <= 0) quad_points = 4 * size_ + 64;
  const QuadratureRule q = gauss_legendre(quad_points);
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(size_);
  for (std::size_t i = 0; i < q.nodes.size(); ++i)
    c += (q.weights[i] * f(q.nodes[i])) * values(q.nodes[i]).cast<cplx>();
  return c;
}

cplx SpinWeightedBasis::evaluate(const Eigen::VectorXcd& coeffs, double x) const {
  return values(x).cast<cplx>().dot(coeffs);  // real basis: dot conjugates only the basis
}

// ---------------------------------------------------------------------------

Eigen::MatrixXcd assemble_angular(const AngularProblem& problem) {
  problem.validate();
  const SpinWeightedBasis basis(problem.s, problem.k, problem.basis_size());
  const int n = basis.size();
  const cplx aw = problem.a_omega;
  // A = A_0 - 2 aw k + 2 aw s X + aw^2 (I - X2)
  Eigen::MatrixXcd A = (2.0 * aw * problem.s) * basis.x_matrix().cast<cplx>() -
                       (aw * aw) * basis.x2_matrix().cast<cplx>();
  for (int i = 0; i < n; ++i) A(i, i) += basis.diagonal(i) - 2.0 * aw * problem.k + aw * aw;
  return A;
}

namespace {

bool spectral_less(cplx a, cplx b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

std::vector<std::vector<int>> form_clusters(const std::vector<cplx>& ev, const ClusterOptions& opts,
                                            double& threshold) {
  const int n = static_cast<int>(ev.size());
  std::vector<int> by_modulus(n);
  std::iota(by_modulus.begin(), by_modulus.end(), 0);
  std::stable_sort(by_modulus.begin(), by_modulus.end(),
                   [&](int i, int j) { return std::abs(ev[i]) < std::abs(ev[j]); });
  const int n0 = std::clamp(opts.cluster0_size, 1, n);

  auto mean_gap = [&](const std::vector<int>& idx) {
    if (idx.size() < 2) return 1.0;
    double g = 0.0;
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) g += std::abs(ev[idx[i + 1]] - ev[idx[i]]);
    return g / double(idx.size() - 1);
  };

  std::vector<bool> in0(n, false);
  std::vector<int> c0(by_modulus.begin(), by_modulus.begin() + n0);
  for (int i : c0) in0[i] = true;
  {
    // do not split a near-degenerate pair at the cluster-0 boundary
    const double g = mean_gap([&] {
      std::vector<int> all(n);
      std::iota(all.begin(), all.end(), 0);
      return all;
    }());
    for (int m = n0; m < n; ++m) {
      const int cand = by_modulus[m];
      bool close = false;
      for (int i : c0) close = close || std::abs(ev[cand] - ev[i]) < opts.merge_fraction * g;
      if (!close) break;
      c0.push_back(cand);
      in0[cand] = true;
    }
  }
  threshold = 0.0;
  for (int i : c0) threshold = std::max(threshold, std::abs(ev[i]));
  std::sort(c0.begin(), c0.end());

  std::vector<int> rest;
  for (int i = 0; i < n; ++i)
    if (!in0[i]) rest.push_back(i);

  std::vector<std::vector<int>> clusters{c0};
  const int m = static_cast<int>(rest.size());
  std::vector<double> gaps(std::max(0, m - 1));
  for (int i = 0; i + 1 < m; ++i) gaps[i] = std::abs(ev[rest[i + 1]] - ev[rest[i]]);
  std::vector<int> current;
  for (int i = 0; i < m; ++i) {
    current.push_back(rest[i]);
    bool merge = false;
    if (i + 1 < m) {
      double acc = 0.0;
      int cnt = 0;
      for (int j = std::max(0, i - 1); j <= std::min(m - 2, i + 1); ++j) {
        acc += gaps[j];
        ++cnt;
      }
      merge = gaps[i] < opts.merge_fraction * (acc / cnt);
    }
    if (!merge) {
      clusters.push_back(current);
      current.clear();
    }
  }
  return clusters;
}

}  // namespace

AngularSpectrum angular_spectrum(const AngularProblem& problem, const ClusterOptions& opts) {
  AngularSpectrum out;
  out.problem = problem;
  out.matrix = assemble_angular(problem);
  const int n = static_cast<int>(out.matrix.rows());

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(out.matrix, true);
  if (es.info() != Eigen::Success)
    throw EigensolveError("angular_spectrum: eigensolver failed to converge");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return spectral_less(es.eigenvalues()(i), es.eigenvalues()(j)); });
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (int j = 0; j < n; ++j) {
    out.eigenvalues[j] = es.eigenvalues()(order[j]);
    out.eigenvectors.col(j) = es.eigenvectors().col(order[j]);
  }
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(std::abs(out.eigenvalues[j])))
      throw EigensolveError("angular_spectrum: non-finite eigenvalue");
  }
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(out.eigenvectors);
  out.left_eigenvectors = lu.inverse();

  out.clusters = form_clusters(out.eigenvalues, opts, out.cluster0_threshold);
  out.resolved_eigenvalues =
      std::min(n, static_cast<int>(std::ceil(problem.l_max / 2.0 - 1e-12)));
  out.resolved_clusters = 0;
  for (const auto& c : out.clusters) {
    const bool ok = std::all_of(c.begin(), c.end(), [&](int i) { return i < out.resolved_eigenvalues; });
    if (!ok) break;
    ++out.resolved_clusters;
  }

  out.defective.assign(out.clusters.size(), false);
  for (std::size_t c = 0; c < out.clusters.size(); ++c) {
    const auto& idx = out.clusters[c];
    if (idx.size() < 2) continue;
    Eigen::MatrixXcd vc(n, idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j)
      vc.col(j) = out.eigenvectors.col(idx[j]).normalized();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(vc);
    const auto& sv = svd.singularValues();
    out.defective[c] = sv(sv.size() - 1) < opts.jordan_tolerance * sv(0);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double op_norm(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

Eigen::MatrixXcd null_space(const Eigen::MatrixXcd& B, int dim) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(B, Eigen::ComputeFullV);
  return svd.matrixV().rightCols(dim);
}

}  // namespace

SpectralProjector projector(const AngularSpectrum& spectrum, int n) {
  if (n < 0 || n >= static_cast<int>(spectrum.clusters.size()))
    throw std::out_of_range("projector: cluster index out of range");
  const auto& idx = spectrum.clusters[n];
  const int N = static_cast<int>(spectrum.matrix.rows());
  const int d = static_cast<int>(idx.size());

  SpectralProjector P;
  P.n = n;
  P.dim = d;
  if (!spectrum.defective[n]) {
    P.action = Eigen::MatrixXcd::Zero(N, N);
    for (int j : idx)
      P.action.noalias() += spectrum.eigenvectors.col(j) * spectrum.left_eigenvectors.row(j);
  } else {
    if (d > 2)
      throw ProjectorError("projector: near-defective cluster of dimension > 2", 0.0);
    // generalised eigenvectors: kernel of (A - mu)^d and of its adjoint
    cplx mu{};
    for (int j : idx) mu += spectrum.eigenvalues[j];
    mu /= double(d);
    Eigen::MatrixXcd B = spectrum.matrix - mu * Eigen::MatrixXcd::Identity(N, N);
    Eigen::MatrixXcd Bd = B;
    for (int p = 1; p < d; ++p) Bd = Bd * B;
    const Eigen::MatrixXcd vr = null_space(Bd, d);
    const Eigen::MatrixXcd wl = null_space(Bd.adjoint(), d);
    const Eigen::MatrixXcd g = wl.adjoint() * vr;
    P.action = vr * g.fullPivLu().solve(wl.adjoint());
  }
  P.norm = op_norm(P.action);
  if (!std::isfinite(P.norm) || P.norm > 1e8)
    throw ProjectorError("projector: cluster " + std::to_string(n) + " is ill-conditioned", P.norm);
  return P;
}

std::pair<cplx, double> cluster_contour(const AngularSpectrum& spectrum, int n) {
  if (n < 0 || n >= static_cast<int>(spectrum.clusters.size()))
    throw std::out_of_range("cluster_contour: cluster index out of range");
  const auto& idx = spectrum.clusters[n];
  const auto& ev = spectrum.eigenvalues;
  std::vector<bool> member(ev.size(), false);
  for (int j : idx) member[j] = true;

  cplx centre{};
  if (n != 0) {
    for (int j : idx) centre += ev[j];
    centre /= double(idx.size());
  }
  double r_in = 0.0, r_out = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < ev.size(); ++j) {
    const double r = std::abs(ev[j] - centre);
    if (member[j]) r_in = std::max(r_in, r);
    else r_out = std::min(r_out, r);
  }
  if (!std::isfinite(r_out)) r_out = 2.0 * r_in + 1.0;
  if (!(r_out > r_in * (1.0 + 1e-6) + 1e-12))
    throw ProjectorError("cluster_contour: no separating circle for cluster " + std::to_string(n),
                         r_out > 0 ? r_in / r_out : std::numeric_limits<double>::infinity());
  return {centre, 0.5 * (r_in + r_out)};
}

SpectralProjector projector_by_contour(const AngularSpectrum& spectrum, int n, double tol) {
  const auto [centre, radius] = cluster_contour(spectrum, n);
  const int N = static_cast<int>(spectrum.matrix.rows());
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(N, N);

  auto quad = [&](int M, int offset, int stride) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(N, N);
    for (int j = offset; j < M; j += stride) {
      const cplx e = std::polar(1.0, 2.0 * std::numbers::pi * j / M);
      const cplx lam = centre + radius * e;
      // (1/2 pi i) (lam - A)^{-1} dlam, dlam = i radius e dtheta
      acc += (radius * e) * (lam * I - spectrum.matrix).partialPivLu().inverse();
    }
    return acc;
  };

  int M = 64;
  Eigen::MatrixXcd sum = quad(M, 0, 1);
  Eigen::MatrixXcd Q = sum / double(M);
  for (int it = 0; it < 10; ++it) {
    // refine by adding the odd nodes of the doubled rule
    const Eigen::MatrixXcd odd = quad(2 * M, 1, 2);
    sum += odd;
    M *= 2;
    const Eigen::MatrixXcd Qn = sum / double(M);
    const double change = (Qn - Q).cwiseAbs().maxCoeff();
    Q = Qn;
    if (change < tol * std::max(1.0, Q.cwiseAbs().maxCoeff())) break;
  }
  SpectralProjector P;
  P.n = n;
  P.dim = static_cast<int>(spectrum.clusters[n].size());
  P.action = Q;
  P.norm = op_norm(Q);
  return P;
}

namespace {

/// Number of eigenvalues below `x` of a symmetric tridiagonal matrix (Sturm count).
int sturm_count(const std::vector<double>& d, const std::vector<double>& e, double x) {
  int count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double off = i == 0 ? 0.0 : e[i - 1] * e[i - 1];
    q = d[i] - x - (i == 0 ? 0.0 : off / q);
    if (q == 0.0) q = -1e-300;
    if (q < 0.0) ++count;
  }
  return count;
}

/// Lowest `count` eigenvalues of the angular operator for real a*omega, by a
/// conservative second-order finite-difference scheme on a uniform cell-centred
/// grid in x = cos(theta) with `cells` cells, located by Sturm bisection.
std::vector<double> fd_angular(double s, double k, double aw, int cells, int count) {
  const double h = 2.0 / cells;
  std::vector<double> d(cells), e(cells - 1);
  for (int j = 0; j < cells; ++j) {
    const double x = -1.0 + (j + 0.5) * h;
    const double xl = x - 0.5 * h, xr = x + 0.5 * h;
    const double pl = 1.0 - xl * xl, pr = 1.0 - xr * xr;
    const double b = k - s * x - aw * (1.0 - x * x);
    d[j] = (pl + pr) / (h * h) + b * b / (1.0 - x * x);
    if (j + 1 < cells) e[j] = -pr / (h * h);
  }
  std::vector<double> out;
  for (int m = 0; m < count; ++m) {
    double lo = -100.0, hi = 1e4;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (sturm_count(d, e, mid) > m) hi = mid; else lo = mid;
      if (hi - lo < 1e-14 * std::max(1.0, std::abs(mid))) break;
    }
    out.push_back(0.5 * (lo + hi));
  }
  return out;
}

}  // namespace

std::vector<double> angular_fd_eigenvalues(double s, double k, double a_omega, int cells, int count) {
  const auto coarse = fd_angular(s, k, a_omega, cells, count);
  const auto fine = fd_angular(s, k, a_omega, 2 * cells, count);
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
  return out;
}

}  // namespace kerr
