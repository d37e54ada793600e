#include "kerrstab/series.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kerr {

cplx Polynomial::operator()(cplx z) const {
  cplx acc{};
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * z + *it;
  return acc;
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  std::vector<cplx> r(std::max(a.size(), b.size()));
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = a.coeff(j) + b.coeff(j);
  return Polynomial(std::move(r));
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) {
  std::vector<cplx> r(std::max(a.size(), b.size()));
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = a.coeff(j) - b.coeff(j);
  return Polynomial(std::move(r));
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.size() == 0 || b.size() == 0) return {};
  std::vector<cplx> r(a.size() + b.size() - 1);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a.c[i] * b.c[j];
  return Polynomial(std::move(r));
}

Polynomial operator*(cplx s, const Polynomial& a) {
  Polynomial r = a;
  for (auto& v : r.c) v *= s;
  return r;
}

FrobeniusSeries::FrobeniusSeries(const Polynomial& q2, const Polynomial& q1,
                                 const Polynomial& q0, cplx nu, int max_terms)
    : nu_(nu) {
  if (q2.coeff(0) == cplx{}) throw std::invalid_argument("FrobeniusSeries: q2(0) must be nonzero");
  const std::size_t deg = std::max({q2.size(), q1.size(), q0.size()});
  auto F = [&](std::size_t j, cplx mu) {
    return q2.coeff(j) * mu * (mu - 1.0) + q1.coeff(j) * mu + q0.coeff(j);
  };
  const double scale = std::abs(q2.coeff(0)) + std::abs(q1.coeff(0)) + std::abs(q0.coeff(0)) + 1.0;
  if (std::abs(F(0, nu)) > 1e-8 * scale * (1.0 + std::norm(nu)))
    throw std::invalid_argument("FrobeniusSeries: exponent is not an indicial root");

  coef_.reserve(max_terms);
  coef_.push_back(1.0);
  for (int n = 1; n < max_terms; ++n) {
    cplx rhs{};
    for (std::size_t j = 1; j <= std::min<std::size_t>(n, deg); ++j)
      rhs -= coef_[n - j] * F(j, nu + double(n - j));
    const cplx lead = F(0, nu + double(n));
    if (std::abs(lead) < 1e-12 * scale * (1.0 + n * n))
      throw std::domain_error("FrobeniusSeries: indicial resonance at order " + std::to_string(n));
    coef_.push_back(rhs / lead);
  }
}

std::pair<cplx, cplx> FrobeniusSeries::eval(double z) const {
  const auto [s, ds] = eval_scaled(z);
  const cplx zp = std::pow(cplx(z), nu_);
  return {zp * s, zp * ds / z};
}

std::pair<cplx, cplx> FrobeniusSeries::eval_scaled(double z) const {
  if (!(z > 0.0)) throw std::domain_error("FrobeniusSeries::eval requires z > 0");
  cplx s{}, ds{};
  cplx zn = 1.0;
  double biggest = 0.0;
  int small_run = 0;
  for (std::size_t n = 0; n < coef_.size(); ++n) {
    const cplx t = coef_[n] * zn;
    s += t;
    ds += (nu_ + double(n)) * t;
    const double at = std::abs(t) * (1.0 + n);
    biggest = std::max(biggest, at);
    small_run = (at < 1e-17 * biggest) ? small_run + 1 : 0;
    if (small_run >= 4) break;
    zn *= z;
  }
  if (small_run < 4)
    throw std::domain_error("FrobeniusSeries: series not converged at z = " + std::to_string(z));
  return {s, ds};
}

}  // namespace kerr
