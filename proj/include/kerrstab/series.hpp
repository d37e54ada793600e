/**
 * @file series.hpp
 * @brief Complex polynomials and Frobenius series at a regular singular point.
 */
#pragma once

#include <complex>
#include <utility>
#include <vector>

namespace kerr {

using cplx = std::complex<double>;

/// Dense complex polynomial, coefficients in increasing degree.
struct Polynomial {
  std::vector<cplx> c;

  Polynomial() = default;
  Polynomial(std::initializer_list<cplx> coeffs) : c(coeffs) {}
  explicit Polynomial(std::vector<cplx> coeffs) : c(std::move(coeffs)) {}

  cplx operator()(cplx z) const;
  cplx coeff(std::size_t j) const { return j < c.size() ? c[j] : cplx{}; }
  std::size_t size() const { return c.size(); }
};

Polynomial operator+(const Polynomial& a, const Polynomial& b);
Polynomial operator-(const Polynomial& a, const Polynomial& b);
Polynomial operator*(const Polynomial& a, const Polynomial& b);
Polynomial operator*(cplx s, const Polynomial& a);

/// Solution y = z^nu * sum_n c_n z^n of
///   z^2 q2(z) y'' + z q1(z) y' + q0(z) y = 0,   q2(0) != 0,
/// normalised by c_0 = 1. The exponent nu must be a root of the indicial
/// polynomial q2(0) nu (nu-1) + q1(0) nu + q0(0); the constructor throws if
/// the recursion hits a resonance (F(nu+n) = 0 for some n >= 1).
class FrobeniusSeries {
 public:
  FrobeniusSeries(const Polynomial& q2, const Polynomial& q1, const Polynomial& q0, cplx nu,
                  int max_terms = 600);

  /// Value and d/dz at z > 0 (principal branch of z^nu).
  std::pair<cplx, cplx> eval(double z) const;

  /// Without the z^nu factor: returns (S, T) with y = z^nu S and z y' = z^nu T.
  std::pair<cplx, cplx> eval_scaled(double z) const;

  cplx exponent() const { return nu_; }
  const std::vector<cplx>& coefficients() const { return coef_; }

 private:
  cplx nu_;
  std::vector<cplx> coef_;
};

}  // namespace kerr
