#pragma once

#include <vector>

namespace radnls {

/// Order of a Bessel function of the first kind. Only nonnegative finite
/// orders are representable; the constructor throws DomainError otherwise.
class BesselOrder {
public:
  explicit BesselOrder(double nu);
  double value() const { return nu_; }

private:
  double nu_;
};

namespace specfun {

/// Gamma function for x > 0 (Lanczos, g = 7). Throws DomainError for x <= 0.
double gamma_fn(double x);

/// log Gamma(x) for x > 0.
double log_gamma(double x);

/// Bessel function of the first kind J_nu(x) for real nu >= 0 and x >= 0.
///
/// Ascending series for x <= 8, Schlaefli's integral for the intermediate
/// range and the Hankel asymptotic expansion (phase x - nu*pi/2 - pi/4) once
/// x >= max(25, nu^2 + 10).
double bessel_j(BesselOrder nu, double x);

/// dJ_nu/dx computed as (nu/x) J_nu - J_{nu+1}; J_nu'(0) is taken from the
/// leading series term.
double bessel_j_prime(BesselOrder nu, double x);

/// First `count` positive zeros of J_nu in increasing order.
std::vector<double> bessel_zeros(BesselOrder nu, int count);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(int n);

/// Cached 16-point Gauss-Legendre rule, used for composite panel quadrature.
const QuadratureRule& gauss_legendre16();

} // namespace specfun
} // namespace radnls
