#include "radnls/specfun.hpp"

#include "radnls/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace radnls {

BesselOrder::BesselOrder(double nu) : nu_(nu) {
  if (!std::isfinite(nu) || nu < 0.0)
    throw DomainError("Bessel order must be finite and >= 0, got " + std::to_string(nu));
}

namespace specfun {
namespace {

constexpr double kPi = std::numbers::pi;

// Lanczos approximation, g = 7, n = 9.
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_sum(double xm1) {
  double a = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i)
    a += kLanczos[i] / (xm1 + static_cast<double>(i));
  return a;
}

constexpr double kSeriesLimit = 8.0;

double asymptotic_limit(double nu) { return std::max(25.0, nu * nu + 10.0); }

double bessel_series(double nu, double x) {
  if (x == 0.0)
    return nu == 0.0 ? 1.0 : 0.0;
  const double half = 0.5 * x;
  double term = std::exp(nu * std::log(half) - log_gamma(nu + 1.0));
  double sum = term;
  const double q = -half * half;
  for (int k = 1; k < 300; ++k) {
    term *= q / (static_cast<double>(k) * (static_cast<double>(k) + nu));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum) && k > 2)
      break;
  }
  return sum;
}

double bessel_asymptotic(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double p = 1.0;
  double q = 0.0;
  double t = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = t * (mu - odd * odd) / (8.0 * k * x);
    if (std::abs(next) > std::abs(prev) && k > 2)
      break; // series started to diverge; stop at the smallest term
    t = next;
    prev = t;
    // k = 1 -> +Q, k = 2 -> -P, k = 3 -> -Q, k = 4 -> +P, ...
    switch (k % 4) {
    case 1: q += t; break;
    case 2: p -= t; break;
    case 3: q -= t; break;
    default: p += t; break;
    }
    if (std::abs(t) < 1e-17)
      break;
  }
  const double omega = x - (0.5 * nu + 0.25) * kPi;
  return std::sqrt(2.0 / (kPi * x)) * (p * std::cos(omega) - q * std::sin(omega));
}

// Schlaefli:
//   J_nu(x) = 1/pi int_0^pi cos(nu t - x sin t) dt
//             - sin(nu pi)/pi int_0^inf exp(-x sinh t - nu t) dt,  x > 0.
double bessel_schlaefli(double nu, double x) {
  const auto& gl = gauss_legendre16();
  const int panels = static_cast<int>(std::ceil((x + nu) / 3.0)) + 4;
  const double width = kPi / panels;
  double first = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double mid = (i + 0.5) * width;
    for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
      const double t = mid + 0.5 * width * gl.nodes[j];
      first += gl.weights[j] * std::cos(nu * t - x * std::sin(t));
    }
  }
  first *= 0.5 * width / kPi;

  const double s = std::sin(nu * kPi);
  if (s == 0.0)
    return first;
  const double tmax = std::asinh(45.0 / x);
  constexpr int kTailPanels = 6;
  const double tw = tmax / kTailPanels;
  double second = 0.0;
  for (int i = 0; i < kTailPanels; ++i) {
    const double mid = (i + 0.5) * tw;
    for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
      const double t = mid + 0.5 * tw * gl.nodes[j];
      second += gl.weights[j] * std::exp(-x * std::sinh(t) - nu * t);
    }
  }
  second *= 0.5 * tw;
  return first - s / kPi * second;
}

double bessel_j_raw(double nu, double x) {
  if (x <= kSeriesLimit)
    return bessel_series(nu, x);
  if (x >= asymptotic_limit(nu))
    return bessel_asymptotic(nu, x);
  return bessel_schlaefli(nu, x);
}

double bessel_j_prime_raw(double nu, double x) {
  if (x == 0.0) {
    if (nu == 0.0)
      return 0.0;
    if (nu == 1.0)
      return 0.5;
    return nu < 1.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return nu / x * bessel_j_raw(nu, x) - bessel_j_raw(nu + 1.0, x);
}

double mcmahon_guess(double nu, int k) {
  const double mu = 4.0 * nu * nu;
  const double b = (k + 0.5 * nu - 0.25) * kPi;
  const double e = 8.0 * b;
  return b - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e * e * e);
}

} // namespace

double gamma_fn(double x) {
  if (!(x > 0.0))
    throw DomainError("gamma_fn requires x > 0");
  if (x < 0.5)
    return kPi / (std::sin(kPi * x) * gamma_fn(1.0 - x));
  const double xm1 = x - 1.0;
  const double t = xm1 + kLanczosG + 0.5;
  return std::sqrt(2.0 * kPi) * std::pow(t, xm1 + 0.5) * std::exp(-t) * lanczos_sum(xm1);
}

double log_gamma(double x) {
  if (!(x > 0.0))
    throw DomainError("log_gamma requires x > 0");
  if (x < 0.5)
    return std::log(kPi / std::abs(std::sin(kPi * x))) - log_gamma(1.0 - x);
  const double xm1 = x - 1.0;
  const double t = xm1 + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * kPi) + (xm1 + 0.5) * std::log(t) - t + std::log(lanczos_sum(xm1));
}

double bessel_j(BesselOrder nu, double x) {
  if (!(x >= 0.0))
    throw DomainError("bessel_j requires x >= 0");
  return bessel_j_raw(nu.value(), x);
}

double bessel_j_prime(BesselOrder nu, double x) {
  if (!(x >= 0.0))
    throw DomainError("bessel_j_prime requires x >= 0");
  return bessel_j_prime_raw(nu.value(), x);
}

std::vector<double> bessel_zeros(BesselOrder order, int count) {
  if (count < 1)
    throw DomainError("bessel_zeros requires count >= 1");
  const double nu = order.value();
  std::vector<double> zeros;
  zeros.reserve(static_cast<std::size_t>(count));

  // Consecutive zeros of J_nu are more than 3 apart for every nu >= 0, so the
  // first sign change after prev + 2.5 (scanning in steps of 0.5) brackets the
  // next zero. McMahon's expansion seeds a safeguarded Newton iteration.
  double prev = 0.0;
  for (int k = 1; k <= count; ++k) {
    double a = (k == 1) ? std::max(nu, 0.5) : prev + 2.5;
    double fa = bessel_j_raw(nu, a);
    double b = a;
    double fb = fa;
    const double guess = mcmahon_guess(nu, k);
    int scans = 0;
    while ((fb > 0.0) == (fa > 0.0) && fb != 0.0) {
      a = b;
      fa = fb;
      b = a + 0.5;
      fb = bessel_j_raw(nu, b);
      if (++scans > 100000)
        throw InternalError("bessel_zeros: failed to bracket zero " + std::to_string(k));
    }
    if (fb == 0.0) {
      zeros.push_back(b);
      prev = b;
      continue;
    }

    double x = (guess > a && guess < b) ? guess : 0.5 * (a + b);
    for (int it = 0; it < 100; ++it) {
      const double f = bessel_j_raw(nu, x);
      if (f == 0.0)
        break;
      if ((f > 0.0) == (fa > 0.0)) {
        a = x;
        fa = f;
      } else {
        b = x;
      }
      const double fp = bessel_j_prime_raw(nu, x);
      double next = x - f / fp;
      if (!(next > a && next < b))
        next = 0.5 * (a + b);
      const double step = std::abs(next - x);
      x = next;
      if (step <= 4e-16 * x || b - a <= 4e-16 * x)
        break;
    }
    zeros.push_back(x);
    prev = x;
  }
  return zeros;
}

QuadratureRule gauss_legendre(int n) {
  if (n < 1)
    throw DomainError("gauss_legendre requires n >= 1");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16)
        break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return rule;
}

const QuadratureRule& gauss_legendre16() {
  static const QuadratureRule rule = gauss_legendre(16);
  return rule;
}

} // namespace specfun
} // namespace radnls
