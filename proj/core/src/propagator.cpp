#include "radnls/propagator.hpp"

#include "radnls/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace radnls {

using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {
constexpr double kPi = std::numbers::pi;
const cplx kI(0.0, 1.0);
} // namespace

RadialField schrodinger_propagate(const RadialField& f, double t) {
  if (t == 0.0)
    return f;
  const HankelBasis& b = *f.basis;
  VectorXcd m(b.N);
  for (int k = 0; k < b.N; ++k)
    m(k) = std::exp(-kI * (t * b.rho(k) * b.rho(k)));
  return apply_multiplier(f, m);
}

RadialField heat_propagate(const RadialField& f, double t) {
  if (!(t > 0.0))
    throw DomainError("heat_propagate requires t > 0");
  const HankelBasis& b = *f.basis;
  VectorXcd m = (-t * b.rho.array().square()).exp().cast<cplx>();
  return apply_multiplier(f, m);
}

cplx kernel_eval(const Params& params, double t, double r, double s) {
  if (t == 0.0)
    throw DomainError("kernel_eval requires t != 0");
  if (!(r > 0.0) || !(s > 0.0))
    throw DomainError("kernel_eval requires r, s > 0");
  if (t < 0.0)
    return std::conj(kernel_eval(params, -t, r, s));
  const double nu = params.nu.value();
  const cplx phase = std::exp(kI * ((r * r + s * s) / (4.0 * t) - 0.5 * nu * kPi));
  const double j = specfun::bessel_j(params.nu, r * s / (2.0 * t));
  return std::pow(r * s, -params.h) * phase / (2.0 * kI * t) * j;
}

KernelPropagation propagate_via_kernel(const RadialField& f, double t, double min_abs_t) {
  if (std::abs(t) < min_abs_t)
    throw DomainError("propagate_via_kernel: |t| below the resolved range");
  const BasisPtr& bp = f.basis;
  const HankelBasis& b = *bp;
  const Params& P = b.params;
  RefinedQuadrature rq(bp);

  const VectorXcd u0 = to_physical(f);
  const VectorXd cr = fb_coefficients(b, u0.real());
  const VectorXd ci = fb_coefficients(b, u0.imag());
  const VectorXd fr = rq.evaluate(cr);
  const VectorXd fi = rq.evaluate(ci);
  const VectorXd& s = rq.nodes();
  const VectorXd& w = rq.weights();
  const Eigen::Index Q = s.size();

  // integrate only where the data lives
  const double fmax = (fr.array().square() + fi.array().square()).sqrt().maxCoeff();
  Eigen::Index qend = 0;
  double max_gap = 0.0;
  for (Eigen::Index q = 0; q < Q; ++q) {
    if (std::hypot(fr(q), fi(q)) > 1e-15 * fmax) {
      qend = q + 1;
    }
  }
  for (Eigen::Index q = 1; q < qend; ++q)
    max_gap = std::max(max_gap, s(q) - s(q - 1));

  VectorXcd weighted(qend);
  const double e = static_cast<double>(P.d - 1);
  for (Eigen::Index q = 0; q < qend; ++q)
    weighted(q) = w(q) * std::pow(s(q), e) * cplx(fr(q), fi(q));

  KernelPropagation out{RadialField{bp, Domain::physical, VectorXcd(b.N)}, false, 0.0};
  for (int k = 0; k < b.N; ++k) {
    cplx acc = 0.0;
    for (Eigen::Index q = 0; q < qend; ++q)
      acc += weighted(q) * kernel_eval(P, t, b.r(k), s(q));
    out.u.v(k) = acc;
  }
  out.sampling_ratio = max_gap * b.r(b.N - 1) / (kPi * std::abs(t));
  out.undersampled = out.sampling_ratio > 1.0;
  return out;
}

double dispersive_ratio(const Params& params, const RadialField& f, double t) {
  if (!(t > 0.0))
    throw DomainError("dispersive_ratio requires t > 0");
  const HankelBasis& b = *f.basis;
  if (b.params.a != params.a || b.params.d != params.d)
    throw UsageError("dispersive_ratio: params do not match the field's basis");
  const VectorXcd f0 = to_physical(f);
  const VectorXcd u = schrodinger_propagate(RadialField{f.basis, Domain::physical, f0}, t).v;
  const double td = std::pow(t, 0.5 * params.d);
  if (params.a >= 0.0) {
    const double l1 = integrate(b, f0.cwiseAbs());
    if (!(l1 > 0.0))
      throw DomainError("dispersive_ratio: ||f||_1 = 0");
    return norm(RadialField{f.basis, Domain::physical, u}, NormKind::Linf) * td / l1;
  }
  const VectorXd wgt = 1.0 + b.r.array().pow(-params.sigma);
  const double l1 = integrate(b, (wgt.array() * f0.cwiseAbs().array()).matrix());
  if (!(l1 > 0.0))
    throw DomainError("dispersive_ratio: ||f||_1 = 0");
  // u / (1 + r^{-sigma}) -> A as r -> 0 where u ~ A r^{-sigma}
  const double at0 = std::abs(origin_coefficient(RadialField{f.basis, Domain::physical, u}));
  const double sup = std::max(at0, (u.cwiseAbs().array() / wgt.array()).maxCoeff());
  return sup * td / (1.0 + std::pow(t, params.sigma)) / l1;
}

double heat_kernel(const Params& params, double t, double r, double s) {
  if (!(t > 0.0) || !(r > 0.0) || !(s > 0.0))
    throw DomainError("heat_kernel requires t, r, s > 0");
  const auto& gl = specfun::gauss_legendre16();
  const BesselOrder nu = params.nu;
  auto integrand = [&](double rho) {
    return specfun::bessel_j(nu, r * rho) * specfun::bessel_j(nu, s * rho) *
           std::exp(-t * rho * rho) * rho;
  };
  auto panel = [&](double lo, double hi) {
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    double acc = 0.0;
    for (std::size_t j = 0; j < gl.nodes.size(); ++j)
      acc += gl.weights[j] * integrand(mid + half * gl.nodes[j]);
    return acc * half;
  };
  const double cut = std::sqrt(46.0 / t);
  const double freq = r + s;
  const double knee = std::min(cut, 1.0 / freq);
  double sum = 0.0;
  // geometric panels towards rho = 0, where the integrand ~ rho^{2 nu + 1}
  double hi = knee;
  for (int i = 0; i < 40; ++i) {
    sum += panel(0.5 * hi, hi);
    hi *= 0.5;
  }
  const int n = static_cast<int>(std::ceil((cut - knee) * freq / kPi)) + 8;
  const double width = (cut - knee) / n;
  for (int i = 0; i < n; ++i)
    sum += panel(knee + i * width, knee + (i + 1) * width);
  return std::pow(r * s, -params.h) * sum;
}

double sphere_exponential_average(int d, double kappa) {
  // |S^{d-2}| int_0^pi exp(kappa (cos th - 1)) sin^{d-2} th dth
  const auto& gl = specfun::gauss_legendre16();
  const double area = 2.0 * std::pow(kPi, 0.5 * (d - 1)) / specfun::gamma_fn(0.5 * (d - 1));
  // the integrand concentrates in th ~ kappa^{-1/2}; grade panels near 0
  const int panels = 24;
  double acc = 0.0;
  double hi = kPi;
  const double scale = std::min(kPi, 8.0 / std::sqrt(std::max(kappa, 1e-300)));
  std::vector<std::pair<double, double>> pieces;
  if (scale < kPi) {
    pieces.emplace_back(scale, kPi);
    hi = scale;
  }
  for (int i = 0; i < panels; ++i) {
    pieces.emplace_back(0.5 * hi, hi);
    hi *= 0.5;
  }
  for (auto [lo, up] : pieces) {
    const double mid = 0.5 * (lo + up), half = 0.5 * (up - lo);
    for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
      const double th = mid + half * gl.nodes[j];
      acc += gl.weights[j] * half * std::exp(kappa * (std::cos(th) - 1.0)) *
             std::pow(std::sin(th), d - 2);
    }
  }
  return area * acc;
}

HeatKernelReport heat_kernel_bound_check(const Params& params, const std::vector<double>& t_list,
                                         const std::vector<std::pair<double, double>>& grid) {
  if (t_list.empty() || grid.empty())
    throw UsageError("heat_kernel_bound_check needs times and grid points");
  struct Sample {
    double t, r, s, k, W;
  };
  std::vector<Sample> samples;
  HeatKernelReport rep;
  rep.positive = true;
  rep.min_kernel = std::numeric_limits<double>::infinity();
  const double sig = params.sigma;
  for (double t : t_list) {
    if (!(t > 0.0))
      throw DomainError("heat_kernel_bound_check: times must be positive");
    for (auto [r, s] : grid) {
      const double k = heat_kernel(params, t, r, s);
      const double scale = std::pow(t, -0.5 * params.d) * std::pow(r * s, -params.h);
      rep.min_kernel = std::min(rep.min_kernel, k / scale);
      if (k < -1e-10 * scale)
        rep.positive = false;
      const double st = std::sqrt(t);
      const double W = std::pow(std::max(1.0, st / r), sig) * std::pow(std::max(1.0, st / s), sig);
      samples.push_back({t, r, s, k, W});
    }
  }
  rep.samples = static_cast<int>(samples.size());
  auto G = [&](const Sample& x, double c) {
    return std::pow(x.t, -0.5 * params.d) * std::exp(-(x.r - x.s) * (x.r - x.s) / (c * x.t)) *
           sphere_exponential_average(params.d, 2.0 * x.r * x.s / (c * x.t));
  };
  rep.C1 = -1.0;
  for (double c = 4.0; c <= 16.0 + 1e-12; c += 0.5) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& x : samples)
      lo = std::min(lo, x.k / (x.W * G(x, c)));
    if (lo > rep.C1) {
      rep.C1 = lo;
      rep.c1 = c;
    }
  }
  rep.C2 = std::numeric_limits<double>::infinity();
  for (double c = 1.0; c <= 4.0 + 1e-12; c += 0.25) {
    double hi = 0.0;
    for (const auto& x : samples)
      hi = std::max(hi, x.k / (x.W * G(x, c)));
    if (hi < rep.C2) {
      rep.C2 = hi;
      rep.c2 = c;
    }
  }
  rep.pass = rep.positive && rep.C1 > 0.0 && std::isfinite(rep.C2);
  return rep;
}

} // namespace radnls
