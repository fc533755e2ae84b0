#include "radnls/hankel.hpp"

#include "radnls/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace radnls {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

Params Params::make(int d, double a, double p) {
  if (d < 3)
    throw DomainError("dimension d must be >= 3");
  if (!(p > 1.0) || !std::isfinite(p))
    throw DomainError("nonlinearity exponent p must be > 1");
  const double h = 0.5 * (d - 2);
  if (!std::isfinite(a) || !(a > -h * h)) {
    std::ostringstream os;
    os << "a = " << a << " violates positivity of L_a: need a > -((d-2)/2)^2 = " << -h * h;
    throw DomainError(os.str());
  }
  Params out;
  out.d = d;
  out.a = a;
  out.p = p;
  out.h = h;
  const double nu = std::sqrt(h * h + a);
  out.nu = BesselOrder(nu);
  out.sigma = h - nu;
  out.s_c = 0.5 * d - 2.0 / (p - 1.0);
  return out;
}

Admissibility Params::admissibility() const {
  Admissibility res;
  const double q = p - 1.0;
  std::ostringstream why;
  if (d == 3 && q > 4.0 / 3.0 && q <= 2.0) {
    if (a > -h * h) {
      res.admissible = true;
      res.branch = 1;
      return res;
    }
    why << "branch 1 (d = 3, 4/3 < p-1 <= 2): need a > " << -h * h << ", got " << a << "; ";
  } else if (d == 3) {
    why << "branch 1 (d = 3, 4/3 < p-1 <= 2): p-1 = " << q << " out of range; ";
  } else {
    why << "branch 1 requires d = 3; ";
  }
  const double lo = std::max(2.0 / (d - 2), 4.0 / d);
  const double hi = 4.0 / (d - 2);
  if (q > lo && q < hi) {
    const double shift = h - 1.0 / q;
    const double amin = -h * h + shift * shift;
    if (a > amin) {
      res.admissible = true;
      res.branch = 2;
      return res;
    }
    why << "branch 2: need a > " << amin << ", got " << a;
  } else {
    why << "branch 2: p-1 = " << q << " not in (" << lo << ", " << hi << ")";
  }
  res.reason = why.str();
  return res;
}

double Params::sphere_area() const {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / specfun::gamma_fn(0.5 * d);
}

namespace {

// Newton-Schulz iteration towards the orthogonal polar factor. T is
// symmetric, so the polar factor is a symmetric involution.
void polish_involution(MatrixXd& T) {
  const Eigen::Index n = T.rows();
  MatrixXd E(n, n);
  for (int it = 0; it < 4; ++it) {
    E.noalias() = T * T;
    E.diagonal().array() -= 1.0;
    if (E.cwiseAbs().maxCoeff() < 1e-15)
      break;
    T.noalias() -= 0.5 * (T * E);
    T = 0.5 * (T + T.transpose()).eval();
  }
}

} // namespace

BasisPtr build_basis(const Params& params, double R, int N) {
  if (N < 2)
    throw DomainError("build_basis requires N >= 2");
  if (!(R > 0.0) || !std::isfinite(R))
    throw DomainError("build_basis requires R_max > 0");

  auto b = std::make_shared<HankelBasis>();
  b->params = params;
  b->R = R;
  b->N = N;
  const double nu = params.nu.value();
  const double h = params.h;
  const auto z = specfun::bessel_zeros(params.nu, N + 1);
  b->zeros = Eigen::Map<const VectorXd>(z.data(), N + 1);
  b->S = z.back();
  const double S = b->S;
  const VectorXd j = b->zeros.head(N);

  b->r = j * (R / S);
  b->rho = j / R;
  b->J1.resize(N);
  for (int k = 0; k < N; ++k)
    b->J1(k) = std::abs(specfun::bessel_j(BesselOrder(nu + 1.0), j(k)));

  b->weights = (2.0 * R * R / (S * S)) * b->J1.array().square().inverse();
  b->spectral_weights = (2.0 / (R * R)) * b->J1.array().square().inverse();

  b->T.resize(N, N);
  for (int k = 0; k < N; ++k) {
    for (int m = k; m < N; ++m) {
      const double v = 2.0 * specfun::bessel_j(params.nu, j(m) * j(k) / S) /
                       (S * b->J1(m) * b->J1(k));
      b->T(m, k) = v;
      b->T(k, m) = v;
    }
  }
  polish_involution(b->T);

  const double V = S / R;
  b->alpha = b->r.array().pow(h) * R / b->J1.array();
  b->beta = b->rho.array().pow(h) * V / b->J1.array();
  b->omega = params.sphere_area();
  return b;
}

const MatrixXd& HankelBasis::derivative() const {
  std::call_once(deriv_once_, [this] {
    const double nu = params.nu.value();
    const double h = params.h;
    const double sigma = params.sigma;
    const BesselOrder nu1(nu + 1.0);
    // B_km = d/dr [ r^{-h} J_nu(rho_m r) ] at r_k
    //      = r_k^{-h} [ -(sigma / r_k) J_nu(rho_m r_k) - rho_m J_{nu+1}(rho_m r_k) ]
    MatrixXd B(N, N);
    for (int k = 0; k < N; ++k) {
      const double rk = r(k);
      const double scale = std::pow(rk, -h);
      for (int m = 0; m < N; ++m) {
        const double jn = 0.5 * T(m, k) * S * J1(m) * J1(k); // J_nu(rho_m r_k)
        const double jn1 = specfun::bessel_j(nu1, rho(m) * rk);
        B(k, m) = scale * (-(sigma / rk) * jn - rho(m) * jn1);
      }
    }
    // f -> c = 2/(S R J1) .* T (alpha .* f)
    const VectorXd cscale = 2.0 / (S * R * J1.array());
    MatrixXd C = cscale.asDiagonal() * T * alpha.asDiagonal();
    deriv_ = B * C;
  });
  return deriv_;
}

RadialField RadialField::physical(BasisPtr b, VectorXcd values) {
  if (values.size() != b->N)
    throw UsageError("sample count does not match basis size");
  return RadialField{std::move(b), Domain::physical, std::move(values)};
}

RadialField RadialField::from_function(BasisPtr b, const std::function<cplx(double)>& f) {
  VectorXcd v(b->N);
  for (int k = 0; k < b->N; ++k)
    v(k) = f(b->r(k));
  return RadialField{std::move(b), Domain::physical, std::move(v)};
}

namespace {

// Y = T X for complex X, computed as a real (2 x N) * (N x N) product.
VectorXcd apply_T(const MatrixXd& T, const VectorXcd& x) {
  const Eigen::Index n = x.size();
  VectorXcd y(n);
  Eigen::Map<const MatrixXd> X(reinterpret_cast<const double*>(x.data()), 2, n);
  Eigen::Map<MatrixXd> Y(reinterpret_cast<double*>(y.data()), 2, n);
  Y.noalias() = X * T;
  return y;
}

} // namespace

RadialField hankel_apply(const RadialField& f) {
  const HankelBasis& b = *f.basis;
  RadialField out{f.basis, Domain::spectral, {}};
  if (f.domain == Domain::physical) {
    VectorXcd x = f.v.array() * b.alpha.array();
    out.v = apply_T(b.T, x).array() / b.beta.array();
  } else {
    VectorXcd y = f.v.array() * b.beta.array();
    out.v = apply_T(b.T, y).array() / b.alpha.array();
    out.domain = Domain::physical;
  }
  return out;
}

RadialField hankel_apply(const HankelBasis& basis, const RadialField& f) {
  if (f.basis.get() != &basis)
    throw UsageError("hankel_apply: field lives on a different basis");
  return hankel_apply(f);
}

void apply_scaled_multiplier(const HankelBasis& b, VectorXcd& x, const VectorXcd& m) {
  VectorXcd y = apply_T(b.T, x);
  y.array() *= m.array();
  x = apply_T(b.T, y);
}

RadialField apply_multiplier(const RadialField& f, const VectorXcd& m) {
  const HankelBasis& b = *f.basis;
  if (m.size() != b.N)
    throw UsageError("multiplier length does not match basis size");
  RadialField out = f;
  if (f.domain == Domain::spectral) {
    out.v.array() *= m.array();
    return out;
  }
  VectorXcd x = f.v.array() * b.alpha.array();
  apply_scaled_multiplier(b, x, m);
  out.v = x.array() / b.alpha.array();
  return out;
}

RadialField apply_multiplier(const RadialField& f, const std::function<cplx(double)>& m) {
  const HankelBasis& b = *f.basis;
  VectorXcd mv(b.N);
  for (int k = 0; k < b.N; ++k) {
    mv(k) = m(b.rho(k));
    if (!std::isfinite(mv(k).real()) || !std::isfinite(mv(k).imag()))
      throw DomainError("multiplier is not finite on the spectral nodes");
  }
  return apply_multiplier(f, mv);
}

VectorXcd to_physical(const RadialField& f) {
  return f.domain == Domain::physical ? f.v : hankel_apply(f).v;
}

VectorXcd to_spectral(const RadialField& f) {
  return f.domain == Domain::spectral ? f.v : hankel_apply(f).v;
}

NormKind parse_norm_kind(std::string_view name) {
  if (name == "L2")
    return NormKind::L2;
  if (name == "Lq")
    return NormKind::Lq;
  if (name == "Hdot1a")
    return NormKind::Hdot1a;
  if (name == "H1a")
    return NormKind::H1a;
  if (name == "Linf")
    return NormKind::Linf;
  throw UsageError("unknown norm kind '" + std::string(name) + "'");
}

double integrate(const HankelBasis& b, const VectorXd& g) {
  const double e = static_cast<double>(b.params.d - 2);
  return b.omega * (b.weights.array() * b.r.array().pow(e) * g.array()).sum();
}

double norm(const RadialField& f, NormKind kind, double q) {
  const HankelBasis& b = *f.basis;
  const double s2 = 2.0 / (b.S * b.S);
  switch (kind) {
  case NormKind::L2: {
    // Plancherel: the same sum in either domain
    const VectorXd& sc = f.domain == Domain::physical ? b.alpha : b.beta;
    return std::sqrt(b.omega * s2 * (f.v.array() * sc.array()).abs2().sum());
  }
  case NormKind::Lq: {
    if (!(q >= 1.0))
      throw DomainError("L^q norm requires q >= 1");
    const VectorXcd u = to_physical(f);
    return std::pow(integrate(b, u.array().abs().pow(q).matrix()), 1.0 / q);
  }
  case NormKind::Hdot1a: {
    const VectorXcd F = to_spectral(f);
    return std::sqrt(b.omega * s2 *
                     (F.array() * b.beta.array() * b.rho.array()).abs2().sum());
  }
  case NormKind::H1a: {
    const double l2 = norm(f, NormKind::L2);
    const double h1 = norm(f, NormKind::Hdot1a);
    return std::sqrt(l2 * l2 + h1 * h1);
  }
  case NormKind::Linf: {
    const double sup = to_physical(f).cwiseAbs().maxCoeff();
    return b.params.a == 0.0 ? std::max(sup, std::abs(origin_coefficient(f))) : sup;
  }
  }
  throw UsageError("unknown norm kind");
}

VectorXd fb_coefficients(const HankelBasis& b, const VectorXd& f) {
  VectorXd x = f.array() * b.alpha.array();
  VectorXd y = b.T * x;
  return 2.0 * y.array() / (b.S * b.R * b.J1.array());
}

VectorXd fb_to_physical(const HankelBasis& b, const VectorXd& c) {
  VectorXd y = c.array() * (0.5 * b.S * b.R) * b.J1.array();
  VectorXd x = b.T * y;
  return x.array() / b.alpha.array();
}

cplx origin_coefficient(const RadialField& f) {
  const HankelBasis& b = *f.basis;
  const double nu = b.params.nu.value();
  VectorXcd x = to_physical(f).array() * b.alpha.array();
  VectorXcd y = apply_T(b.T, x);
  // r^{-h} J_nu(rho r) ~ r^{-sigma} (rho/2)^nu / Gamma(nu+1)
  const double lg = specfun::log_gamma(nu + 1.0);
  cplx acc = 0.0;
  for (int m = 0; m < b.N; ++m)
    acc += 2.0 * y(m) / (b.S * b.R * b.J1(m)) * std::exp(nu * std::log(0.5 * b.rho(m)) - lg);
  return acc;
}

cplx interpolate(const RadialField& f, double r) {
  const HankelBasis& b = *f.basis;
  if (!(r > 0.0))
    throw DomainError("interpolate requires r > 0");
  if (r >= b.R)
    return 0.0;
  VectorXcd x = to_physical(f).array() * b.alpha.array();
  VectorXcd y = apply_T(b.T, x);
  cplx g = 0.0;
  for (int m = 0; m < b.N; ++m)
    g += 2.0 * y(m) / (b.S * b.R * b.J1(m)) * specfun::bessel_j(b.params.nu, b.rho(m) * r);
  return g * std::pow(r, -b.params.h);
}

RefinedQuadrature::RefinedQuadrature(BasisPtr basis, int panels) : basis_(std::move(basis)) {
  const HankelBasis& b = *basis_;
  if (panels <= 0)
    panels = std::max(4, b.N / 4);
  const auto& gl = specfun::gauss_legendre16();
  const int order = static_cast<int>(gl.nodes.size());
  const int Q = panels * order;
  rq_.resize(Q);
  wq_.resize(Q);
  const double smax = std::sqrt(b.R);
  const double width = smax / panels;
  for (int i = 0; i < panels; ++i) {
    const double lo = i * width;
    for (int j = 0; j < order; ++j) {
      const double s = lo + 0.5 * width * (gl.nodes[j] + 1.0);
      rq_(i * order + j) = s * s;
      wq_(i * order + j) = 0.5 * width * gl.weights[j] * 2.0 * s; // dr = 2 s ds
    }
  }
  const double h = b.params.h;
  phi_.resize(Q, b.N);
  for (int m = 0; m < b.N; ++m)
    for (int q = 0; q < Q; ++q)
      phi_(q, m) = std::pow(rq_(q), -h) * specfun::bessel_j(b.params.nu, b.rho(m) * rq_(q));
  mode_norm_ = 0.5 * b.R * b.R * b.J1.array().square();
}

VectorXd RefinedQuadrature::evaluate(const VectorXd& c) const { return phi_ * c; }

VectorXd RefinedQuadrature::project(const VectorXd& values) const {
  const double e = static_cast<double>(basis_->params.d - 1);
  VectorXd wv = wq_.array() * rq_.array().pow(e) * values.array();
  VectorXd c = phi_.transpose() * wv;
  return c.array() / mode_norm_.array();
}

double RefinedQuadrature::integrate(const VectorXd& g) const {
  const double e = static_cast<double>(basis_->params.d - 1);
  return basis_->omega * (wq_.array() * rq_.array().pow(e) * g.array()).sum();
}

double RefinedQuadrature::mass(const VectorXd& c) const {
  return basis_->omega * (c.array().square() * mode_norm_.array()).sum();
}

double RefinedQuadrature::kinetic(const VectorXd& c) const {
  return basis_->omega *
         (c.array().square() * basis_->rho.array().square() * mode_norm_.array()).sum();
}

} // namespace radnls
