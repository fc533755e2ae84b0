#include "radnls/groundstate.hpp"

#include "radnls/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace radnls {

using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

double signed_pow(double x, double e) { return std::copysign(std::pow(std::abs(x), e), x); }

// Coefficient-space inner product int f g dx for f, g given by FB coefficients.
double coeff_dot(const RefinedQuadrature& rq, const VectorXd& a, const VectorXd& b) {
  return rq.basis().omega * (a.array() * b.array() * rq.mode_norms().array()).sum();
}

struct Pohozaev {
  double mass_coef, kin_coef, energy_coef;
};

Pohozaev pohozaev_coefficients(const Params& P) {
  const double d = P.d, p = P.p;
  return {(d + 2 - (d - 2) * p) / (2 * (p + 1)), d * (p - 1) / (2 * (p + 1)),
          (d * p - (d + 4)) / (2 * d * (p - 1))};
}

// e^{-r^2} r^{-sigma} (1+r)^sigma: Gaussian bump with the origin behaviour of Q_a
VectorXd default_init(const Params& P, const VectorXd& r) {
  return (-r.array().square()).exp() * r.array().pow(-P.sigma) * (1.0 + r.array()).pow(P.sigma);
}

void fill_report(GroundStateReport& rep, double M, double K, double Pn) {
  const Params& P = rep.params;
  const Pohozaev c = pohozaev_coefficients(P);
  rep.mass = M;
  rep.kinetic_a = K;
  rep.pnorm = Pn;
  rep.energy = 0.5 * K - Pn / (P.p + 1.0);

  const double d = P.d, p = P.p, sc = P.s_c;
  const double A = (d + 2 - (d - 2) * p) / 2.0, B = d * (p - 1) / 2.0;
  rep.C_a = Pn / (std::pow(M, 0.5 * A) * std::pow(K, 0.5 * B));
  const double C_id = 2 * (p + 1) / (d * (p - 1)) /
                      (std::pow(M, 0.5 * (1 - sc) * (p - 1)) * std::pow(K, 0.5 * sc * (p - 1)));

  if (sc > 0.0) {
    if (!(rep.energy > 0.0))
      throw InternalError("ground state energy is not positive although s_c > 0");
    rep.threshold_ME = std::exp((1 - sc) * std::log(M) + sc * std::log(rep.energy));
  } else {
    rep.threshold_ME = M;
  }
  rep.threshold_MH = std::exp(0.5 * (1 - sc) * std::log(M) + 0.5 * sc * std::log(K));

  rep.residuals.pohozaev_mass = std::abs(M - c.mass_coef * Pn) / M;
  rep.residuals.pohozaev_kinetic = std::abs(K - c.kin_coef * Pn) / K;
  // relative to the kinetic part of the energy: E_a(Q) itself vanishes when s_c = 0
  rep.residuals.energy_identity = std::abs(rep.energy - c.energy_coef * K) / (0.5 * K);
  rep.residuals.C_a_crosscheck = std::abs(rep.C_a / C_id - 1.0);
}

GroundStateReport solve_galerkin(const Params& P, const BasisPtr& basis,
                                 const GroundStateOptions& opts) {
  const HankelBasis& b = *basis;
  auto quad = std::make_shared<RefinedQuadrature>(basis, opts.quad_panels);
  const VectorXd& rq = quad->nodes();
  const double p = P.p;
  const double gamma = p / (p - 1.0);
  const VectorXd lam1 = b.rho.array().square() + 1.0;

  VectorXd c;
  if (opts.init) {
    const VectorXcd u = to_physical(*opts.init);
    c = fb_coefficients(b, u.real());
  } else {
    c = quad->project(default_init(P, rq));
  }
  const double c_init = std::sqrt(coeff_dot(*quad, c, c));
  if (!(c_init > 0.0))
    throw ConvergenceError("ground state: zero initial guess", 0.0, 0.0);

  VectorXd cp;
  double change = 1.0;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const VectorXd q = quad->evaluate(c);
    cp = quad->project(q.unaryExpr([p](double x) { return signed_pow(x, p); }));
    const double num = coeff_dot(*quad, (lam1.array() * c.array()).matrix(), c);
    const double den = coeff_dot(*quad, cp, c);
    if (!(den > 0.0))
      throw ConvergenceError("ground state: <Q^p, Q> <= 0 (bad initial guess)", change, 1.0);
    const double S = num / den;
    VectorXd cn = std::pow(S, gamma) * (cp.array() / lam1.array()).matrix();
    const VectorXd diff = cn - c;
    const double nn = coeff_dot(*quad, cn, cn);
    change = std::sqrt(coeff_dot(*quad, diff, diff) / nn);
    c = std::move(cn);
    if (std::sqrt(nn) < 1e-8 * c_init)
      throw ConvergenceError("ground state: iterate collapsed to zero", change, 1.0);
    if (change < opts.tol)
      break;
  }
  const VectorXd q = quad->evaluate(c);
  cp = quad->project(q.unaryExpr([p](double x) { return signed_pow(x, p); }));
  const VectorXd res = (lam1.array() * c.array()).matrix() - cp;
  const double elliptic = std::sqrt(coeff_dot(*quad, res, res) / coeff_dot(*quad, c, c));
  if (it >= opts.max_iter)
    throw ConvergenceError("ground state: Petviashvili did not converge", change, elliptic);

  GroundStateReport rep;
  rep.params = P;
  rep.mode = GroundStateMode::galerkin;
  rep.iterations = it + 1;
  rep.last_change = change;
  rep.Q = RadialField{basis, Domain::physical, fb_to_physical(b, c).cast<cplx>()};
  rep.quad = quad;
  const double Pn = quad->integrate(q.array().abs().pow(p + 1.0).matrix());
  fill_report(rep, quad->mass(c), quad->kinetic(c), Pn);
  rep.residuals.elliptic = elliptic;
  return rep;
}

GroundStateReport solve_collocation(const Params& P, const BasisPtr& basis,
                                    const GroundStateOptions& opts) {
  const HankelBasis& b = *basis;
  const double p = P.p;
  const double gamma = p / (p - 1.0);
  const VectorXcd lam1 = (b.rho.array().square() + 1.0).cast<cplx>();
  const VectorXcd inv = lam1.cwiseInverse();

  VectorXd q;
  if (opts.init)
    q = to_physical(*opts.init).real();
  else
    q = default_init(P, b.r);
  auto field = [&](const VectorXd& v) {
    return RadialField{basis, Domain::physical, v.cast<cplx>()};
  };
  auto dot = [&](const VectorXd& x, const VectorXd& y) {
    return integrate(b, (x.array() * y.array()).matrix());
  };
  const double q_init = std::sqrt(dot(q, q));
  if (!(q_init > 0.0))
    throw ConvergenceError("ground state: zero initial guess", 0.0, 0.0);

  double change = 1.0;
  int it = 0;
  VectorXd qp;
  for (; it < opts.max_iter; ++it) {
    qp = q.unaryExpr([p](double x) { return signed_pow(x, p); });
    const VectorXd Lq = apply_multiplier(field(q), lam1).v.real();
    const double num = dot(Lq, q);
    const double den = dot(qp, q);
    if (!(den > 0.0))
      throw ConvergenceError("ground state: <Q^p, Q> <= 0 (bad initial guess)", change, 1.0);
    VectorXd qn = std::pow(num / den, gamma) * apply_multiplier(field(qp), inv).v.real();
    const VectorXd diff = qn - q;
    const double nn = dot(qn, qn);
    change = std::sqrt(dot(diff, diff) / nn);
    q = std::move(qn);
    if (std::sqrt(nn) < 1e-8 * q_init)
      throw ConvergenceError("ground state: iterate collapsed to zero", change, 1.0);
    if (change < opts.tol)
      break;
  }
  qp = q.unaryExpr([p](double x) { return signed_pow(x, p); });
  const VectorXd res = apply_multiplier(field(q), lam1).v.real() - qp;
  const double elliptic = std::sqrt(dot(res, res) / dot(q, q));
  if (it >= opts.max_iter)
    throw ConvergenceError("ground state: Petviashvili did not converge", change, elliptic);

  GroundStateReport rep;
  rep.params = P;
  rep.mode = GroundStateMode::collocation;
  rep.iterations = it + 1;
  rep.last_change = change;
  rep.Q = field(q);
  const double M = std::pow(norm(rep.Q, NormKind::L2), 2);
  const double K = std::pow(norm(rep.Q, NormKind::Hdot1a), 2);
  const double Pn = integrate(b, q.array().abs().pow(p + 1.0).matrix());
  fill_report(rep, M, K, Pn);
  rep.residuals.elliptic = elliptic;
  return rep;
}

} // namespace

GroundStateReport solve_ground_state(const Params& params, BasisPtr basis,
                                     const GroundStateOptions& opts) {
  const Params& bp = basis->params;
  if (bp.d != params.d || bp.a != params.a)
    throw UsageError("solve_ground_state: basis built for different (d, a)");
  if (params.d > 2 && !(params.p < (params.d + 2.0) / (params.d - 2.0)))
    throw DomainError("solve_ground_state: p must be energy-subcritical, p < (d+2)/(d-2)");
  return opts.mode == GroundStateMode::galerkin ? solve_galerkin(params, basis, opts)
                                                 : solve_collocation(params, basis, opts);
}

std::string to_json(const GroundStateReport& rep) {
  nlohmann::ordered_json j;
  j["params"] = {{"d", rep.params.d},     {"a", rep.params.a},         {"p", rep.params.p},
                 {"sigma", rep.params.sigma}, {"nu", rep.params.nu.value()}, {"s_c", rep.params.s_c}};
  const HankelBasis& b = *rep.Q.basis;
  j["grid"] = {{"R_max", b.R}, {"N", b.N}};
  j["solver"] = {{"mode", rep.mode == GroundStateMode::galerkin ? "galerkin" : "collocation"},
                 {"iterations", rep.iterations},
                 {"last_change", rep.last_change}};
  std::vector<double> r(b.r.data(), b.r.data() + b.N);
  std::vector<double> v(b.N);
  for (int k = 0; k < b.N; ++k)
    v[k] = rep.Q.v(k).real();
  j["Q"] = {{"r", r}, {"values", v}};
  j["mass"] = rep.mass;
  j["kinetic_a"] = rep.kinetic_a;
  j["pnorm"] = rep.pnorm;
  j["energy"] = rep.energy;
  j["C_a"] = rep.C_a;
  j["threshold_ME"] = rep.threshold_ME;
  j["threshold_MH"] = rep.threshold_MH;
  j["residuals"] = {{"elliptic", rep.residuals.elliptic},
                    {"pohozaev_mass", rep.residuals.pohozaev_mass},
                    {"pohozaev_kinetic", rep.residuals.pohozaev_kinetic},
                    {"energy_identity", rep.residuals.energy_identity},
                    {"C_a_crosscheck", rep.residuals.C_a_crosscheck}};
  return j.dump(2);
}

// ---------------------------------------------------------------- shooting

namespace {

struct ShotResult {
  bool overshoot = false;
  double event_r = 0.0;
};

template <class Callback>
ShotResult shoot(int d, double p, double A, const ShootingOptions& o, Callback&& record) {
  const double h = o.step;
  const int n = static_cast<int>(std::ceil(o.r_max / h));
  auto rhs = [&](double r, double Q, double dQ, double& ddQ) {
    ddQ = -(d - 1) / r * dQ + Q - signed_pow(Q, p);
  };
  // series start: Q = A + B r^2 / 2, B = (A - A^p)/d
  const double B = (A - signed_pow(A, p)) / d;
  double Q = A + 0.5 * B * h * h;
  double dQ = B * h;
  record(0, 0.0, A, 0.0);
  record(1, h, Q, dQ);
  for (int i = 1; i < n; ++i) {
    const double r = i * h;
    double k1q = dQ, k1d;
    rhs(r, Q, dQ, k1d);
    double k2q = dQ + 0.5 * h * k1d, k2d;
    rhs(r + 0.5 * h, Q + 0.5 * h * k1q, k2q, k2d);
    double k3q = dQ + 0.5 * h * k2d, k3d;
    rhs(r + 0.5 * h, Q + 0.5 * h * k2q, k3q, k3d);
    double k4q = dQ + h * k3d, k4d;
    rhs(r + h, Q + h * k3q, k4q, k4d);
    Q += h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
    dQ += h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d);
    record(i + 1, r + h, Q, dQ);
    if (Q < 0.0)
      return {true, r + h};
    if (dQ > 0.0)
      return {false, r + h};
  }
  return {false, n * h};
}

} // namespace

double ShootingProfile::operator()(double x) const {
  if (x < 0.0 || x > r_valid || r.size() < 2)
    return 0.0;
  const double h = r[1] - r[0];
  std::size_t i = std::min(static_cast<std::size_t>(x / h), r.size() - 2);
  const double t = (x - r[i]) / h;
  const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
  const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
  return h00 * Q[i] + h10 * h * dQ[i] + h01 * Q[i + 1] + h11 * h * dQ[i + 1];
}

ShootingProfile shoot_oracle_a0(int d, double p, const ShootingOptions& opts) {
  if (d < 3 || !(p > 1.0) || !(p < (d + 2.0) / (d - 2.0)))
    throw DomainError("shoot_oracle_a0 requires d >= 3 and 1 < p < (d+2)/(d-2)");
  auto none = [](int, double, double, double) {};
  // Q(0) <= 1 never overshoots: Q''(0) = (A - A^p)/d >= 0
  double lo = 1.0;
  double hi = 2.0;
  int guard = 0;
  while (!shoot(d, p, hi, opts, none).overshoot) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 60)
      throw InternalError("shoot_oracle_a0: could not bracket Q(0)");
  }
  for (int i = 0; i < opts.bisection_steps && hi - lo > 4e-16 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (shoot(d, p, mid, opts, none).overshoot)
      hi = mid;
    else
      lo = mid;
  }
  const double r_hi = shoot(d, p, hi, opts, none).event_r;

  ShootingProfile prof;
  prof.d = d;
  prof.p = p;
  prof.Q0 = lo;
  const int n = static_cast<int>(std::ceil(opts.r_max / opts.step));
  prof.r.assign(n + 1, 0.0);
  prof.Q.assign(n + 1, 0.0);
  prof.dQ.assign(n + 1, 0.0);
  int last = 0;
  const ShotResult res = shoot(d, p, lo, opts, [&](int i, double r, double Q, double dQ) {
    prof.r[i] = r;
    prof.Q[i] = Q;
    prof.dQ[i] = dQ;
    last = i;
  });
  // trajectories on either side agree until the first of them turns away
  prof.r_valid = std::min(res.event_r, r_hi);
  prof.r.resize(last + 1);
  prof.Q.resize(last + 1);
  prof.dQ.resize(last + 1);
  return prof;
}

// ------------------------------------------------------- sharp constant etc.

SharpConstant sharp_constant(const GroundStateReport& rep) {
  const Params& P = rep.params;
  const double d = P.d, p = P.p, sc = P.s_c;
  SharpConstant out;
  out.C_a_direct = gn_functional(rep.Q, p, rep.quad.get());
  out.C_a_identity = 2 * (p + 1) / (d * (p - 1)) /
                     (std::pow(rep.mass, 0.5 * (1 - sc) * (p - 1)) *
                      std::pow(rep.kinetic_a, 0.5 * sc * (p - 1)));
  return out;
}

double lebesgue_power(const RadialField& f, double q, const RefinedQuadrature* quad) {
  const VectorXcd u = to_physical(f);
  if (quad == nullptr)
    return integrate(*f.basis, u.cwiseAbs().array().pow(q).matrix());
  if (&quad->basis() != f.basis.get())
    throw UsageError("lebesgue_power: quadrature belongs to another basis");
  const HankelBasis& b = *f.basis;
  const VectorXd re = quad->evaluate(fb_coefficients(b, u.real()));
  const VectorXd im = quad->evaluate(fb_coefficients(b, u.imag()));
  return quad->integrate((re.array().square() + im.array().square()).pow(0.5 * q).matrix());
}

double gn_functional(const RadialField& f, double p, const RefinedQuadrature* quad) {
  const double d = f.basis->params.d;
  const double M = std::pow(norm(f, NormKind::L2), 2);
  const double K = std::pow(norm(f, NormKind::Hdot1a), 2);
  const double Pn = lebesgue_power(f, p + 1.0, quad);
  return Pn / (std::pow(M, 0.25 * (d + 2 - (d - 2) * p)) * std::pow(K, 0.25 * d * (p - 1)));
}

double coercivity_delta_prime(const Params& P, double delta) {
  if (!(delta > 0.0))
    return 0.0;
  if (delta >= 1.0)
    return 1.0;
  const double d = P.d, p = P.p, sc = P.s_c;
  if (!(sc > 0.0))
    throw DomainError("coercivity_delta_prime needs s_c > 0");
  const double D = d * p - d - 4.0;
  const double target = std::pow(1.0 - delta, 1.0 / sc);
  auto rhs = [&](double y) {
    return d * (p - 1) / D * std::pow(y, 2.0 / sc) - 4.0 / D * std::pow(y, d * (p - 1) / (2.0 * sc));
  };
  // rhs increases from 0 at y = 0 to 1 at y = 1
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (rhs(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 1.0 - 0.5 * (lo + hi);
}

DataClassification classify_data(const RadialField& u0, const GroundStateReport& rep) {
  const Params& P = rep.params;
  if (u0.basis->params.d != P.d || u0.basis->params.a != P.a)
    throw UsageError("classify_data: data and ground state live on different problems");
  const RefinedQuadrature* quad = (rep.quad && &rep.quad->basis() == u0.basis.get()) ? rep.quad.get() : nullptr;
  const double sc = P.s_c, p = P.p, d = P.d;
  const double M = std::pow(norm(u0, NormKind::L2), 2);
  const double K = std::pow(norm(u0, NormKind::Hdot1a), 2);
  const double Pn = lebesgue_power(u0, p + 1.0, quad);

  DataClassification out;
  out.energy = 0.5 * K - Pn / (p + 1.0);
  if (sc > 0.0) {
    out.ME = out.energy > 0.0 ? std::exp((1 - sc) * std::log(M) + sc * std::log(out.energy))
                              : std::numeric_limits<double>::quiet_NaN();
  } else {
    out.ME = M;
  }
  out.MH = std::exp(0.5 * (1 - sc) * std::log(M) + 0.5 * sc * std::log(K));
  out.ME_ratio = out.ME / rep.threshold_ME;
  out.MH_ratio = out.MH / rep.threshold_MH;
  const bool me_below = out.ME_ratio < 1.0; // false for NaN
  const bool mh_below = out.MH_ratio < 1.0;
  out.below_threshold = me_below && mh_below;

  out.coercivity_margin = (K - d * (p - 1) / (2 * (p + 1)) * Pn) / K;
  out.delta = me_below ? 1.0 - out.ME_ratio : 0.0;
  if (sc > 0.0 && me_below && out.MH_ratio <= 1.0) {
    out.delta_prime = coercivity_delta_prime(P, out.delta);
    // Gagliardo-Nirenberg + (3.6): margin >= 1 - y^{p-1} >= min(1, p-1) delta'
    out.c = std::min(1.0, p - 1.0) * out.delta_prime;
    out.coercive = out.coercivity_margin >= out.c && out.c > 0.0;
  } else if (sc == 0.0 && mh_below) {
    out.c = 0.0;
    out.coercive = out.coercivity_margin > 0.0;
  }
  return out;
}

} // namespace radnls
