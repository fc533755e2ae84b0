#include "radnls/dynamics.hpp"

#include "radnls/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

namespace radnls {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

const cplx kI(0.0, 1.0);

void check_guard(const HankelBasis& b, double dt, double guard) {
  const double rm = b.rho_max();
  if (std::abs(dt) * rm * rm > guard)
    throw StepSizeError("time step does not resolve the fastest mode: |dt| rho_max^2 = " +
                        std::to_string(std::abs(dt) * rm * rm));
}

VectorXcd linear_multiplier(const HankelBasis& b, double dt) {
  VectorXcd m(b.N);
  for (int k = 0; k < b.N; ++k)
    m(k) = std::exp(-kI * (dt * b.rho(k) * b.rho(k)));
  return m;
}

// One Strang step with a precomputed multiplier, in place on physical samples.
void step_inplace(const HankelBasis& b, VectorXcd& u, double dt, const VectorXcd& mult,
                  bool nonlinear) {
  const double p = b.params.p;
  if (nonlinear)
    nonlinear_phase(u, 0.5 * dt, p);
  VectorXcd x = u.array() * b.alpha.array();
  apply_scaled_multiplier(b, x, mult);
  u = x.array() / b.alpha.array();
  if (nonlinear)
    nonlinear_phase(u, 0.5 * dt, p);
}

VectorXd mode_value_row(const HankelBasis& b, double r) {
  VectorXd row(b.N);
  const double s = std::pow(r, -b.params.h);
  for (int m = 0; m < b.N; ++m)
    row(m) = s * specfun::bessel_j(b.params.nu, b.rho(m) * r);
  return row;
}

VectorXd mode_slope_row(const HankelBasis& b, double r) {
  VectorXd row(b.N);
  const double s = std::pow(r, -b.params.h);
  const BesselOrder nu1(b.params.nu.value() + 1.0);
  for (int m = 0; m < b.N; ++m)
    row(m) = s * (-(b.params.sigma / r) * specfun::bessel_j(b.params.nu, b.rho(m) * r) -
                  b.rho(m) * specfun::bessel_j(nu1, b.rho(m) * r));
  return row;
}

} // namespace

void nonlinear_phase(VectorXcd& u, double tau, double p) {
  const double e = 0.5 * (p - 1.0);
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    const double m = std::pow(std::norm(u(k)), e);
    u(k) *= std::exp(kI * (tau * m));
  }
}

struct VirialWeight::Quadrature {
  VectorXd r, w; // nodes and r-weights
  MatrixXd phi, dphi;
  Eigen::RowVectorXd phi_half, dphi_half; // at r = R/2
  Eigen::Index split = 0;                 // first node beyond R/2
};

SimState SimState::from_field(const RadialField& u0, double t0) {
  return SimState{u0.basis->params, u0.basis,
                  RadialField{u0.basis, Domain::physical, to_physical(u0)}, t0};
}

SimState strang_step(const SimState& state, double dt, const StepOptions& opts) {
  const HankelBasis& b = *state.basis;
  check_guard(b, dt, opts.guard);
  SimState out = state;
  out.u.v = to_physical(state.u);
  out.u.domain = Domain::physical;
  step_inplace(b, out.u.v, dt, linear_multiplier(b, dt), opts.nonlinear);
  out.t += dt;
  return out;
}

double smooth_cutoff(double s) {
  if (s <= 1.0)
    return 1.0;
  if (s >= 2.0)
    return 0.0;
  auto f = [](double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; };
  const double a = f(2.0 - s), c = f(s - 1.0);
  return a / (a + c);
}

double VirialWeight::value(double r) const {
  if (kind == WeightKind::quadratic || r <= 0.5 * R)
    return r * r;
  return R * r - 0.25 * R * R;
}

double VirialWeight::slope(double r) const {
  return kind == WeightKind::quadratic ? 2.0 * r : std::min(2.0 * r, R);
}

double VirialWeight::curvature(double r) const {
  return (kind == WeightKind::quadratic || r < 0.5 * R) ? 2.0 : 0.0;
}

VirialWeight build_weight(BasisPtr basis, WeightKind kind, double R) {
  const HankelBasis& b = *basis;
  VirialWeight out;
  out.kind = kind;
  out.R = R;
  if (kind == WeightKind::truncated && !(R > 1.0))
    throw DomainError("truncated virial weight needs R > 1");
  out.w.resize(b.N);
  out.dw.resize(b.N);
  out.d2w.resize(b.N);
  for (int k = 0; k < b.N; ++k) {
    out.w(k) = out.value(b.r(k));
    out.dw(k) = out.slope(b.r(k));
    out.d2w(k) = out.curvature(b.r(k));
  }
  if (kind == WeightKind::quadratic)
    return out;

  // [0, R/2] graded in sqrt(r) for r^{-sigma} profiles, [R/2, R_box] uniform
  auto q = std::make_shared<VirialWeight::Quadrature>();
  const auto& gl = specfun::gauss_legendre16();
  const int order = static_cast<int>(gl.nodes.size());
  const double half = std::min(0.5 * R, b.R);
  const double box = b.R;
  const int pa = std::max(4, static_cast<int>(std::ceil(0.25 * b.N * std::sqrt(half / box))));
  const int pb = half < box ? std::max(4, static_cast<int>(std::ceil(0.25 * b.N * (box - half) / box))) : 0;
  q->r.resize((pa + pb) * order);
  q->w.resize((pa + pb) * order);
  Eigen::Index n = 0;
  const double ds = std::sqrt(half) / pa;
  for (int i = 0; i < pa; ++i)
    for (int j = 0; j < order; ++j) {
      const double s = (i + 0.5 * (gl.nodes[j] + 1.0)) * ds;
      q->r(n) = s * s;
      q->w(n++) = 0.5 * ds * gl.weights[j] * 2.0 * s;
    }
  q->split = n;
  const double dr = pb > 0 ? (box - half) / pb : 0.0;
  for (int i = 0; i < pb; ++i)
    for (int j = 0; j < order; ++j) {
      q->r(n) = half + (i + 0.5 * (gl.nodes[j] + 1.0)) * dr;
      q->w(n++) = 0.5 * dr * gl.weights[j];
    }
  q->phi.resize(n, b.N);
  q->dphi.resize(n, b.N);
  for (Eigen::Index i = 0; i < n; ++i) {
    q->phi.row(i) = mode_value_row(b, q->r(i)).transpose();
    q->dphi.row(i) = mode_slope_row(b, q->r(i)).transpose();
  }
  q->phi_half = mode_value_row(b, half).transpose();
  q->dphi_half = mode_slope_row(b, half).transpose();
  out.quad = std::move(q);
  return out;
}

namespace {

struct SplitValues {
  VectorXcd u, ur;
  cplx u_half, ur_half;
};

SplitValues split_values(const HankelBasis& b, const VirialWeight::Quadrature& q,
                         const VectorXcd& u) {
  const VectorXd cr = fb_coefficients(b, u.real());
  const VectorXd ci = fb_coefficients(b, u.imag());
  SplitValues s;
  s.u = (q.phi * cr).cast<cplx>() + kI * (q.phi * ci).cast<cplx>();
  s.ur = (q.dphi * cr).cast<cplx>() + kI * (q.dphi * ci).cast<cplx>();
  s.u_half = cplx(q.phi_half.dot(cr), q.phi_half.dot(ci));
  s.ur_half = cplx(q.dphi_half.dot(cr), q.dphi_half.dot(ci));
  return s;
}

double split_integrate(const HankelBasis& b, const VirialWeight::Quadrature& q, const VectorXd& g,
                       Eigen::Index from, Eigen::Index to) {
  const double e = static_cast<double>(b.params.d - 1);
  double acc = 0.0;
  for (Eigen::Index i = from; i < to; ++i)
    acc += q.w(i) * std::pow(q.r(i), e) * g(i);
  return b.omega * acc;
}

} // namespace

VirialValues virial(const SimState& state, const VirialWeight& weight) {
  const HankelBasis& b = *state.basis;
  const VectorXcd u = to_physical(state.u);
  if (weight.w.size() != b.N)
    throw UsageError("virial weight was built on another basis");
  VirialValues out;
  if (weight.kind == WeightKind::quadratic) {
    const VectorXcd ur = b.derivative() * u;
    out.V = integrate(b, (u.array().abs2() * weight.w.array()).matrix());
    const VectorXd flux = 2.0 * (u.conjugate().array() * ur.array()).imag() * weight.dw.array();
    out.dV = integrate(b, flux);
    return out;
  }
  const auto& q = *weight.quad;
  const SplitValues s = split_values(b, q, u);
  VectorXd g(q.r.size()), f(q.r.size());
  for (Eigen::Index i = 0; i < q.r.size(); ++i) {
    g(i) = std::norm(s.u(i)) * weight.value(q.r(i));
    f(i) = 2.0 * (std::conj(s.u(i)) * s.ur(i)).imag() * weight.slope(q.r(i));
  }
  out.V = split_integrate(b, q, g, 0, g.size());
  out.dV = split_integrate(b, q, f, 0, f.size());
  return out;
}

TruncatedVirialRhs truncated_virial_rhs(const SimState& state, const VirialWeight& weight) {
  if (weight.kind != WeightKind::truncated || !weight.quad)
    throw UsageError("truncated_virial_rhs needs a truncated weight");
  const HankelBasis& b = *state.basis;
  const Params& P = b.params;
  const auto& q = *weight.quad;
  const SplitValues s = split_values(b, q, to_physical(state.u));
  const double d = P.d, p = P.p, R = weight.R, half = std::min(0.5 * R, b.R);
  const Eigen::Index n = q.r.size();
  // d^2V/dt^2 = 4 int w''|u_r|^2 - int |u|^2 Lap^2 w + 4a int w'|u|^2/r^3
  //            - 2(p-1)/(p+1) int |u|^{p+1} Lap w
  // With w' = min(2r, R): Lap w = 2d below R/2 and (d-1)R/r above, so
  // (Lap w)' = -2 delta_{R/2} - (d-1)R/r^2 on (R/2, inf), and
  // -int |u|^2 Lap^2 w = int (|u|^2)' (Lap w)'.
  VectorXd kin(n), pot(n), nl(n), grad(n), interp(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = q.r(i);
    const double u2 = std::norm(s.u(i));
    kin(i) = 4.0 * weight.curvature(r) * std::norm(s.ur(i));
    pot(i) = 4.0 * P.a * weight.slope(r) * u2 / (r * r * r);
    const double lap = weight.curvature(r) + (d - 1.0) * weight.slope(r) / r;
    nl(i) = -2.0 * (p - 1.0) / (p + 1.0) * std::pow(u2, 0.5 * (p + 1.0)) * lap;
    grad(i) = i >= q.split ? -2.0 * (std::conj(s.u(i)) * s.ur(i)).real() * (d - 1.0) * R / (r * r)
                           : 0.0;
    interp(i) = (r >= half && r <= R) ? kin(i) : 0.0;
  }
  const double jump = -2.0 * 2.0 * (std::conj(s.u_half) * s.ur_half).real() * b.omega *
                      std::pow(half, d - 1.0);
  TruncatedVirialRhs out;
  out.rhs = split_integrate(b, q, kin + pot + nl + grad, 0, n) + (half < b.R ? jump : 0.0);
  out.interpolation_term = split_integrate(b, q, interp, q.split, n);
  return out;
}

DiagnosticsRow observables(const SimState& state, double R_loc,
                           const std::vector<double>& radii) {
  const HankelBasis& b = *state.basis;
  const Params& P = b.params;
  const VectorXcd u = to_physical(state.u);
  DiagnosticsRow row;
  row.t = state.t;
  const VectorXcd x = u.array() * b.alpha.array();
  const double s2 = b.omega * 2.0 / (b.S * b.S);
  row.mass = s2 * x.squaredNorm();
  {
    Eigen::Map<const MatrixXd> X(reinterpret_cast<const double*>(x.data()), 2, b.N);
    const MatrixXd Y = X * b.T;
    const VectorXd e = (Y.row(0).array().square() + Y.row(1).array().square()).transpose() *
                       b.rho.array().square();
    row.kinetic_a = s2 * e.sum();
    const int top = (3 * b.N) / 4;
    const double band = e.tail(b.N - top).sum();
    row.band_fraction = row.kinetic_a > 0.0 ? s2 * band / row.kinetic_a : 0.0;
  }
  const VectorXd a2 = u.array().abs2();
  const VectorXd up = a2.array().pow(0.5 * (P.p + 1.0));
  row.pnorm = integrate(b, up);
  row.energy = 0.5 * row.kinetic_a - row.pnorm / (P.p + 1.0);
  row.V_quadratic = integrate(b, (a2.array() * b.r.array().square()).matrix());
  const VectorXcd ur = b.derivative() * u;
  row.dV = integrate(b, (4.0 * (u.conjugate().array() * ur.array()).imag() * b.r.array()).matrix());
  VectorXd chi2(b.N);
  for (int k = 0; k < b.N; ++k) {
    const double c = smooth_cutoff(b.r(k) / R_loc);
    chi2(k) = c * c;
  }
  row.local_mass = integrate(b, (chi2.array() * a2.array()).matrix());
  const VectorXd absu = a2.array().sqrt();
  row.sup_weighted = (b.r.array().pow(0.5 * (P.d - 1)) * absu.array()).maxCoeff();
  row.sup_weighted_low = (b.r.array().pow(0.5 * P.d - 1.0) * absu.array()).maxCoeff();
  row.local_pnorm.reserve(radii.size());
  for (double R : radii)
    row.local_pnorm.push_back(integrate(b, (up.array() * (b.r.array() <= R).cast<double>()).matrix()));
  return row;
}

DiagnosticsSeries evolve(SimState& state, double T, const EvolveOptions& opts) {
  const HankelBasis& b = *state.basis;
  if (opts.dt == 0.0 || !(T / opts.dt >= 0.0))
    throw UsageError("evolve: T and dt must have the same sign");
  if (opts.sample_every < 1)
    throw UsageError("evolve: sample_every must be positive");
  check_guard(b, opts.dt, StepOptions{}.guard);

  DiagnosticsSeries series;
  series.params = state.params;
  series.dt = opts.dt;
  series.sample_every = opts.sample_every;
  series.R_loc = opts.R_loc;
  series.truncated_R = opts.truncated_R;
  series.nonlinear = opts.nonlinear;
  series.morawetz_radii = opts.morawetz_radii;

  std::optional<VirialWeight> trunc;
  if (opts.truncated_R > 0.0)
    trunc = build_weight(state.basis, WeightKind::truncated, opts.truncated_R);

  state.u.v = to_physical(state.u);
  state.u.domain = Domain::physical;
  const double t0 = state.t;
  auto sample = [&] {
    DiagnosticsRow row = observables(state, opts.R_loc, opts.morawetz_radii);
    if (trunc) {
      const VirialValues vv = virial(state, *trunc);
      const TruncatedVirialRhs tr = truncated_virial_rhs(state, *trunc);
      row.V_truncated = vv.V;
      row.dV_truncated = vv.dV;
      row.rhs_truncated = tr.rhs;
      row.interpolation_term = tr.interpolation_term;
    }
    for (const auto& obs : opts.observers)
      obs(state, row);
    series.rows.push_back(std::move(row));
  };
  sample();
  const double K0 = series.rows.front().kinetic_a;

  const long total = std::lround(T / opts.dt);
  const long steps = std::min(total, opts.max_steps);
  const VectorXcd mult = linear_multiplier(b, opts.dt);
  for (long n = 1; n <= steps; ++n) {
    step_inplace(b, state.u.v, opts.dt, mult, opts.nonlinear);
    state.t = t0 + n * opts.dt;
    series.steps = n;
    if (n % opts.sample_every == 0 || n == steps) {
      sample();
      const DiagnosticsRow& last = series.rows.back();
      const bool finite = std::isfinite(last.kinetic_a) && std::isfinite(last.mass);
      if (opts.monitor_breach &&
          (!finite || last.band_fraction > opts.band_limit || last.kinetic_a > opts.kinetic_limit * K0)) {
        series.status = RunStatus::breach;
        series.breach_time = state.t;
        return series;
      }
    }
  }
  if (steps < total)
    series.status = RunStatus::step_budget;
  return series;
}

std::string to_csv(const DiagnosticsSeries& series) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "t,mass,energy,kinetic_a,pnorm,V_quadratic,dV,V_truncated,dV_truncated,rhs_truncated,"
        "interpolation_term,local_mass,sup_weighted,sup_weighted_low,band_fraction";
  for (double R : series.morawetz_radii)
    os << ",local_pnorm_" << R;
  os << '\n';
  for (const auto& r : series.rows) {
    os << r.t << ',' << r.mass << ',' << r.energy << ',' << r.kinetic_a << ',' << r.pnorm << ','
       << r.V_quadratic << ',' << r.dV << ',' << r.V_truncated << ',' << r.dV_truncated << ','
       << r.rhs_truncated << ',' << r.interpolation_term << ',' << r.local_mass << ','
       << r.sup_weighted << ',' << r.sup_weighted_low << ',' << r.band_fraction;
    for (double v : r.local_pnorm)
      os << ',' << v;
    os << '\n';
  }
  return os.str();
}

VirialCheck virial_identity_check(const DiagnosticsSeries& series, double t0, double t1) {
  std::vector<const DiagnosticsRow*> w;
  for (const auto& r : series.rows)
    if (r.t >= t0 - 1e-12 && r.t <= t1 + 1e-12)
      w.push_back(&r);
  if (w.size() < 3)
    throw UsageError("virial_identity_check needs at least three rows in the window");
  const double h = w[1]->t - w[0]->t;
  for (std::size_t i = 1; i < w.size(); ++i)
    if (std::abs((w[i]->t - w[i - 1]->t) - h) > 1e-9 * std::abs(h))
      throw UsageError("virial_identity_check needs a uniform sampling cadence");
  const Params& P = series.params;
  const double cp = series.nonlinear ? P.d * (P.p - 1.0) / (2.0 * (P.p + 1.0)) : 0.0;
  VirialCheck out;
  for (const auto* r : w)
    out.scale = std::max(out.scale, 8.0 * (r->kinetic_a + cp * r->pnorm));
  const bool trunc = series.truncated_R > 0.0;
  double tscale = 0.0;
  if (trunc)
    for (const auto* r : w)
      tscale = std::max(tscale, std::abs(r->rhs_truncated));
  out.truncated_max_residual = trunc ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  out.interpolation_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < w.size(); ++i) {
    const double d2 = (w[i + 1]->V_quadratic - 2.0 * w[i]->V_quadratic + w[i - 1]->V_quadratic) / (h * h);
    const double rhs = 8.0 * (w[i]->kinetic_a - cp * w[i]->pnorm);
    out.max_residual = std::max(out.max_residual, std::abs(d2 - rhs) / out.scale);
    if (trunc) {
      const double t2 =
          (w[i + 1]->V_truncated - 2.0 * w[i]->V_truncated + w[i - 1]->V_truncated) / (h * h);
      out.truncated_max_residual =
          std::max(out.truncated_max_residual, std::abs(t2 - w[i]->rhs_truncated) / std::max(tscale, out.scale));
    }
    ++out.points;
  }
  for (const auto* r : w)
    out.interpolation_min = std::min(out.interpolation_min, r->interpolation_term);
  return out;
}

MorawetzCheck morawetz_check(const DiagnosticsSeries& series, double R, double T) {
  const auto& radii = series.morawetz_radii;
  std::size_t col = radii.size();
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (std::abs(radii[i] - R) <= 1e-12 * std::max(1.0, R))
      col = i;
  if (col == radii.size())
    throw UsageError("morawetz_check: radius was not recorded in the series");
  if (!(T > 0.0) || series.rows.empty())
    throw UsageError("morawetz_check needs T > 0 and a nonempty series");
  const double t0 = series.rows.front().t;
  double acc = 0.0;
  bool reached = false;
  for (std::size_t i = 1; i < series.rows.size(); ++i) {
    const auto& a = series.rows[i - 1];
    const auto& c = series.rows[i];
    if (c.t - t0 > T + 1e-9) {
      // partial interval up to T
      const double frac = (T - (a.t - t0)) / (c.t - a.t);
      const double mid = a.local_pnorm[col] + frac * (c.local_pnorm[col] - a.local_pnorm[col]);
      acc += 0.5 * (a.local_pnorm[col] + mid) * (T - (a.t - t0));
      reached = true;
      break;
    }
    acc += 0.5 * (a.local_pnorm[col] + c.local_pnorm[col]) * (c.t - a.t);
    if (std::abs(c.t - t0 - T) <= 1e-9) {
      reached = true;
      break;
    }
  }
  if (!reached)
    throw UsageError("morawetz_check: series does not reach T");
  MorawetzCheck out;
  out.lhs = acc / T;
  out.bound_terms[0] = R / T;
  out.bound_terms[1] = 1.0 / (R * R);
  out.bound_terms[2] = std::pow(R, -(series.params.p - 1.0));
  out.ratio = out.lhs / (out.bound_terms[0] + out.bound_terms[1] + out.bound_terms[2]);
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
  case Verdict::scatter_like:
    return "scatter-like";
  case Verdict::soliton_like:
    return "soliton-like";
  case Verdict::blowup_like:
    return "blowup-like";
  }
  return "unknown";
}

double mh_ratio(const DiagnosticsRow& row, const GroundStateReport& report) {
  const double sc = report.params.s_c;
  const double mh = std::exp(0.5 * (1 - sc) * std::log(row.mass) + 0.5 * sc * std::log(row.kinetic_a));
  return mh / report.threshold_MH;
}

RunClassification classify_run(const DiagnosticsSeries& series, const GroundStateReport& report,
                               double local_fraction) {
  if (series.rows.empty())
    throw UsageError("classify_run needs a nonempty series");
  if (series.rows.size() < 100 && series.status != RunStatus::breach)
    throw UsageError("classify_run needs at least 100 rows or a breach");
  RunClassification out;
  out.breach = series.status == RunStatus::breach;
  const DiagnosticsRow& first = series.rows.front();
  const double sc = report.params.s_c;
  for (const auto& r : series.rows)
    out.max_MH_ratio = std::max(out.max_MH_ratio, mh_ratio(r, report));
  // Prop.-3.4-type bound from the initial energy
  out.MH_bound = 0.0;
  if (first.energy > 0.0 && sc > 0.0) {
    const double me = std::exp((1 - sc) * std::log(first.mass) + sc * std::log(first.energy));
    const double delta = 1.0 - me / report.threshold_ME;
    if (delta > 0.0 && mh_ratio(first, report) < 1.0)
      out.MH_bound = 1.0 - coercivity_delta_prime(report.params, delta);
  }
  const double tend = series.rows.back().t, tstart = first.t;
  const double tq = tstart + 0.75 * (tend - tstart);
  double late = 0.0;
  for (const auto& r : series.rows)
    if (r.t >= tq)
      late = std::max(late, r.local_mass);
  out.local_mass_ratio = first.local_mass > 0.0 ? late / first.local_mass : 0.0;
  if (out.breach)
    out.verdict = Verdict::blowup_like;
  else if (out.local_mass_ratio < local_fraction && out.MH_bound > 0.0 &&
           out.max_MH_ratio <= out.MH_bound * (1.0 + 1e-6))
    out.verdict = Verdict::scatter_like;
  else
    out.verdict = Verdict::soliton_like;
  return out;
}

} // namespace radnls
