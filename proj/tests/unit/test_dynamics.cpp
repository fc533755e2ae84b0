#include "radnls/dynamics.hpp"
#include "radnls/errors.hpp"
#include "radnls/propagator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace radnls;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

double rel_l2(const VectorXcd& a, const VectorXcd& b, const BasisPtr& basis) {
  return norm(RadialField{basis, Domain::physical, a - b}, NormKind::L2) /
         norm(RadialField{basis, Domain::physical, b}, NormKind::L2);
}

RadialField gaussian(const BasisPtr& b, double amp, double width = 1.0) {
  const double s = b->params.sigma;
  return RadialField::from_function(
      b, [=](double r) { return amp * std::pow(r, -s) * std::exp(-r * r / (2 * width * width)); });
}

struct Soliton {
  BasisPtr basis;
  GroundStateReport rep;
};

// Collocated ground state, the discrete stationary state of the split-step scheme.
const Soliton& soliton() {
  static const Soliton s = [] {
    const Params p = Params::make(3, 0.0, 3.0);
    auto b = build_basis(p, 32.0, 256);
    GroundStateOptions o;
    o.mode = GroundStateMode::collocation;
    return Soliton{b, solve_ground_state(p, b, o)};
  }();
  return s;
}

} // namespace

TEST(Strang, NonlinearSubstepKeepsModulus) {
  auto b = build_basis(Params::make(3, 0.0, 3.0), 20.0, 64);
  VectorXcd u = gaussian(b, 2.0).v;
  u.array() *= std::complex<double>(0.6, 0.8);
  const VectorXd before = u.cwiseAbs();
  nonlinear_phase(u, 0.37, 3.0);
  EXPECT_LE((u.cwiseAbs() - before).cwiseAbs().maxCoeff(), 1e-15 * before.maxCoeff());
  // exact phase e^{i tau |u|^2}
  EXPECT_NEAR(std::arg(u(0) / std::complex<double>(0.6, 0.8)), 0.37 * before(0) * before(0), 1e-12);
}

TEST(Strang, LinearStepIsTheExactPropagator) {
  auto b = build_basis(Params::make(3, 1.0, 3.0), 20.0, 128);
  const SimState s0 = SimState::from_field(gaussian(b, 1.0));
  const SimState s1 = strang_step(s0, 0.005, StepOptions{false});
  const VectorXcd ref = schrodinger_propagate(s0.u, 0.005).v;
  EXPECT_LE(rel_l2(s1.u.v, ref, b), 1e-13);
  EXPECT_DOUBLE_EQ(s1.t, 0.005);
}

TEST(Strang, GuardRejectsUnresolvedSteps) {
  auto b = build_basis(Params::make(3, 0.0, 3.0), 20.0, 128);
  const SimState s0 = SimState::from_field(gaussian(b, 1.0));
  const double rm = b->rho_max();
  EXPECT_THROW(strang_step(s0, 1.01 * 3.141592653589793 / (rm * rm), {}), StepSizeError);
  EXPECT_NO_THROW(strang_step(s0, 0.99 * 3.141592653589793 / (rm * rm), {}));
  EXPECT_THROW(strang_step(s0, -1.01 * 3.141592653589793 / (rm * rm), {}), StepSizeError);
  SimState s = s0;
  EvolveOptions o;
  o.dt = 0.1;
  EXPECT_THROW(evolve(s, 1.0, o), StepSizeError);
}

TEST(Strang, SecondOrderSelfConvergence) {
  auto b = build_basis(Params::make(3, 0.0, 3.0), 36.0, 128);
  const RadialField u0 = gaussian(b, 1.5);
  auto run = [&](double dt) {
    SimState s = SimState::from_field(u0);
    EvolveOptions o;
    o.dt = dt;
    o.sample_every = 1000000;
    evolve(s, 1.0, o);
    return s.u.v;
  };
  const VectorXcd ref1 = run(0.02 / 4), ref2 = run(0.01 / 4);
  const double e1 = rel_l2(run(0.02), ref1, b);
  const double e2 = rel_l2(run(0.01), ref2, b);
  EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}

TEST(Strang, TimeReversible) {
  auto b = build_basis(Params::make(3, -3.0 / 16.0, 3.0), 32.0, 128);
  const RadialField u0 = gaussian(b, 1.5);
  SimState s = SimState::from_field(u0);
  EvolveOptions o;
  o.dt = 2e-3;
  o.sample_every = 100;
  evolve(s, 2.0, o);
  o.dt = -2e-3;
  evolve(s, -2.0, o);
  EXPECT_NEAR(s.t, 0.0, 1e-12);
  EXPECT_LE(rel_l2(s.u.v, u0.v, b), 1e-6);
}

TEST(Evolve, MassConservedAndEnergyDriftQuadratic) {
  auto b = build_basis(Params::make(3, 1.0, 3.0), 32.0, 128);
  double drift[2];
  int i = 0;
  for (double dt : {4e-3, 2e-3}) {
    SimState s = SimState::from_field(gaussian(b, 2.0));
    EvolveOptions o;
    o.dt = dt;
    o.sample_every = static_cast<int>(std::lround(0.02 / dt));
    const DiagnosticsSeries ser = evolve(s, 2.0, o);
    const auto& r0 = ser.rows.front();
    double dm = 0, de = 0;
    for (const auto& r : ser.rows) {
      dm = std::max(dm, std::abs(r.mass / r0.mass - 1));
      de = std::max(de, std::abs(r.energy / r0.energy - 1));
    }
    EXPECT_LE(dm, 1e-12);
    drift[i++] = de;
  }
  EXPECT_NEAR(drift[0] / drift[1], 4.0, 0.8);
}

TEST(Evolve, SolitonKeepsItsModulusOverShortTimes) {
  const auto& sol = soliton();
  SimState s = SimState::from_field(sol.rep.Q);
  EvolveOptions o;
  o.dt = 1e-3;
  o.sample_every = 10;
  double worst = 0.0, worst_dv = 0.0;
  o.observers.push_back([&](const SimState& st, const DiagnosticsRow& row) {
    const VectorXcd m = st.u.v.cwiseAbs().cast<std::complex<double>>();
    worst = std::max(worst, rel_l2(m, sol.rep.Q.v, sol.basis));
    worst_dv = std::max(worst_dv, std::abs(row.dV));
  });
  const DiagnosticsSeries head = evolve(s, 0.05, o);
  EXPECT_EQ(head.rows.front().dV, 0.0);
  evolve(s, 0.45, o);
  EXPECT_LE(worst, 1e-3);
  // u = e^{it} Q, up to an O(dt^2) frequency shift
  const std::complex<double> ph = s.u.v(0) / sol.rep.Q.v(0);
  EXPECT_NEAR(std::remainder(std::arg(ph) - 0.5, 2 * 3.141592653589793), 0.0, 2e-3);

  // the flux vanishes for the exact soliton; the scheme's flux is O(dt^2)
  double dv[2];
  for (int i = 0; i < 2; ++i) {
    SimState q = SimState::from_field(sol.rep.Q);
    EvolveOptions oq;
    oq.dt = i == 0 ? 1e-3 : 5e-4;
    oq.sample_every = 1000;
    dv[i] = evolve(q, 0.05, oq).rows.back().dV;
  }
  EXPECT_NEAR(dv[0] / dv[1], 4.0, 0.4);
}

TEST(Evolve, SolitonInstabilityRateMatchesLinearization) {
  // Perturbations of e^{it}Q grow like e^{lambda t}, lambda^2 the top eigenvalue
  // of -L_- L_+ with L_+ = L_a + 1 - p Q^{p-1}, L_- = L_a + 1 - Q^{p-1}.
  const auto& sol = soliton();
  const HankelBasis& b = *sol.basis;
  const int n = b.N;
  const Eigen::MatrixXd L = b.alpha.cwiseInverse().asDiagonal() * b.T *
                            b.rho.array().square().matrix().asDiagonal() * b.T * b.alpha.asDiagonal();
  const VectorXd q2 = sol.rep.Q.v.real().array().square();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Lp = L + I - Eigen::MatrixXd(3.0 * q2.asDiagonal());
  const Eigen::MatrixXd Lm = L + I - Eigen::MatrixXd(q2.asDiagonal());
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(-Lm * Lp, false).eigenvalues();
  double top = 0.0;
  for (int i = 0; i < n; ++i)
    top = std::max(top, ev(i).real());
  const double lambda = std::sqrt(top);
  EXPECT_GT(lambda, 1.0);

  SimState s = SimState::from_field(sol.rep.Q);
  EvolveOptions o;
  o.dt = 1e-3;
  o.sample_every = 250;
  std::vector<double> dev;
  o.observers.push_back([&](const SimState& st, const DiagnosticsRow&) {
    dev.push_back(rel_l2(st.u.v.cwiseAbs().cast<std::complex<double>>(), sol.rep.Q.v, sol.basis));
  });
  evolve(s, 1.0, o);
  ASSERT_EQ(dev.size(), 5u);
  const double rate = std::log(dev[4] / dev[2]) / 0.5;
  EXPECT_NEAR(rate / lambda, 1.0, 0.05) << rate << " " << lambda;
}

TEST(Evolve, LinearRunHasQuadraticVariance) {
  auto b = build_basis(Params::make(3, 1.0, 3.0), 40.0, 256);
  SimState s = SimState::from_field(gaussian(b, 1.0));
  EvolveOptions o;
  o.dt = 5e-3;
  o.sample_every = 20;
  o.nonlinear = false;
  const DiagnosticsSeries ser = evolve(s, 2.0, o);
  const auto& r0 = ser.rows.front();
  // V(t) = V0 + V'(0) t + 4 K t^2 for the free flow
  for (const auto& r : ser.rows) {
    EXPECT_NEAR(r.mass, r0.mass, 1e-12 * r0.mass);
    EXPECT_NEAR(r.kinetic_a, r0.kinetic_a, 1e-10 * r0.kinetic_a);
    const double v = r0.V_quadratic + r0.dV * r.t + 4.0 * r0.kinetic_a * r.t * r.t;
    EXPECT_NEAR(r.V_quadratic / v, 1.0, 1e-8) << r.t;
  }
  const VirialCheck vc = virial_identity_check(ser, 0.0, 2.0);
  EXPECT_LE(vc.max_residual, 1e-8);
}

TEST(Evolve, StepBudgetAndStatus) {
  auto b = build_basis(Params::make(3, 0.0, 3.0), 20.0, 64);
  SimState s = SimState::from_field(gaussian(b, 1.0));
  EvolveOptions o;
  o.dt = 1e-3;
  o.max_steps = 50;
  const DiagnosticsSeries ser = evolve(s, 1.0, o);
  EXPECT_EQ(ser.status, RunStatus::step_budget);
  EXPECT_EQ(ser.steps, 50);
  EXPECT_NEAR(ser.rows.back().t, 0.05, 1e-12);
  for (std::size_t i = 1; i < ser.rows.size(); ++i)
    EXPECT_GT(ser.rows[i].t, ser.rows[i - 1].t);
  EXPECT_THROW(evolve(s, -1.0, o), UsageError);
}

TEST(Evolve, SupercriticalDataBreaches) {
  // rho_max ~ 50 so that the collapse reaches the top quartile of the band
  const Params p = Params::make(3, 0.0, 3.0);
  auto b = build_basis(p, 32.0, 512);
  GroundStateOptions go;
  go.mode = GroundStateMode::collocation;
  const GroundStateReport rep = solve_ground_state(p, b, go);
  SimState s = SimState::from_field(RadialField{b, Domain::physical, 1.3 * rep.Q.v});
  EvolveOptions o;
  o.dt = 1e-3;
  o.sample_every = 1;
  double kmax = 0.0;
  o.observers.push_back([&](const SimState&, const DiagnosticsRow& r) { kmax = std::max(kmax, r.kinetic_a); });
  const DiagnosticsSeries ser = evolve(s, 10.0, o);
  EXPECT_EQ(ser.status, RunStatus::breach);
  EXPECT_LT(ser.breach_time, 10.0);
  EXPECT_GT(kmax, 10.0 * ser.rows.front().kinetic_a);
  EXPECT_EQ(classify_run(ser, rep).verdict, Verdict::blowup_like);
}

TEST(Evolve, SmallDataIsScatterLike) {
  const Params p = Params::make(3, 0.0, 3.0);
  auto b = build_basis(p, 96.0, 768);
  GroundStateOptions go;
  go.mode = GroundStateMode::collocation;
  const GroundStateReport rep = solve_ground_state(p, b, go);
  SimState s = SimState::from_field(RadialField{b, Domain::physical, 0.5 * rep.Q.v});
  EvolveOptions o;
  o.dt = 2e-3;
  o.sample_every = 25;
  o.R_loc = 10.0;
  std::vector<double> loc;
  o.observers.push_back([&](const SimState&, const DiagnosticsRow& r) { loc.push_back(r.local_mass); });
  const DiagnosticsSeries ser = evolve(s, 20.0, o);
  const RunClassification c = classify_run(ser, rep);
  EXPECT_EQ(c.verdict, Verdict::scatter_like) << c.local_mass_ratio << " " << c.max_MH_ratio << " " << c.MH_bound;
  EXPECT_LE(c.max_MH_ratio, c.MH_bound * (1 + 1e-6));
  // decays monotonically once the transient is over
  for (std::size_t i = loc.size() / 4 + 1; i < loc.size(); ++i)
    EXPECT_LE(loc[i], loc[i - 1] * (1 + 1e-9)) << i;
}

TEST(Observables, GroundStateEnergyAndCutoffs) {
  const auto& sol = soliton();
  const SimState s = SimState::from_field(sol.rep.Q);
  const DiagnosticsRow row = observables(s, 1e3);
  // E(Q) = (dp - (d+4)) / (2 d (p-1)) K at (3,3)
  EXPECT_NEAR(row.energy / (row.kinetic_a / 6.0), 1.0, 1e-6);
  EXPECT_NEAR(row.local_mass / row.mass, 1.0, 1e-13);
  EXPECT_LT(observables(s, 1.0).local_mass, row.mass);
  EXPECT_NEAR(row.mass, sol.rep.mass, 1e-12 * row.mass);

  EXPECT_EQ(smooth_cutoff(0.3), 1.0);
  EXPECT_EQ(smooth_cutoff(1.0), 1.0);
  EXPECT_EQ(smooth_cutoff(2.0), 0.0);
  EXPECT_NEAR(smooth_cutoff(1.5), 0.5, 1e-15);
  for (double x = 1.0; x < 2.0; x += 0.01)
    EXPECT_GE(smooth_cutoff(x), smooth_cutoff(x + 0.01));
}

TEST(Observables, RadialSobolevConstant) {
  // one constant bounds r^s |f| by ||f||_{H^1} across a family, for both ends
  // of the admissible s range
  auto b = build_basis(Params::make(3, 0.0, 3.0), 60.0, 512);
  double worst[2] = {0.0, 0.0};
  for (double w : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0})
    for (double shift : {0.0, 2.0, 5.0}) {
      auto f = RadialField::from_function(b, [=](double r) {
        return std::exp(-std::pow((r - shift) / w, 2));
      });
      const DiagnosticsRow row = observables(SimState::from_field(f), 10.0);
      const double h1 = std::sqrt(row.mass + row.kinetic_a);
      worst[0] = std::max(worst[0], row.sup_weighted / h1);
      worst[1] = std::max(worst[1], row.sup_weighted_low / h1);
    }
  EXPECT_LT(worst[0], 1.0);
  EXPECT_LT(worst[1], 1.0);
}

TEST(Virial, WeightInvariants) {
  auto b = build_basis(Params::make(3, 0.0, 3.0), 40.0, 256);
  EXPECT_THROW(build_weight(b, WeightKind::truncated, 1.0), DomainError);
  const VirialWeight w = build_weight(b, WeightKind::truncated, 10.0);
  for (int k = 0; k < b->N; ++k) {
    const double r = b->r(k);
    if (r <= 5.0) {
      EXPECT_EQ(w.w(k), r * r);
    }
    if (r >= 10.0) {
      EXPECT_EQ(w.dw(k), 10.0);
    }
    if (k > 0) {
      EXPECT_GE(w.dw(k), w.dw(k - 1));
    }
    EXPECT_LE(w.dw(k), 2.0 * 10.0);           // |w'| <= C R
    EXPECT_LE(w.d2w(k), 2.0 * 10.0 / r + 2.0); // |w''| <= C R / r
    EXPECT_GE(w.w(k), 0.0);
  }
  EXPECT_EQ(w.value(0.0), 0.0);
  const VirialWeight q = build_weight(b, WeightKind::quadratic);
  EXPECT_EQ(q.w(10), b->r(10) * b->r(10));
}

TEST(Virial, RealDataHasNoFlux) {
  auto b = build_basis(Params::make(3, 1.0, 3.0), 40.0, 256);
  const SimState s = SimState::from_field(gaussian(b, 1.0));
  for (auto w : {build_weight(b, WeightKind::quadratic), build_weight(b, WeightKind::truncated, 4.0)}) {
    const VirialValues v = virial(s, w);
    EXPECT_EQ(v.dV, 0.0);
    EXPECT_GT(v.V, 0.0);
  }
}

TEST(Virial, FluxMatchesFiniteDifference) {
  auto b = build_basis(Params::make(3, 1.0, 3.0), 40.0, 256);
  SimState s = SimState::from_field(gaussian(b, 2.0));
  EvolveOptions o;
  o.dt = 1e-3;
  o.sample_every = 5;
  o.truncated_R = 3.0;
  const DiagnosticsSeries ser = evolve(s, 0.5, o);
  const double h = 5e-3;
  for (std::size_t i = 1; i + 1 < ser.rows.size(); i += 10) {
    const double fd = (ser.rows[i + 1].V_quadratic - ser.rows[i - 1].V_quadratic) / (2 * h);
    EXPECT_NEAR(fd, ser.rows[i].dV, 1e-4 * std::abs(ser.rows[i].dV) + 1e-8) << i;
    const double ft = (ser.rows[i + 1].V_truncated - ser.rows[i - 1].V_truncated) / (2 * h);
    EXPECT_NEAR(ft, ser.rows[i].dV_truncated, 1e-4 * std::abs(ser.rows[i].dV_truncated) + 1e-8) << i;
  }
}

TEST(Virial, IdentityOnGaussianAndSoliton) {
  auto b = build_basis(Params::make(3, 1.0, 3.0), 40.0, 256);
  SimState s = SimState::from_field(gaussian(b, 2.0));
  EvolveOptions o;
  o.dt = 1e-3;
  o.sample_every = 10;
  o.truncated_R = 3.0;
  const DiagnosticsSeries ser = evolve(s, 1.0, o);
  const VirialCheck vc = virial_identity_check(ser, 0.0, 1.0);
  EXPECT_LE(vc.max_residual, 1e-3);
  EXPECT_LE(vc.truncated_max_residual, 1e-3);
  EXPECT_GE(vc.interpolation_min, -1e-8);
  EXPECT_GT(vc.points, 90);

  const auto& sol = soliton();
  SimState q = SimState::from_field(sol.rep.Q);
  o.truncated_R = 0.0;
  const DiagnosticsSeries qs = evolve(q, 1.0, o);
  const VirialCheck qc = virial_identity_check(qs, 0.0, 1.0);
  EXPECT_LE(qc.max_residual, 1e-3);
  EXPECT_TRUE(std::isnan(qc.truncated_max_residual));
}

TEST(Virial, CheckRejectsBadSeries) {
  DiagnosticsSeries ser;
  ser.params = Params::make(3, 0.0, 3.0);
  for (double t : {0.0, 0.1, 0.25, 0.3}) {
    DiagnosticsRow r;
    r.t = t;
    ser.rows.push_back(r);
  }
  EXPECT_THROW(virial_identity_check(ser, 0.0, 1.0), UsageError);
  EXPECT_THROW(virial_identity_check(ser, 0.0, 0.05), UsageError);
}

TEST(Morawetz, TimeAverageAndBoundTerms) {
  DiagnosticsSeries ser;
  ser.params = Params::make(3, 0.0, 3.0);
  ser.morawetz_radii = {5.0};
  for (int i = 0; i <= 100; ++i) {
    DiagnosticsRow r;
    r.t = 0.1 * i;
    r.local_pnorm = {2.0 * r.t}; // average over [0,T] is T
    ser.rows.push_back(r);
  }
  const MorawetzCheck m = morawetz_check(ser, 5.0, 10.0);
  EXPECT_NEAR(m.lhs, 10.0, 1e-12);
  const MorawetzCheck h = morawetz_check(ser, 5.0, 4.95);
  EXPECT_NEAR(h.lhs, 4.95, 1e-12);
  EXPECT_NEAR(m.bound_terms[0], 0.5, 1e-15);
  EXPECT_NEAR(m.bound_terms[1], 0.04, 1e-15);
  EXPECT_NEAR(m.bound_terms[2], 0.04, 1e-15);
  EXPECT_NEAR(m.ratio, 10.0 / 0.58, 1e-12);
  EXPECT_THROW(morawetz_check(ser, 6.0, 10.0), UsageError);
  EXPECT_THROW(morawetz_check(ser, 5.0, 11.0), UsageError);
}

TEST(Diagnostics, CsvHeaderAndPrecision) {
  auto b = build_basis(Params::make(3, 0.0, 3.0), 20.0, 64);
  SimState s = SimState::from_field(gaussian(b, 1.0));
  EvolveOptions o;
  o.dt = 1e-3;
  o.sample_every = 5;
  o.morawetz_radii = {2.5};
  const DiagnosticsSeries ser = evolve(s, 0.01, o);
  const std::string csv = to_csv(ser);
  std::istringstream is(csv);
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  EXPECT_EQ(header.rfind("t,mass,energy,kinetic_a,pnorm,V_quadratic,dV,", 0), 0u);
  EXPECT_NE(header.find("local_mass"), std::string::npos);
  EXPECT_NE(header.find("local_pnorm_2.5"), std::string::npos);
  const double mass = std::stod(first.substr(first.find(',') + 1));
  EXPECT_EQ(mass, ser.rows.front().mass);
  int lines = 0;
  for (char c : csv)
    lines += c == '\n';
  EXPECT_EQ(lines, 1 + static_cast<int>(ser.rows.size()));
}
