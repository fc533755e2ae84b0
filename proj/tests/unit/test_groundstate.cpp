#include "radnls/errors.hpp"
#include "radnls/groundstate.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace radnls;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

struct Solved {
  BasisPtr basis;
  GroundStateReport rep;
};

const Solved& cubic3d() {
  static const Solved s = [] {
    const Params p = Params::make(3, 0.0, 3.0);
    auto b = build_basis(p, 30.0, 512);
    return Solved{b, solve_ground_state(p, b)};
  }();
  return s;
}

RadialField scaled(const RadialField& f, double s) {
  return RadialField{f.basis, f.domain, s * f.v};
}

} // namespace

TEST(GroundState, CubicThreeDimensionalIdentities) {
  const auto& rep = cubic3d().rep;
  EXPECT_LE(rep.residuals.elliptic, 1e-8);
  EXPECT_LE(rep.residuals.pohozaev_mass, 1e-6);
  EXPECT_LE(rep.residuals.pohozaev_kinetic, 1e-6);
  EXPECT_LE(rep.residuals.energy_identity, 1e-6);
  EXPECT_LE(rep.residuals.C_a_crosscheck, 1e-6);
  EXPECT_NEAR(rep.mass / rep.pnorm, 0.25, 0.25e-6);
  EXPECT_NEAR(rep.kinetic_a / rep.pnorm, 0.75, 0.75e-6);
  // nonnegative and decreasing
  const VectorXd q = rep.Q.v.real();
  EXPECT_GE(q.minCoeff(), -1e-12 * q.maxCoeff());
  for (int k = 1; k < q.size(); ++k)
    if (q(k - 1) > 1e-10 * q(0)) {
      EXPECT_LT(q(k), q(k - 1)) << k;
    }
}

TEST(GroundState, EnergyThreeWays) {
  const auto& rep = cubic3d().rep;
  const double d = 3, p = 3;
  const double e_def = 0.5 * rep.kinetic_a - rep.pnorm / (p + 1);
  const double e_kin = (d * p - (d + 4)) / (2 * d * (p - 1)) * rep.kinetic_a;
  const double e_pot = (d * p - (d + 4)) / (4 * (p + 1)) * rep.pnorm;
  EXPECT_NEAR(e_def / e_kin, 1.0, 1e-6);
  EXPECT_NEAR(e_def / e_pot, 1.0, 1e-6);
  EXPECT_NEAR(e_kin / e_pot, 1.0, 1e-6);
  EXPECT_NEAR(rep.energy, e_def, 1e-14 * e_def);
}

TEST(GroundState, MatchesShootingOracle) {
  const auto& s = cubic3d();
  const ShootingProfile prof = shoot_oracle_a0(3, 3.0);
  double err = 0.0, peak = 0.0;
  for (int k = 0; k < s.basis->N; ++k) {
    const double r = s.basis->r(k);
    if (r > prof.r_valid)
      break;
    err = std::max(err, std::abs(s.rep.Q.v(k).real() - prof(r)));
  }
  peak = std::max(prof.Q0, s.rep.Q.v.real().maxCoeff());
  EXPECT_LE(err / peak, 1e-4);
  EXPECT_NEAR(prof.Q0, std::abs(origin_coefficient(s.rep.Q)), 1e-6 * prof.Q0);
}

TEST(Shooting, PohozaevRatiosAndMonotoneDecay) {
  struct Case {
    int d;
    double p;
  };
  for (Case c : {Case{3, 3.0}, Case{4, 2.0}}) {
    const ShootingProfile prof = shoot_oracle_a0(c.d, c.p);
    double M = 0, K = 0, P = 0;
    const std::size_t n = prof.r.size();
    std::size_t last = 0;
    while (last + 1 < n && prof.r[last + 1] <= prof.r_valid)
      ++last;
    last -= last % 2; // even panel count for Simpson
    for (std::size_t i = 0; i <= last; ++i) {
      const double w = (i == 0 || i == last) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const double rr = std::pow(prof.r[i], c.d - 1);
      M += w * prof.Q[i] * prof.Q[i] * rr;
      K += w * prof.dQ[i] * prof.dQ[i] * rr;
      P += w * std::pow(std::abs(prof.Q[i]), c.p + 1) * rr;
    }
    const double cm = (c.d + 2 - (c.d - 2) * c.p) / (2 * (c.p + 1));
    const double ck = c.d * (c.p - 1) / (2 * (c.p + 1));
    EXPECT_NEAR(M / P / cm, 1.0, 1e-5) << c.d;
    EXPECT_NEAR(K / P / ck, 1.0, 1e-5) << c.d;
    for (std::size_t i = 1; i <= last && prof.Q[i] > 1e-8 * prof.Q0; ++i)
      EXPECT_LT(prof.dQ[i], 0.0);
  }
  EXPECT_THROW(shoot_oracle_a0(3, 5.0), DomainError);
}

TEST(GroundState, SingularOriginSlope) {
  const Params p = Params::make(3, -3.0 / 16.0, 3.0);
  auto b = build_basis(p, 24.0, 768);
  const GroundStateReport rep = solve_ground_state(p, b);
  EXPECT_LE(rep.residuals.elliptic, 1e-8);
  // least-squares slope of log Q against log r over r in [1e-4, 1e-1]
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (double r = 1e-4; r <= 1e-1 * 1.0001; r *= std::pow(10.0, 0.25)) {
    const double x = std::log(r), y = std::log(interpolate(rep.Q, r).real());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, -0.25, 0.02);
}

TEST(GroundState, OtherParameterSets) {
  struct Case {
    int d;
    double a, p, R;
    int N;
  };
  for (Case c : {Case{3, 1.0, 3.0, 30.0, 512}, Case{4, 0.0, 2.0, 30.0, 512}, Case{3, 0.0, 4.0, 30.0, 768}}) {
    const Params p = Params::make(c.d, c.a, c.p);
    auto b = build_basis(p, c.R, c.N);
    const GroundStateReport rep = solve_ground_state(p, b);
    EXPECT_LE(rep.residuals.elliptic, 1e-8);
    EXPECT_LE(rep.residuals.pohozaev_mass, 1e-5) << c.d << " " << c.a << " " << c.p;
    EXPECT_LE(rep.residuals.pohozaev_kinetic, 1e-5);
    EXPECT_LE(rep.residuals.energy_identity, 1e-5);
    EXPECT_LE(rep.residuals.C_a_crosscheck, 1e-5);
    const SharpConstant sc = sharp_constant(rep);
    EXPECT_NEAR(sc.C_a_direct / sc.C_a_identity, 1.0, 1e-5);
  }
}

TEST(GroundState, CollocationAgreesForRegularProfiles) {
  const auto& s = cubic3d();
  GroundStateOptions o;
  o.mode = GroundStateMode::collocation;
  const GroundStateReport col = solve_ground_state(s.rep.params, s.basis, o);
  EXPECT_LE((col.Q.v - s.rep.Q.v).cwiseAbs().maxCoeff(), 1e-9 * s.rep.Q.v.cwiseAbs().maxCoeff());
  EXPECT_NEAR(col.pnorm / s.rep.pnorm, 1.0, 1e-9);
  EXPECT_LE(col.residuals.elliptic, 1e-9);
}

TEST(GroundState, FailureModes) {
  const auto& s = cubic3d();
  GroundStateOptions o;
  o.max_iter = 2;
  EXPECT_THROW(solve_ground_state(s.rep.params, s.basis, o), ConvergenceError);
  GroundStateOptions z;
  z.init = RadialField{s.basis, Domain::physical, VectorXcd::Zero(s.basis->N)};
  EXPECT_THROW(solve_ground_state(s.rep.params, s.basis, z), ConvergenceError);
  EXPECT_THROW(solve_ground_state(Params::make(3, 0.0, 5.5), s.basis), DomainError);
  EXPECT_THROW(solve_ground_state(Params::make(3, 1.0, 3.0), s.basis), UsageError);
  try {
    solve_ground_state(s.rep.params, s.basis, o);
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.last_change, 0.0);
  }
}

TEST(SharpConstant, CubicIdentityAndScaleInvariance) {
  const auto& rep = cubic3d().rep;
  const SharpConstant sc = sharp_constant(rep);
  EXPECT_NEAR(sc.C_a_direct * std::sqrt(rep.mass) * std::sqrt(rep.kinetic_a), 4.0 / 3.0, 1e-6);
  EXPECT_NEAR(sc.C_a_direct / sc.C_a_identity, 1.0, 1e-6);

  auto b = cubic3d().basis;
  auto f = [](double r) { return std::exp(-r * r / 2) * (1 + 0.3 * r * r); };
  const double J = gn_functional(RadialField::from_function(b, f), 3.0);
  for (double lam : {0.5, 2.0})
    for (double mu : {0.1, 3.0}) {
      auto g = RadialField::from_function(b, [&](double r) { return mu * f(lam * r); });
      EXPECT_NEAR(gn_functional(g, 3.0) / J, 1.0, 1e-8);
    }
  EXPECT_LT(J, sc.C_a_direct);
}

TEST(SharpConstant, LocalMaximizer) {
  const auto& s = cubic3d();
  const double J0 = gn_functional(s.rep.Q, 3.0, s.rep.quad.get());
  std::mt19937 gen(12345);
  std::uniform_real_distribution<double> amp(-1.0, 1.0), ctr(0.0, 4.0), wid(0.5, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a1 = amp(gen), c1 = ctr(gen), w1 = wid(gen);
    const double a2 = amp(gen), c2 = ctr(gen), w2 = wid(gen);
    auto h = [&](double r) {
      return a1 * std::exp(-std::pow((r - c1) / w1, 2)) + a2 * std::exp(-std::pow((r - c2) / w2, 2)) *
                                                              std::exp(-std::pow(r / w2, 2));
    };
    VectorXcd v = s.rep.Q.v;
    for (int k = 0; k < s.basis->N; ++k)
      v(k) += 1e-3 * h(s.basis->r(k));
    const double J = gn_functional(RadialField{s.basis, Domain::physical, v}, 3.0, s.rep.quad.get());
    EXPECT_LE(J, J0 * (1 + 1e-6)) << trial;
  }
}

TEST(Classify, ThresholdsAtScaledGroundStates) {
  const auto& rep = cubic3d().rep;
  const DataClassification at = classify_data(rep.Q, rep);
  EXPECT_NEAR(at.ME_ratio, 1.0, 1e-6);
  EXPECT_NEAR(at.MH_ratio, 1.0, 1e-6);

  const RadialField u9 = scaled(rep.Q, 0.9);
  const DataClassification below = classify_data(u9, rep);
  EXPECT_TRUE(below.below_threshold);
  EXPECT_LT(below.ME_ratio, 1.0);
  // the mass-kinetic product is homogeneous of degree one
  EXPECT_NEAR(below.MH_ratio, 0.9, 1e-9);
  EXPECT_TRUE(below.coercive);
  EXPECT_GT(below.delta_prime, 0.0);
  // (dp-(d+4))/(2d(p-1)) K <= E <= K/2
  const double K = std::pow(norm(u9, NormKind::Hdot1a), 2);
  EXPECT_LE(K / 6.0, below.energy);
  EXPECT_LE(below.energy, 0.5 * K);

  const DataClassification above = classify_data(scaled(rep.Q, 1.2), rep);
  EXPECT_GT(above.MH_ratio, 1.0);
  EXPECT_FALSE(above.below_threshold);
  EXPECT_FALSE(above.coercive);

  const DataClassification big = classify_data(scaled(rep.Q, 2.0), rep);
  EXPECT_LT(big.energy, 0.0);
  EXPECT_TRUE(std::isnan(big.ME));
  EXPECT_FALSE(big.below_threshold);
}

TEST(Classify, DeltaPrimeRootOfCoercivityInequality) {
  const Params p = Params::make(3, 0.0, 3.0);
  EXPECT_EQ(coercivity_delta_prime(p, 0.0), 0.0);
  double prev = 0.0;
  for (double delta : {0.01, 0.1, 0.3, 0.6}) {
    const double dp = coercivity_delta_prime(p, delta);
    EXPECT_GT(dp, prev);
    prev = dp;
    // d=3, p=3: (1-delta)^2 = 3 y^4 - 2 y^6 at y = 1 - delta'
    const double y = 1.0 - dp;
    EXPECT_NEAR(3 * std::pow(y, 4) - 2 * std::pow(y, 6), std::pow(1 - delta, 2), 1e-12);
  }
}

TEST(GroundStateReport, JsonFieldNames) {
  const auto& rep = cubic3d().rep;
  const auto j = nlohmann::json::parse(to_json(rep));
  for (const char* key : {"Q", "mass", "kinetic_a", "pnorm", "energy", "C_a", "threshold_ME", "threshold_MH"})
    EXPECT_TRUE(j.contains(key)) << key;
  for (const char* key : {"elliptic", "pohozaev_mass", "pohozaev_kinetic", "energy_identity", "C_a_crosscheck"})
    EXPECT_TRUE(j["residuals"].contains(key)) << key;
  EXPECT_EQ(j["mass"].get<double>(), rep.mass); // round-trip precision
  EXPECT_EQ(j["Q"]["values"].size(), static_cast<std::size_t>(cubic3d().basis->N));
}
