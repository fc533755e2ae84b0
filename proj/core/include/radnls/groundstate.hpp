#pragma once

#include "radnls/hankel.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace radnls {

enum class GroundStateMode {
  galerkin,   // nonlinear term projected with the refined quadrature (default)
  collocation // pointwise Q^p on the transform nodes
};

struct GroundStateOptions {
  double tol = 1e-13; // successive relative change
  double residual_tol = 1e-8;
  int max_iter = 3000;
  GroundStateMode mode = GroundStateMode::galerkin;
  std::optional<RadialField> init;
  int quad_panels = 0; // 0: N/4
};

struct GroundStateResiduals {
  double elliptic = 0.0;
  double pohozaev_mass = 0.0;
  double pohozaev_kinetic = 0.0;
  double energy_identity = 0.0;
  double C_a_crosscheck = 0.0;
};

struct GroundStateReport {
  Params params;
  RadialField Q;
  double mass = 0.0;      // ||Q||_2^2
  double kinetic_a = 0.0; // ||Q||_{Hdot^1_a}^2
  double pnorm = 0.0;     // ||Q||_{p+1}^{p+1}
  double energy = 0.0;
  double C_a = 0.0;
  double threshold_ME = 0.0;
  double threshold_MH = 0.0;
  GroundStateResiduals residuals;
  int iterations = 0;
  double last_change = 0.0;
  GroundStateMode mode = GroundStateMode::galerkin;
  /// Quadrature used for pnorm (Galerkin mode); reused by classify_data.
  std::shared_ptr<const RefinedQuadrature> quad;
};

/// Petviashvili iteration for -L_a Q - Q + Q^p = 0:
///   Q <- S^{p/(p-1)} (L_a + 1)^{-1} Q^p,  S = <(L_a+1)Q, Q> / <Q^p, Q>.
/// Requires a > -h^2 and 1 < p < (d+2)/(d-2). Throws ConvergenceError when
/// max_iter is exhausted or the iterate collapses to zero.
GroundStateReport solve_ground_state(const Params& params, BasisPtr basis,
                                     const GroundStateOptions& opts = {});

/// Field names as in GroundStateReport; Q as {"r": [...], "values": [...]}.
std::string to_json(const GroundStateReport& report);

struct ShootingOptions {
  double r_max = 20.0;
  double step = 1e-3;
  int bisection_steps = 80;
};

struct ShootingProfile {
  int d = 3;
  double p = 3.0;
  double Q0 = 0.0;
  double r_valid = 0.0; // profile is trusted on [0, r_valid]
  std::vector<double> r, Q, dQ;

  /// Cubic Hermite interpolation; 0 beyond r_valid.
  double operator()(double r) const;
};

/// Ground state for a = 0 by shooting on Q(0) for
///   Q'' + (d-1)/r Q' - Q + |Q|^{p-1} Q = 0,  Q'(0) = 0,
/// bisecting between sign-changing (too large) and turning-up (too small)
/// trajectories. RK4 on a uniform grid.
ShootingProfile shoot_oracle_a0(int d, double p, const ShootingOptions& opts = {});

struct SharpConstant {
  double C_a_direct = 0.0;
  double C_a_identity = 0.0;
};

SharpConstant sharp_constant(const GroundStateReport& report);

/// int |f|^q dx; with the refined quadrature of the same basis when given.
double lebesgue_power(const RadialField& f, double q, const RefinedQuadrature* quad = nullptr);

/// Weinstein functional J_a(f) = ||f||_{p+1}^{p+1} / (||f||_2^{(d+2-(d-2)p)/2} ||f||_{Hdot^1_a}^{d(p-1)/2}).
double gn_functional(const RadialField& f, double p, const RefinedQuadrature* quad = nullptr);

struct DataClassification {
  bool below_threshold = false;
  double ME = 0.0; // NaN when E_a(u0) <= 0 and s_c > 0
  double MH = 0.0;
  double ME_ratio = 0.0;
  double MH_ratio = 0.0;
  double energy = 0.0;
  bool coercive = false;
  double coercivity_margin = 0.0; // (K - d(p-1)/(2(p+1)) P) / K
  double delta = 0.0;             // 1 - ME_ratio
  double delta_prime = 0.0;       // from the Gagliardo-Nirenberg bound on the MH ratio
  double c = 0.0;                 // coercivity constant implied by delta
};

/// Threshold comparisons for u0 against the ground state, and the coercivity
/// check K - d(p-1)/(2(p+1)) P >= c K at t = 0.
DataClassification classify_data(const RadialField& u0, const GroundStateReport& report);

/// delta'(delta): 1 - y* where y* in (0,1) solves
///   (1-delta)^{1/s_c} = d(p-1)/(dp-d-4) y^{2/s_c} - 4/(dp-d-4) y^{d(p-1)/(2 s_c)}.
double coercivity_delta_prime(const Params& params, double delta);

} // namespace radnls
