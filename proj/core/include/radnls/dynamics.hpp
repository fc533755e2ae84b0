#pragma once

#include "radnls/groundstate.hpp"
#include "radnls/hankel.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace radnls {

/// u(t) on a fixed basis. Evolves i u_t = L_a u - |u|^{p-1} u.
struct SimState {
  Params params;
  BasisPtr basis;
  RadialField u; // physical samples
  double t = 0.0;

  static SimState from_field(const RadialField& u0, double t0 = 0.0);
};

struct StepOptions {
  bool nonlinear = true;
  double guard = 3.141592653589793; // max |dt| rho_max^2
};

/// Exact flow of i u_t = -|u|^{p-1} u over time tau: u <- exp(i tau |u|^{p-1}) u.
void nonlinear_phase(Eigen::VectorXcd& u, double tau, double p);

/// Half nonlinear phase, exact linear multiplier, half nonlinear phase.
/// Throws StepSizeError when |dt| rho_max^2 exceeds the guard.
SimState strang_step(const SimState& state, double dt, const StepOptions& opts = {});

/// Smooth cutoff: 1 on [0,1], 0 on [2,inf), C^inf in between.
double smooth_cutoff(double s);

enum class WeightKind { quadratic, truncated };

/// Virial weight. The truncated kind has slope w'(r) = min(2r, R): w = r^2 on
/// [0, R/2] and w' = R beyond, so w'' jumps at R/2. No C^2 profile can satisfy
/// both "w = r^2 up to R/2" and "w' = R from R on" with w' nondecreasing, since
/// the slope already equals R at R/2.
struct VirialWeight {
  WeightKind kind = WeightKind::quadratic;
  double R = 0.0;
  Eigen::VectorXd w, dw, d2w; // on the basis nodes

  double value(double r) const;
  double slope(double r) const;
  double curvature(double r) const;

  /// Split Gauss-Legendre rule with a breakpoint at R/2 carrying the
  /// Fourier-Bessel modes and their radial derivatives (truncated kind only).
  struct Quadrature;
  std::shared_ptr<const Quadrature> quad;
};

/// R > 1 for the truncated kind.
VirialWeight build_weight(BasisPtr basis, WeightKind kind, double R = 0.0);

struct VirialValues {
  double V = 0.0;
  double dV = 0.0;
};

/// V = int |u|^2 w, dV = int 2 Im(conj(u) u_r) w' with spectral u_r.
VirialValues virial(const SimState& state, const VirialWeight& weight);

/// Pieces of d^2V/dt^2 for the truncated weight, evaluated on the state.
struct TruncatedVirialRhs {
  double rhs = 0.0;
  double interpolation_term = 0.0; // 4 int_{R/2<=r<=R} w'' |u_r|^2
};
TruncatedVirialRhs truncated_virial_rhs(const SimState& state, const VirialWeight& weight);

struct DiagnosticsRow {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double kinetic_a = 0.0;
  double pnorm = 0.0;
  double V_quadratic = 0.0;
  double dV = 0.0;
  double V_truncated = 0.0;
  double dV_truncated = 0.0;
  double rhs_truncated = 0.0;
  double interpolation_term = 0.0;
  double local_mass = 0.0;
  double sup_weighted = 0.0;     // max r^{(d-1)/2} |u|
  double sup_weighted_low = 0.0; // max r^{d/2-1} |u|
  double band_fraction = 0.0;    // share of the Hdot^1_a mass in the top spectral quartile
  std::vector<double> local_pnorm; // int_{r<=R} |u|^{p+1}, one per Morawetz radius
};

/// Diagnostics of one state. P and E use the node quadrature, which is the
/// one the collocated nonlinear substep conserves.
DiagnosticsRow observables(const SimState& state, double R_loc,
                           const std::vector<double>& morawetz_radii = {});

enum class RunStatus { completed, breach, step_budget };

struct DiagnosticsSeries {
  Params params;
  double dt = 0.0;
  int sample_every = 1;
  double R_loc = 0.0;
  double truncated_R = 0.0; // 0 when no truncated weight was tracked
  bool nonlinear = true;
  std::vector<double> morawetz_radii;
  std::vector<DiagnosticsRow> rows;
  RunStatus status = RunStatus::completed;
  double breach_time = 0.0;
  long steps = 0;
};

using Observer = std::function<void(const SimState&, const DiagnosticsRow&)>;

struct EvolveOptions {
  double dt = 1e-3;
  int sample_every = 10;
  double R_loc = 10.0;
  std::vector<double> morawetz_radii;
  double truncated_R = 0.0; // > 1 to track the truncated virial weight
  bool nonlinear = true;
  long max_steps = 10'000'000;
  bool monitor_breach = true;
  double band_limit = 0.1;        // breach when band_fraction exceeds this
  double kinetic_limit = 1e4;     // or kinetic_a exceeds this times its initial value
  std::vector<Observer> observers;
};

/// Advances state by T (same sign as dt) in round(T/dt) steps, sampling every
/// sample_every steps and at the end. Stops early on a breach or when the
/// step budget runs out; the status says which.
DiagnosticsSeries evolve(SimState& state, double T, const EvolveOptions& opts);

/// Delimited text: a header of field names, one row per sample, 17 digits.
std::string to_csv(const DiagnosticsSeries& series);

struct VirialCheck {
  double max_residual = 0.0; // max |D2 V - rhs| / scale
  double scale = 0.0;        // max of 8 (K + d(p-1)/(2(p+1)) P) over the window
  int points = 0;
  double truncated_max_residual = 0.0; // NaN without a truncated weight
  double interpolation_min = 0.0;
};

/// Second differences of V against 8 [K_a - d(p-1)/(2(p+1)) P] (8 K_a for a
/// linear run) on rows with t in [t0, t1]. Requires uniform cadence; throws UsageError otherwise.
VirialCheck virial_identity_check(const DiagnosticsSeries& series, double t0, double t1);

struct MorawetzCheck {
  double lhs = 0.0;
  double bound_terms[3] = {0.0, 0.0, 0.0}; // R/T, R^-2, R^-(p-1)
  double ratio = 0.0;
};

/// lhs = (1/T) int_0^T int_{r<=R} |u|^{p+1} by the trapezoid rule. R must be one
/// of the series' Morawetz radii and the series must reach T.
MorawetzCheck morawetz_check(const DiagnosticsSeries& series, double R, double T);

enum class Verdict { scatter_like, soliton_like, blowup_like };
std::string to_string(Verdict v);

struct RunClassification {
  Verdict verdict = Verdict::soliton_like;
  double local_mass_ratio = 0.0; // final-quartile max over the initial value
  double max_MH_ratio = 0.0;
  double MH_bound = 0.0;         // 1 - delta' from the initial data
  bool breach = false;
};

/// Scatter-like when the final-quartile local mass stays below local_fraction
/// of its initial value and the mass-kinetic product stays under 1 - delta';
/// blowup-like on a breach; soliton-like otherwise.
RunClassification classify_run(const DiagnosticsSeries& series, const GroundStateReport& report,
                               double local_fraction = 0.5);

/// ||u||_2^{1-s_c} ||u||_{Hdot^1_a}^{s_c} of a row over the ground-state value.
double mh_ratio(const DiagnosticsRow& row, const GroundStateReport& report);

} // namespace radnls
