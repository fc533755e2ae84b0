#pragma once

#include "radnls/hankel.hpp"

#include <utility>
#include <vector>

namespace radnls {

/// e^{-itL_a} f via the multiplier e^{-it rho^2}.
RadialField schrodinger_propagate(const RadialField& f, double t);

/// e^{-tL_a} f via the multiplier e^{-t rho^2}; t > 0.
RadialField heat_propagate(const RadialField& f, double t);

/// Radial Schroedinger kernel of e^{-itL_a}:
///   K(t,r,s) = (rs)^{-h} e^{-i nu pi/2} / (2it) * e^{i(r^2+s^2)/(4t)} * J_nu(rs/(2t)),
/// so that (e^{-itL_a} f)(r) = int_0^inf f(s) s^{d-1} K(t,r,s) ds. For t < 0 the
/// conjugate kernel K(-t) = conj(K(|t|)) is returned (L_a is real).
cplx kernel_eval(const Params& params, double t, double r, double s);

struct KernelPropagation {
  RadialField u;
  bool undersampled = false;
  /// node spacing over the pi*|t|/r_max resolution heuristic; > 1 means undersampled
  double sampling_ratio = 0.0;
};

/// Evaluates u(t, r_k) = int f(s) s^{d-1} K(t, r_k, s) ds on every node with
/// the refined quadrature applied to the Fourier-Bessel interpolant of f.
/// Throws DomainError for |t| < min_abs_t.
KernelPropagation propagate_via_kernel(const RadialField& f, double t, double min_abs_t = 0.1);

/// Dispersive-estimate ratio.
///   a >= 0: ||e^{-itL_a} f||_inf t^{d/2} / ||f||_1
///   a <  0: ||(1+r^{-sigma})^{-1} e^{-itL_a} f||_inf t^{d/2} / (1+t^sigma)
///           / ||(1+r^{-sigma}) f||_1
double dispersive_ratio(const Params& params, const RadialField& f, double t);

/// Radial heat kernel k(t,r,s) = (rs)^{-h} int_0^inf J_nu(r rho) J_nu(s rho) e^{-t rho^2} rho drho,
/// the kernel of e^{-tL_a} against s^{d-1} ds, by composite Gauss-Legendre in rho.
double heat_kernel(const Params& params, double t, double r, double s);

/// A(kappa) = int_{S^{d-1}} exp(kappa (omega.e - 1)) domega.
double sphere_exponential_average(int d, double kappa);

struct HeatKernelReport {
  double C1 = 0.0, C2 = 0.0, c1 = 0.0, c2 = 0.0;
  double min_kernel = 0.0;      // most negative sampled kernel value relative to its scale
  bool positive = false;
  bool pass = false;
  int samples = 0;
};

/// Fits C1 W G_{c1} <= k <= C2 W G_{c2} over all (t, r, s) samples, where
/// W = (1 v sqrt(t)/r)^sigma (1 v sqrt(t)/s)^sigma and G_c is the radialized
/// Gaussian t^{-d/2} e^{-(r-s)^2/(ct)} A(2rs/(ct)).
HeatKernelReport heat_kernel_bound_check(const Params& params, const std::vector<double>& t_list,
                                         const std::vector<std::pair<double, double>>& grid);

} // namespace radnls
