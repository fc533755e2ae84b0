#pragma once

#include "radnls/specfun.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace radnls {

using cplx = std::complex<double>;

struct Admissibility {
  bool admissible = false;
  int branch = 0; // 1 or 2 when admissible
  std::string reason;
};

/// Problem parameters (d, a, p) with the derived Bessel bookkeeping.
///
///   h     = (d-2)/2
///   nu    = sqrt(h^2 + a)       (order of the Hankel transform)
///   sigma = h - nu              (Q_a ~ r^{-sigma} at the origin)
///   s_c   = d/2 - 2/(p-1)
struct Params {
  int d = 3;
  double a = 0.0;
  double p = 3.0;
  double h = 0.5;
  double sigma = 0.0;
  BesselOrder nu{0.5};
  double s_c = 0.5;

  /// Throws DomainError unless d >= 3, p > 1 and a > -h^2 (L_a positive).
  static Params make(int d, double a, double p);

  /// Admissible range of (d, p, a) for the threshold theory:
  ///   branch 1: d = 3, 4/3 < p-1 <= 2, a > -1/4
  ///   branch 2: max(2/(d-2), 4/d) < p-1 < 4/(d-2), a > -h^2 + (h - 1/(p-1))^2
  Admissibility admissibility() const;

  /// |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)
  double sphere_area() const;
};

/// Order-nu Fourier-Bessel collocation grid on [0, R].
///
/// Physical samples f(r_k) and spectral samples F(rho_m) are both carried in
/// "scaled" form x = alpha .* f, y = beta .* F, in which the transform is the
/// symmetric involution y = T x, x = T y.
struct HankelBasis {
  Params params;
  double R = 0.0;
  int N = 0;
  double S = 0.0; // j_{nu,N+1}
  Eigen::VectorXd zeros; // N+1 zeros
  Eigen::VectorXd r;     // nodes
  Eigen::VectorXd rho;   // spectral nodes
  Eigen::VectorXd J1;    // |J_{nu+1}(j_k)|
  Eigen::VectorXd weights;          // r dr on [0,R]
  Eigen::VectorXd spectral_weights; // rho drho
  Eigen::MatrixXd T;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  double omega = 0.0; // |S^{d-1}|

  /// Physical-space radial derivative matrix: (D f)_k = f'(r_k) for the
  /// Fourier-Bessel interpolant of f. Built on first use.
  const Eigen::MatrixXd& derivative() const;

  double rho_max() const { return rho(N - 1); }

private:
  mutable std::once_flag deriv_once_;
  mutable Eigen::MatrixXd deriv_;
};

using BasisPtr = std::shared_ptr<const HankelBasis>;

/// Builds the basis. Requires N >= 2 and R > 0.
BasisPtr build_basis(const Params& params, double R, int N);

enum class Domain { physical, spectral };

struct RadialField {
  BasisPtr basis;
  Domain domain = Domain::physical;
  Eigen::VectorXcd v;

  int dim() const { return basis->params.d; }
  static RadialField physical(BasisPtr b, Eigen::VectorXcd values);
  static RadialField from_function(BasisPtr b, const std::function<cplx(double)>& f);
};

/// H_nu: physical -> spectral and spectral -> physical (the transform is its
/// own inverse).
RadialField hankel_apply(const RadialField& f);
RadialField hankel_apply(const HankelBasis& basis, const RadialField& f);

/// H^{-1}[m(rho) H f], returned in the domain of f.
RadialField apply_multiplier(const RadialField& f, const std::function<cplx(double)>& m);
RadialField apply_multiplier(const RadialField& f, const Eigen::VectorXcd& m_on_rho);

/// In-place version on scaled physical samples x = alpha .* f.
void apply_scaled_multiplier(const HankelBasis& b, Eigen::VectorXcd& x,
                             const Eigen::VectorXcd& m_on_rho);

Eigen::VectorXcd to_physical(const RadialField& f);
Eigen::VectorXcd to_spectral(const RadialField& f);

enum class NormKind { L2, Lq, Hdot1a, H1a, Linf };

/// Accepts "L2", "Lq", "Hdot1a", "H1a", "Linf"; throws UsageError otherwise.
NormKind parse_norm_kind(std::string_view name);

/// Norms with the d-dimensional measure |S^{d-1}| r^{d-1} dr. q is used only
/// for NormKind::Lq (q >= 1). Linf is the max over the nodes, plus |f(0)| when
/// a = 0 (for a > 0 fields vanish at 0, for a < 0 they are unbounded there).
double norm(const RadialField& f, NormKind kind, double q = 2.0);

/// omega * sum_k w_k r_k^{d-2} g_k, i.e. int_{R^d} g dx for radial g on the
/// nodes.
double integrate(const HankelBasis& b, const Eigen::VectorXd& g);

/// Fourier-Bessel coefficients c_m of g(r) = r^h f(r) = sum_m c_m J_nu(rho_m r).
Eigen::VectorXd fb_coefficients(const HankelBasis& b, const Eigen::VectorXd& f);
Eigen::VectorXd fb_to_physical(const HankelBasis& b, const Eigen::VectorXd& c);

/// Leading coefficient A of the interpolant near the origin, f(r) ~ A r^{-sigma}
/// as r -> 0. For a = 0 this is f(0), which the nodes never sample.
cplx origin_coefficient(const RadialField& f);

/// Evaluates the Fourier-Bessel interpolant of physical samples f at radius r.
cplx interpolate(const RadialField& f, double r);

/// Composite Gauss-Legendre rule on panels uniform in s = sqrt(r), s in
/// [0, sqrt(R)]; the sqrt grading resolves r^{-sigma} profiles near 0. Carries
/// the Fourier-Bessel modes on its nodes so that interpolants can be evaluated
/// and functions projected back onto the basis.
class RefinedQuadrature {
public:
  explicit RefinedQuadrature(BasisPtr basis, int panels = 0);

  const Eigen::VectorXd& nodes() const { return rq_; }
  const Eigen::VectorXd& weights() const { return wq_; }
  const HankelBasis& basis() const { return *basis_; }

  /// Values of f = r^{-h} sum_m c_m J_nu(rho_m r) at the quadrature nodes.
  Eigen::VectorXd evaluate(const Eigen::VectorXd& c) const;
  /// Least-squares (L^2) projection onto the modes.
  Eigen::VectorXd project(const Eigen::VectorXd& values) const;
  /// omega * sum_q wq r_q^{d-1} g_q.
  double integrate(const Eigen::VectorXd& g) const;
  /// int_{R^d} |f|^2 dx in coefficient space.
  double mass(const Eigen::VectorXd& c) const;
  /// ||f||^2_{Hdot^1_a} in coefficient space.
  double kinetic(const Eigen::VectorXd& c) const;
  const Eigen::VectorXd& mode_norms() const { return mode_norm_; }

private:
  BasisPtr basis_;
  Eigen::VectorXd rq_, wq_, mode_norm_;
  Eigen::MatrixXd phi_; // Q x N
};

} // namespace radnls
