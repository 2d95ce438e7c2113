#pragma once

#include <vector>

#include "lieflow/fields.hpp"

namespace lieflow {

/// Lie derivative of a k-form in coordinates,
///   (L_b K)_{j1..jk} = b^l d_l K_{j1..jk}
///                      + K_{l,j2..jk} d_{j1} b^l + ... + K_{j1..j(k-1),l} d_{jk} b^l,
/// assembled over sorted multi-indices with permutation signs. Uses analytic
/// coefficient derivatives when the field provides them, FD otherwise.
FormValue lie_derivative(const VectorField& b, const KFormField& K, double t, const Vec& x);

/// L2-adjoint of the Lie derivative,
///   (L*_b Th)_{j1..jk} = -d_l(b^l Th_{j1..jk})
///                        + Th_{l,j2..jk} d_l b^{j1} + ... + Th_{j1..j(k-1),l} d_l b^{jk}.
FormValue adjoint_lie(const VectorField& b, const KFormField& theta, double t, const Vec& x);

/// L*_xi applied twice; the inner application is materialized on a local FD
/// stencil, so theta must be twice differentiable.
FormValue adjoint_lie_squared(const VectorField& xi, const KFormField& theta, double t,
                              const Vec& x);

/// Analytic-field wrappers: the returned fields evaluate the operators
/// pointwise (their own derivatives are taken by FD).
KFormField lie_derivative_field(const VectorField& b, const KFormField& K);
KFormField adjoint_lie_field(const VectorField& b, const KFormField& theta);

/// Pairing <<K, (L*_b)^dist Theta>> by quadrature, written so that all
/// derivatives land on Theta or on products b^l * Theta (never on b or K
/// alone); valid for b merely continuous. Theta must be compactly supported
/// inside the grid box.
double distributional_adjoint_pairing(const VectorField& b, const TestForm& theta,
                                      const KFormField& K, const QuadratureGrid& grid,
                                      double t = 0.0);

/// Radial C-infinity averaging kernel supported on B(0,1) with a constant
/// plateau on B(0,1/2), normalized to unit mass, scaled by
/// rho_eps(x) = eps^-n rho(x/eps). The profile is the normalized convolution
/// (bump on B(0,1/4)) * indicator(B(0,3/4)), tabulated radially.
class Mollifier {
 public:
  Mollifier(int n, double eps);

  int n() const { return n_; }
  double eps() const { return eps_; }

  /// Unscaled profile rho at radius r (unit support).
  double profile(double r) const;
  /// Scaled kernel value rho_eps(x).
  double operator()(const Vec& x) const;
  /// Value of the plateau constant rho_max.
  double plateau() const { return table_.front(); }

 private:
  int n_;
  double eps_;
  std::vector<double> table_;  // profile on r in [0,1]
};

/// Channelwise discrete convolution of a grid field with rho_eps; requires
/// eps >= 2 grid cells. The discrete kernel is normalized so constants are
/// preserved exactly.
GridKForm mollify(const GridKForm& g, const Mollifier& m);

/// <<[L_b, rho_eps*] K, Theta>> evaluated through the adjoint as
/// <<K_eps, L*_b Theta>> - <<K, L*_b (Theta_eps)>>; K is sampled on the grid,
/// Theta_eps is the grid mollification of Theta. Requires
/// support(Theta) + eps inside the grid box.
double commutator_pairing(const VectorField& b, const KFormField& K, const TestForm& theta,
                          const Mollifier& m, const QuadratureGrid& grid, double t = 0.0);

/// <<[L_xi, [L_xi, rho_eps*]] K, Theta>> =
/// <<K_eps, L*_xi L*_xi Theta>> - 2 <<L_xi K, (L*_xi Theta)_eps>>
/// + <<L^2_xi K, Theta_eps>>; xi twice differentiable, K differentiable.
double double_commutator_pairing(const VectorField& xi, const KFormField& K,
                                 const TestForm& theta, const Mollifier& m,
                                 const QuadratureGrid& grid, double t = 0.0);

/// Least-squares slope of log(values) against log(scales).
double fitted_loglog_slope(const std::vector<double>& scales, const std::vector<double>& values);

}  // namespace lieflow
