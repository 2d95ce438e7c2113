#pragma once

#include <string>
#include <vector>

#include "lieflow/fields.hpp"
#include "lieflow/transport.hpp"

namespace lieflow {

/// Parameters of the closed-form ill-posedness fixtures (R fixed to 1).
struct CounterexampleParams {
  double alpha = 0.5;   // Holder exponent in (0,1)
  int n = 3;
  int k = 1;
  double p = 2.0;       // integrability exponent, >= 2
  double horizon = 0.2;

  double q() const { return p / (p - 1.0); }
  /// Largest horizon admissible for the nonuniqueness construction.
  double max_horizon() const { return 1.0 - std::pow(2.0, alpha - 1.0); }

  void validate_nonuniqueness() const;
  void validate_blowup() const;
};

/// Autonomous Holder drift b_alpha(x) = (1/(1-alpha)) (x/|x|) min(|x|,1)^alpha,
/// with the convention b_alpha(0) = 0.
Vec b_alpha_eval(double alpha, const Vec& x);
Mat b_alpha_jacobian(double alpha, const Vec& x);  // inner branch on |x| = 1
VectorField make_b_alpha(int n, double alpha);

/// Explicit characteristic flow of b_alpha away from the origin and its
/// inverse; branch dispatch follows the listed order with boundary points
/// assigned to the earlier branch. Out-of-domain arguments raise
/// std::domain_error.
Vec phi_explicit(double t, const Vec& x, double alpha);
Mat phi_explicit_jacobian(double t, const Vec& x, double alpha);
Vec psi_explicit(double t, const Vec& x, double alpha);
Mat psi_explicit_jacobian(double t, const Vec& x, double alpha);

/// The origin-emitting flow Phi_t : B(0,t)\{0} -> B(0,t^{1/(1-alpha)})\{0}
/// built from the shifted solutions started at the origin, and its inverse.
Vec Phi_explicit(double t, const Vec& x, double alpha);
Mat Phi_explicit_jacobian(double t, const Vec& x, double alpha);
Vec Psi_explicit(double t, const Vec& x, double alpha);
Mat Psi_explicit_jacobian(double t, const Vec& x, double alpha);

/// The nonunique family K^Gamma: push-forward of K0 outside the vacated
/// ball, push-forward of Gamma (through the origin-emitting flow) inside it,
/// zero elsewhere. K0 and Gamma must be smooth and supported in B(0,1/2).
class NonuniqueSolution {
 public:
  NonuniqueSolution(CounterexampleParams params, KFormField K0, KFormField Gamma);

  const CounterexampleParams& params() const { return params_; }
  FormValue operator()(double t, const Vec& x) const;
  SolutionSeries series() const;

 private:
  CounterexampleParams params_;
  KFormField K0_, Gamma_;
};

/// Divergence-free shear drift of the blow-up example:
/// b' = (0, min(|x1|,1)^alpha, 0, ..., 0).
VectorField make_b_prime(int n, double alpha);

/// Where the indicator factor of the blow-up solution rides: composed with
/// the inverse flow (the push-forward reading) or frozen at the evaluation
/// point (comparison reading, used in tests only).
enum class IndicatorAt { preimage, point };

/// Closed-form solution transported from K0 = X_{B(0,1)} dx2^...^dx_{k+1}:
/// the surviving sheared component sits at multi-index (1,3,...,k+1) with
/// value -sgn(x1) alpha |x1|^{alpha-1} t on the support, and the transported
/// component at (2,3,...,k+1) equals 1 there.
class BlowupSolution {
 public:
  BlowupSolution(int n, int k, double alpha, double p);

  FormValue operator()(double t, const Vec& x,
                       IndicatorAt mode = IndicatorAt::preimage) const;
  /// Magnitude of the sheared component on the line |x1| = delta (inside the
  /// support): alpha delta^{alpha-1} t.
  double sheared_component_magnitude(double t, double delta) const;

  Vec inverse_map(double t, const Vec& x) const;
  Mat inverse_jacobian(double t, const Vec& x) const;

 private:
  int n_, k_;
  double alpha_;
};

/// Rigid rotation flow of b = (x2, -x1) on R^2 (deterministic closed form).
ClosedFormFlow rotation_flow();
VectorField make_rotation_field();

/// Pathwise closed form of dx = x o dW on R (geometric flow x exp(W_t)).
ClosedFormFlow geometric_flow(const BrownianPath& path);
VectorField make_linear_field_1d();  // xi(x) = x with analytic Jacobian

struct Fixture {
  std::string name;
  std::string description;
};

/// Named fixtures exposed to the CLI.
const std::vector<Fixture>& fixture_registry();

}  // namespace lieflow
