#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lieflow/fields.hpp"
#include "lieflow/flow.hpp"

namespace lieflow {

/// k-form contraction with the Jacobian of a map:
/// out_J = sum_{I sorted} v_I * det(dmap[I rows, J cols]). With dmap = Dpsi
/// at the pre-image this is the push-forward; with dmap = Dphi at x it is the
/// pull-back.
FormValue contract_form_with_map(const FormValue& v, const Mat& dmap);

/// Access to one realization of a flow of diffeomorphisms: forward map,
/// forward Jacobian, and pre-image with inverse Jacobian.
class FlowContext {
 public:
  virtual ~FlowContext() = default;
  virtual int n() const = 0;
  virtual Vec forward(double t, const Vec& x) const = 0;
  virtual Mat forward_jacobian(double t, const Vec& x) const = 0;
  virtual std::pair<Vec, Mat> forward_with_jacobian(double t, const Vec& x) const;
  /// Returns (psi_t(x), Dpsi_t(x)).
  virtual std::pair<Vec, Mat> preimage(double t, const Vec& x) const = 0;
};

/// Flow given by closed-form maps; the inverse Jacobian defaults to the
/// inverse of the forward Jacobian at the pre-image.
class ClosedFormFlow : public FlowContext {
 public:
  using MapFn = std::function<Vec(double, const Vec&)>;
  using JacFn = std::function<Mat(double, const Vec&)>;

  ClosedFormFlow(int n, MapFn phi, JacFn dphi, MapFn psi);
  ClosedFormFlow(int n, MapFn phi, JacFn dphi, MapFn psi, JacFn dpsi);

  int n() const override { return n_; }
  Vec forward(double t, const Vec& x) const override { return phi_(t, x); }
  Mat forward_jacobian(double t, const Vec& x) const override { return dphi_(t, x); }
  std::pair<Vec, Mat> preimage(double t, const Vec& x) const override;

 private:
  int n_;
  MapFn phi_, psi_;
  JacFn dphi_, dpsi_;
};

/// Flow realized by numerical integration along one Brownian path. The
/// pre-image is recovered by the backward SDE; its Jacobian is the matrix
/// inverse of the forward Jacobian re-integrated from the recovered point.
class SampledFlow : public FlowContext {
 public:
  SampledFlow(VectorField b, std::vector<VectorField> xis, BrownianPath path, Scheme scheme);

  int n() const override { return n_; }
  Vec forward(double t, const Vec& x) const override;
  Mat forward_jacobian(double t, const Vec& x) const override;
  std::pair<Vec, Mat> forward_with_jacobian(double t, const Vec& x) const override;
  std::pair<Vec, Mat> preimage(double t, const Vec& x) const override;

  const BrownianPath& path() const { return path_; }

 private:
  int step_of(double t) const;
  int n_;
  VectorField b_;
  std::vector<VectorField> xis_;
  BrownianPath path_;
  Scheme scheme_;
};

/// ((phi_t)_* K0)(x) = K0(psi_t(x)) contracted with Dpsi_t(x); reduces to
/// composition for k = 0 and to the det Dpsi density factor for k = n.
FormValue pushforward_form(const KFormField& K0, const FlowContext& flow, double t,
                           const Vec& x);

/// (phi_t^* K)(x) = K(t, phi_t(x)) contracted with Dphi_t(x).
FormValue pullback_form(const KFormField& K, const FlowContext& flow, double t, const Vec& x);

/// Parameterized k-dimensional chart over [0,1]^k with tensor-product
/// midpoint quadrature; tangents analytic when given, FD otherwise.
struct SubmanifoldChart {
  int k = 0;
  int n = 0;
  std::function<Vec(const Vec&)> sigma;
  std::function<Vec(const Vec&, int)> tangent;  // optional; axis a in 0..k-1
  std::array<int, kMaxDim> nodes{};

  Vec tangent_at(const Vec& u, int a) const;
  /// Visits every quadrature node: f(u, weight).
  void for_each_node(const std::function<void(const Vec&, double)>& f) const;
};

/// int_chart K = sum_u < K(sigma(u)), t_1 ^ ... ^ t_k > w_u; rejects charts
/// with linearly dependent tangents at a quadrature node.
double integrate_over_chart(const KFormField& K, const SubmanifoldChart& chart, double t);

struct ConservationResult {
  double initial = 0.0;
  double transported = 0.0;
  double drift = 0.0;
};

/// Transports the chart through the flow, evaluates the push-forward solution
/// at the transported nodes with transported tangents, and compares the two
/// integrals of the conservation law.
ConservationResult conservation_check(const KFormField& K0, const VectorField& b,
                                      const std::vector<VectorField>& xis,
                                      const SubmanifoldChart& chart, const BrownianPath& path,
                                      double T, Scheme scheme);

/// Time-indexed solution evaluator (grid-backed or closed form).
struct SolutionSeries {
  int n = 0, k = 0;
  std::function<FormValue(double, const Vec&)> eval;
};

/// Weak-form residual per path node for several test forms at once:
/// R(t) = <<K_t,Th>> - <<K_0,Th>> + int_0^t <<K_s, L*_b Th>> ds
///        + sum_i int <<K_s, L*_xi Th>> dW^i - 1/2 sum_i int <<K_s, L*_xi L*_xi Th>> ds,
/// with left-endpoint (adapted) sums for both integrals. Coefficients are
/// assumed autonomous unless marked time-dependent (then adjoints are
/// re-evaluated per slice).
struct WeakResidualReport {
  std::vector<double> times;
  std::vector<std::vector<double>> residuals;  // [form][time node]
  std::vector<double> max_residual;            // per form
};

WeakResidualReport weak_residual(const SolutionSeries& series, const VectorField& b,
                                 const std::vector<VectorField>& xis,
                                 const std::vector<TestForm>& forms, const BrownianPath& path,
                                 const QuadratureGrid& grid);

/// Monte-Carlo mean and standard error of the scalar (k = 0) push-forward
/// solution u(t, x) = u0(psi_t(x)) over paths [first_path, first_path+count).
std::pair<double, double> scalar_pushforward_mean(
    const std::function<double(const Vec&)>& u0, const VectorField& b,
    const std::vector<VectorField>& xis, const Vec& x, double t, int steps, uint64_t seed,
    uint64_t first_path, int count, Scheme scheme);

/// Pathwise Kunita-Ito-Wentzell identity residual for
/// K(t,x) = K0(x) + t G(x) + W_t H(x) driven by the same single noise that
/// drives the flow (B = W): max over sample points of
/// | phi_T^* K(T,.) - K0 - sum of the pulled-back correction integrals |.
struct KiwFixture {
  KFormField K0, G, H;
  VectorField b, xi;
};

double kiw_residual(const KiwFixture& fx, const BrownianPath& path,
                    const std::vector<Vec>& points);

}  // namespace lieflow
