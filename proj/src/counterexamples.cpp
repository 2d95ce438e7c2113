#include "lieflow/counterexamples.hpp"

#include <cmath>
#include <stdexcept>

namespace lieflow {

void CounterexampleParams::validate_nonuniqueness() const {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("nonuniqueness fixture requires alpha in (0,1)");
  if (p < 2.0) throw std::invalid_argument("nonuniqueness fixture requires p >= 2");
  if (n == 1 && !(alpha > (q() - 1.0) / q()))
    throw std::invalid_argument("nonuniqueness fixture requires alpha > (q-1)/q when n = 1");
  if (!(k * p < n))
    throw std::invalid_argument("nonuniqueness fixture requires k*p < n");
  if (!(horizon > 0.0 && horizon <= max_horizon()))
    throw std::invalid_argument("nonuniqueness fixture requires 0 < T <= 1 - 1/2^(1-alpha)");
}

void CounterexampleParams::validate_blowup() const {
  if (k == 0 || k == n)
    throw std::invalid_argument("blow-up fixture requires k not in {0, n}");
  if (!(alpha > (p - 1.0) / p && alpha < 1.0))
    throw std::invalid_argument("blow-up fixture requires alpha in ((p-1)/p, 1)");
}

// ---------------------------------------------------------------------------
// b_alpha and its explicit flow

Vec b_alpha_eval(double alpha, const Vec& x) {
  const double r = x.norm();
  if (r == 0.0) return Vec(Vec::Zero(x.size()));  // convention 0/0 = 0
  const double mag = std::pow(std::min(r, 1.0), alpha) / (1.0 - alpha);
  return Vec((mag / r) * x);
}

Mat b_alpha_jacobian(double alpha, const Vec& x) {
  const int n = static_cast<int>(x.size());
  const double r = x.norm();
  const double c = 1.0 / (1.0 - alpha);
  Mat out(n, n);
  if (r == 0.0) {
    out.setZero();
    return out;
  }
  Vec u = x / r;
  Mat uu = u * u.transpose();
  if (r <= 1.0) {
    // b = c x |x|^{alpha-1}
    out = c * std::pow(r, alpha - 1.0) * (Mat::Identity(n, n) + (alpha - 1.0) * uu);
  } else {
    out = (c / r) * (Mat::Identity(n, n) - uu);
  }
  return out;
}

VectorField make_b_alpha(int n, double alpha) {
  return VectorField(
      n, [alpha](double, const Vec& x) { return b_alpha_eval(alpha, x); },
      [alpha](double, const Vec& x) { return b_alpha_jacobian(alpha, x); });
}

namespace {

// Radial map x -> (x/|x|) g(|x|): value and Jacobian from (g, g').
Vec radial_value(const Vec& x, double r, double g) { return Vec((g / r) * x); }

Mat radial_jacobian(const Vec& x, double r, double g, double gp) {
  const int n = static_cast<int>(x.size());
  Vec u = x / r;
  Mat uu = u * u.transpose();
  return Mat((g / r) * (Mat::Identity(n, n) - uu) + gp * uu);
}

struct RadialBranch {
  double g, gp;
};

}  // namespace

Vec phi_explicit(double t, const Vec& x, double alpha) {
  const double r = x.norm();
  if (r == 0.0) throw std::domain_error("phi_explicit: x = 0 is not in the domain");
  const double e = 1.0 - alpha;
  double g;
  if (r <= 1.0 && t + std::pow(r, e) <= 1.0) {
    g = std::pow(t + std::pow(r, e), 1.0 / e);
  } else if (r <= 1.0) {
    g = (t + std::pow(r, e) - 1.0) / e + 1.0;
  } else {
    g = t / e + r;
  }
  return radial_value(x, r, g);
}

Mat phi_explicit_jacobian(double t, const Vec& x, double alpha) {
  const double r = x.norm();
  if (r == 0.0) throw std::domain_error("phi_explicit: x = 0 is not in the domain");
  const double e = 1.0 - alpha;
  RadialBranch br;
  if (r <= 1.0 && t + std::pow(r, e) <= 1.0) {
    br = {std::pow(t + std::pow(r, e), 1.0 / e),
          std::pow(t + std::pow(r, e), alpha / e) * std::pow(r, -alpha)};
  } else if (r <= 1.0) {
    br = {(t + std::pow(r, e) - 1.0) / e + 1.0, std::pow(r, -alpha)};
  } else {
    br = {t / e + r, 1.0};
  }
  return radial_jacobian(x, r, br.g, br.gp);
}

namespace {

RadialBranch psi_branch(double t, double r, double alpha) {
  const double e = 1.0 - alpha;
  if (t == 0.0) return {r, 1.0};
  if (t < 0.0) throw std::domain_error("psi_explicit: negative time");
  // Admissible region: outside the vacated ball.
  const double inner = (t < 1.0) ? std::pow(t, 1.0 / e) : (t - alpha) / e;
  if (r <= inner) throw std::domain_error("psi_explicit: point inside the vacated ball");
  if (t < 1.0 && r <= 1.0) {
    double base = std::pow(r, e) - t;
    return {std::pow(base, 1.0 / e), std::pow(base, alpha / e) * std::pow(r, -alpha)};
  }
  if (r <= 1.0 + t / e) {
    double base = e * r + alpha - t;
    return {std::pow(base, 1.0 / e), std::pow(base, alpha / e)};
  }
  return {r - t / e, 1.0};
}

}  // namespace

Vec psi_explicit(double t, const Vec& x, double alpha) {
  const double r = x.norm();
  if (r == 0.0) throw std::domain_error("psi_explicit: x = 0 is not in the domain");
  RadialBranch br = psi_branch(t, r, alpha);
  return radial_value(x, r, br.g);
}

Mat psi_explicit_jacobian(double t, const Vec& x, double alpha) {
  const double r = x.norm();
  if (r == 0.0) throw std::domain_error("psi_explicit: x = 0 is not in the domain");
  RadialBranch br = psi_branch(t, r, alpha);
  return radial_jacobian(x, r, br.g, br.gp);
}

Vec Phi_explicit(double t, const Vec& x, double alpha) {
  const double r = x.norm();
  const double e = 1.0 - alpha;
  if (r == 0.0 || r >= t) throw std::domain_error("Phi_explicit: need 0 < |x| < t");
  double g;
  if (t - r <= 1.0)
    g = std::pow(t - r, 1.0 / e);
  else
    g = (t - r - 1.0) / e + 1.0;
  return radial_value(x, r, g);
}

Mat Phi_explicit_jacobian(double t, const Vec& x, double alpha) {
  const double r = x.norm();
  const double e = 1.0 - alpha;
  if (r == 0.0 || r >= t) throw std::domain_error("Phi_explicit: need 0 < |x| < t");
  RadialBranch br;
  if (t - r <= 1.0)
    br = {std::pow(t - r, 1.0 / e), -std::pow(t - r, alpha / e) / e};
  else
    br = {(t - r - 1.0) / e + 1.0, -1.0 / e};
  return radial_jacobian(x, r, br.g, br.gp);
}

namespace {

RadialBranch Psi_branch(double t, double r, double alpha) {
  const double e = 1.0 - alpha;
  if (t <= 0.0 || r == 0.0) throw std::domain_error("Psi_explicit: empty domain");
  if (t <= 1.0) {
    if (r > std::pow(t, 1.0 / e))
      throw std::domain_error("Psi_explicit: point outside B(0, t^{1/(1-alpha)})");
    return {t - std::pow(r, e), -e * std::pow(r, -alpha)};
  }
  if (r <= 1.0) return {t - std::pow(r, e), -e * std::pow(r, -alpha)};
  if (r <= 1.0 + (t - 1.0) / e) return {(alpha - 1.0) * r - alpha + t, alpha - 1.0};
  throw std::domain_error("Psi_explicit: point outside the reachable ball");
}

}  // namespace

Vec Psi_explicit(double t, const Vec& x, double alpha) {
  const double r = x.norm();
  RadialBranch br = Psi_branch(t, r, alpha);
  return radial_value(x, r, br.g);
}

Mat Psi_explicit_jacobian(double t, const Vec& x, double alpha) {
  const double r = x.norm();
  RadialBranch br = Psi_branch(t, r, alpha);
  return radial_jacobian(x, r, br.g, br.gp);
}

// ---------------------------------------------------------------------------
// Nonunique family

NonuniqueSolution::NonuniqueSolution(CounterexampleParams params, KFormField K0, KFormField Gamma)
    : params_(params), K0_(std::move(K0)), Gamma_(std::move(Gamma)) {
  params_.validate_nonuniqueness();
  if (K0_.n() != params_.n || K0_.k() != params_.k || Gamma_.n() != params_.n ||
      Gamma_.k() != params_.k)
    throw std::invalid_argument("NonuniqueSolution: field degree mismatch");
}

FormValue NonuniqueSolution::operator()(double t, const Vec& x) const {
  const double r = x.norm();
  const double e = 1.0 - params_.alpha;
  const double inner = (t > 0.0) ? std::pow(t, 1.0 / e) : 0.0;
  FormValue zero(params_.n, params_.k);
  if (r <= 0.0 || r >= 1.0) return zero;
  if (r >= inner) {
    // Transported initial datum on the annulus.
    double base = std::pow(r, e) - t;
    double g = std::pow(base, 1.0 / e);
    double gp = std::pow(base, params_.alpha / e) * std::pow(r, -params_.alpha);
    Vec y = radial_value(x, r, g);
    if (y.norm() >= 0.5) return zero;  // outside supp K0
    Mat dpsi = radial_jacobian(x, r, g, gp);
    return contract_form_with_map(K0_(0.0, y), dpsi);
  }
  // Gamma branch inside the vacated ball.
  double g = t - std::pow(r, e);
  double gp = -e * std::pow(r, -params_.alpha);
  Vec y = radial_value(x, r, g);
  if (y.norm() >= 0.5) return zero;
  Mat dpsi = radial_jacobian(x, r, g, gp);
  return contract_form_with_map(Gamma_(0.0, y), dpsi);
}

SolutionSeries NonuniqueSolution::series() const {
  SolutionSeries s;
  s.n = params_.n;
  s.k = params_.k;
  const NonuniqueSolution self = *this;
  s.eval = [self](double t, const Vec& x) { return self(t, x); };
  return s;
}

// ---------------------------------------------------------------------------
// Blow-up fixture

VectorField make_b_prime(int n, double alpha) {
  if (n < 2) throw std::invalid_argument("make_b_prime: needs n >= 2");
  auto eval = [n, alpha](double, const Vec& x) {
    Vec v = Vec::Zero(n);
    v[1] = std::pow(std::min(std::abs(x[0]), 1.0), alpha);
    return v;
  };
  auto jac = [n, alpha](double, const Vec& x) {
    Mat j = Mat::Zero(n, n);
    const double a1 = std::abs(x[0]);
    if (a1 <= 1.0) {
      double sgn = (x[0] > 0.0) ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0);
      j(1, 0) = sgn * alpha * std::pow(std::max(a1, 1e-300), alpha - 1.0);
    }
    return j;
  };
  return VectorField(n, eval, jac).declare_divergence_free();
}

BlowupSolution::BlowupSolution(int n, int k, double alpha, double p) : n_(n), k_(k), alpha_(alpha) {
  CounterexampleParams params;
  params.alpha = alpha;
  params.n = n;
  params.k = k;
  params.p = p;
  params.validate_blowup();
}

Vec BlowupSolution::inverse_map(double t, const Vec& x) const {
  Vec y = x;
  y[1] = x[1] - std::pow(std::min(std::abs(x[0]), 1.0), alpha_) * t;
  return y;
}

Mat BlowupSolution::inverse_jacobian(double t, const Vec& x) const {
  Mat j = Mat::Identity(n_, n_);
  const double a1 = std::abs(x[0]);
  if (a1 <= 1.0) {
    double sgn = (x[0] > 0.0) ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0);
    j(1, 0) = -sgn * alpha_ * std::pow(std::max(a1, 1e-300), alpha_ - 1.0) * t;
  }
  return j;
}

FormValue BlowupSolution::operator()(double t, const Vec& x, IndicatorAt mode) const {
  const Vec y = inverse_map(t, x);
  const double chi = ((mode == IndicatorAt::preimage ? y : x).norm() < 1.0) ? 1.0 : 0.0;
  FormValue out(n_, k_);
  if (chi == 0.0) return out;
  std::array<int, kMaxDim> axes{};
  for (int a = 0; a < k_; ++a) axes[static_cast<size_t>(a)] = a + 2;  // (2, 3, ..., k+1)
  FormValue K0 = FormValue::basis(n_, std::span<const int>(axes.data(), static_cast<size_t>(k_)), chi);
  return contract_form_with_map(K0, inverse_jacobian(t, x));
}

double BlowupSolution::sheared_component_magnitude(double t, double delta) const {
  return alpha_ * std::pow(delta, alpha_ - 1.0) * t;
}

// ---------------------------------------------------------------------------
// Closed-form reference flows

ClosedFormFlow rotation_flow() {
  auto rot = [](double t) {
    Mat r(2, 2);
    r << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    return r;
  };
  return ClosedFormFlow(
      2, [rot](double t, const Vec& x) { return Vec(rot(t) * x); },
      [rot](double t, const Vec&) { return rot(t); },
      [rot](double t, const Vec& x) { return Vec(rot(-t) * x); },
      [rot](double t, const Vec&) { return rot(-t); });
}

VectorField make_rotation_field() {
  return VectorField(
             2, [](double, const Vec& x) { return make_vec({x[1], -x[0]}); },
             [](double, const Vec&) {
               Mat j(2, 2);
               j << 0, 1, -1, 0;
               return j;
             })
      .declare_divergence_free();
}

ClosedFormFlow geometric_flow(const BrownianPath& path) {
  auto wt = [path](double t) {
    int m = static_cast<int>(std::lround(t / path.dt()));
    return path.value(m, 0);
  };
  return ClosedFormFlow(
      1, [wt](double t, const Vec& x) { return Vec(x * std::exp(wt(t))); },
      [wt](double t, const Vec&) {
        Mat j(1, 1);
        j(0, 0) = std::exp(wt(t));
        return j;
      },
      [wt](double t, const Vec& x) { return Vec(x * std::exp(-wt(t))); },
      [wt](double t, const Vec&) {
        Mat j(1, 1);
        j(0, 0) = std::exp(-wt(t));
        return j;
      });
}

VectorField make_linear_field_1d() {
  return VectorField(
      1, [](double, const Vec& x) { return x; },
      [](double, const Vec&) { return Mat(Mat::Identity(1, 1)); });
}

const std::vector<Fixture>& fixture_registry() {
  static const std::vector<Fixture> fixtures = {
      {"nonunique", "Holder drift b_alpha with the explicit flow branches and the"
                    " parametric family of transported solutions"},
      {"blowup", "divergence-free shear drift with the closed-form solution whose"
                 " sup norm inflates instantaneously"},
      {"rotation", "rigid rotation b = (x2, -x1) with closed-form flow"},
      {"geometric", "scalar linear noise dx = x o dW with pathwise closed form"},
  };
  return fixtures;
}

}  // namespace lieflow
