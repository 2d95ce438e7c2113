#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lieflow/forms.hpp"

namespace lieflow {

/// Fixed-capacity dynamic vectors/matrices (no heap traffic for n <= 8).
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

Vec make_vec(std::initializer_list<double> v);

/// Time-dependent velocity field with optional analytic Jacobian. When the
/// Jacobian closure is absent, central finite differences with step
/// fd_step()*(1+|x|) are used.
class VectorField {
 public:
  using EvalFn = std::function<Vec(double, const Vec&)>;
  using JacFn = std::function<Mat(double, const Vec&)>;

  VectorField() = default;
  VectorField(int n, EvalFn eval);
  VectorField(int n, EvalFn eval, JacFn jac);

  static VectorField zero(int n);
  static VectorField constant(const Vec& v);

  int n() const { return n_; }
  Vec operator()(double t, const Vec& x) const { return eval_(t, x); }
  Mat jacobian(double t, const Vec& x) const;
  double divergence(double t, const Vec& x) const;
  bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }

  VectorField& set_fd_step(double h) { fd_step_ = h; return *this; }
  double fd_step() const { return fd_step_; }

  VectorField& declare_divergence_free(bool f = true) { divergence_free_ = f; return *this; }
  bool divergence_free() const { return divergence_free_; }
  /// Samples trace(jacobian) at the given points; returns the max |div|.
  double verify_divergence_free(double t, const std::vector<Vec>& pts) const;

  VectorField& declare_time_dependent(bool f = true) { time_dependent_ = f; return *this; }
  bool time_dependent() const { return time_dependent_; }

  /// Field with negated values (and Jacobian); used by backward integration.
  VectorField negated() const;

 private:
  int n_ = 0;
  EvalFn eval_;
  JacFn jac_;
  double fd_step_ = 1e-4;
  bool divergence_free_ = false;
  bool time_dependent_ = false;
};

struct GridBox {
  Vec lo, hi;
  int n() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& x) const;
  Vec widths() const { return hi - lo; }
};

/// Grid-sampled k-form field: values at cell centers of a uniform axis-aligned
/// lattice, multilinear interpolation between centers, one or more time
/// slices. Channel order is the lexicographic multi-index order; node order is
/// row-major over axes (axis 0 slowest).
class GridKForm {
 public:
  GridKForm() = default;
  GridKForm(int n, int k, GridBox box, std::array<int, kMaxDim> res);

  int n() const { return n_; }
  int k() const { return k_; }
  int channels() const { return channels_; }
  const GridBox& box() const { return box_; }
  const std::array<int, kMaxDim>& resolution() const { return res_; }
  long nodes() const { return nodes_; }
  double cell_width(int axis) const { return cell_[static_cast<size_t>(axis)]; }
  double min_cell_width() const;

  Vec node_point(long flat) const;
  long flat_index(const std::array<int, kMaxDim>& idx) const;

  /// Adds a slice at the given time; data layout is channel-major
  /// (channel*nodes + node).
  void add_slice(double time, std::vector<double> data);
  int slice_count() const { return static_cast<int>(times_.size()); }
  double slice_time(int s) const { return times_[static_cast<size_t>(s)]; }
  const std::vector<double>& slice(int s) const { return data_[static_cast<size_t>(s)]; }
  std::vector<double>& slice(int s) { return data_[static_cast<size_t>(s)]; }
  int nearest_slice(double t) const;

  FormValue eval(double t, const Vec& x) const;

  void save(const std::string& path) const;
  static GridKForm load(const std::string& path);

 private:
  int n_ = 0, k_ = 0, channels_ = 0;
  GridBox box_;
  std::array<int, kMaxDim> res_{};
  std::array<double, kMaxDim> cell_{};
  long nodes_ = 0;
  std::vector<double> times_;
  std::vector<std::vector<double>> data_;
};

/// A k-form field over space-time: either an analytic closure (with optional
/// per-axis coefficient-derivative closure) or a grid sample.
class KFormField {
 public:
  using EvalFn = std::function<FormValue(double, const Vec&)>;
  using DerivFn = std::function<FormValue(double, const Vec&, int /*axis 1..n*/)>;

  KFormField() = default;

  static KFormField analytic(int n, int k, EvalFn eval);
  static KFormField analytic(int n, int k, EvalFn eval, DerivFn deriv);
  static KFormField grid(GridKForm g);
  static KFormField zero(int n, int k);

  int n() const { return n_; }
  int k() const { return k_; }

  FormValue operator()(double t, const Vec& x) const;
  /// Coefficientwise spatial derivative along axis (1-based): analytic closure
  /// when present, central finite differences otherwise.
  FormValue derivative(double t, const Vec& x, int axis) const;
  bool has_analytic_derivative() const { return static_cast<bool>(deriv_); }

  bool is_grid() const { return static_cast<bool>(grid_); }
  const GridKForm& grid_data() const;

  double fd_step(const Vec& x) const;

 private:
  int n_ = 0, k_ = 0;
  EvalFn eval_;
  DerivFn deriv_;
  std::shared_ptr<const GridKForm> grid_;
};

/// Central difference (F(x+h e) - F(x-h e)) / (2h) on the coefficients.
/// Grid fields use h = cell width and reject near-boundary points.
FormValue fd_derivative(const KFormField& f, double t, const Vec& x, int axis);

/// Midpoint tensor-product quadrature over an axis-aligned box, with an
/// optional excluded ball around a singular point and an optional restriction
/// to a ball (nodes outside it are skipped).
class QuadratureGrid {
 public:
  QuadratureGrid() = default;
  QuadratureGrid(GridBox box, std::array<int, kMaxDim> nodes_per_axis);

  int n() const { return box_.n(); }
  const GridBox& box() const { return box_; }
  long node_count() const { return count_; }
  double cell_volume() const { return cellvol_; }
  double cell_width(int axis) const { return cell_[static_cast<size_t>(axis)]; }
  double min_cell_width() const;

  QuadratureGrid& exclude_ball(const Vec& center, double radius);
  QuadratureGrid& clear_excluded_ball();
  QuadratureGrid& restrict_to_ball(const Vec& center, double radius);

  Vec node(long flat) const;
  bool active(const Vec& x) const;

  /// Calls f(x, weight) on every active node, in fixed flat-index order.
  template <class F>
  void for_each_node(F&& f) const {
    for (long i = 0; i < count_; ++i) {
      Vec x = node(i);
      if (active(x)) f(x, cellvol_);
    }
  }

 private:
  GridBox box_;
  std::array<int, kMaxDim> nodes_{};
  std::array<double, kMaxDim> cell_{};
  long count_ = 0;
  double cellvol_ = 0.0;
  std::optional<std::pair<Vec, double>> excluded_;
  std::optional<std::pair<Vec, double>> include_;
};

/// Midpoint approximation of the L2 pairing of two k-form fields at time t.
double l2_inner(const KFormField& a, const KFormField& b, const QuadratureGrid& grid, double t);

/// (sum |A(x)|^p cellvol)^(1/p); p >= 1.
double lp_norm(const KFormField& a, double p, const QuadratureGrid& grid, double t);

/// Grid Sobolev W^{1,q} norm of a vector field: ||b||_q + ||Db||_q with the
/// Jacobian from the field (analytic or FD).
double w1q_norm(const VectorField& b, double q, const QuadratureGrid& grid, double t);

/// Min/max over the sample set and probe directions (canonical basis plus
/// random unit vectors) of sum_r (xi_r . v)^2, the discretized uniform
/// parabolicity bracket. The caller asserts c_hat > 0.
std::pair<double, double> check_parabolicity(const std::vector<VectorField>& xis,
                                             const std::vector<Vec>& points,
                                             const std::vector<double>& times,
                                             int random_dirs = 512, uint64_t seed = 0);

/// Finite-sample Holder quotient sup |f(x)-f(y)| / |x-y|^alpha over random
/// pairs drawn from the box (heuristic diagnostic).
double holder_quotient_estimate(const VectorField& f, double alpha, const GridBox& box,
                                int pairs, uint64_t seed);

/// Smooth compactly supported test k-form: bump profile
/// exp(1 - 1/(1 - |x/R|^2)) on |x| < R times per-channel polynomials, with
/// analytic coefficient derivatives.
class TestForm {
 public:
  /// Per-channel polynomial: value and gradient closures.
  struct Channel {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
  };

  TestForm(int n, int k, double radius, std::vector<Channel> channels);

  /// Single active channel with constant polynomial 1.
  static TestForm bump(int n, int k, double radius, int channel = 0);
  /// Randomized quadratic-polynomial channels, sup-normalized to about 1.
  static TestForm random(int n, int k, uint64_t seed, uint64_t tag,
                         double min_radius, double max_radius);

  int n() const { return n_; }
  int k() const { return k_; }
  double radius() const { return radius_; }
  const KFormField& field() const { return field_; }
  operator const KFormField&() const { return field_; }

  FormValue operator()(double t, const Vec& x) const { return field_(t, x); }

  /// Max bundle norm over a sample lattice (used as ||Theta||_inf).
  double sup_norm_estimate(int samples_per_axis = 33) const;

 private:
  int n_, k_;
  double radius_;
  KFormField field_;
};

/// Samples an analytic field onto a grid (single slice at time t).
GridKForm sample_to_grid(const KFormField& f, const GridBox& box,
                         const std::array<int, kMaxDim>& res, double t);

}  // namespace lieflow
