#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lieflow/fields.hpp"

namespace lieflow {

/// Discretized multi-component Wiener path on a uniform grid over [0,T].
/// Increments are a pure function of (seed, index, step, component), so
/// regeneration is bit-identical.
struct BrownianPath {
  int components = 0;
  double horizon = 0.0;
  int steps = 0;
  uint64_t seed = 0;
  uint64_t index = 0;
  std::vector<double> dw;  // layout step*components + component

  static BrownianPath sample(int n_components, double T, int steps, uint64_t seed,
                             uint64_t index);

  double dt() const { return horizon / steps; }
  double increment(int step, int comp) const {
    return dw[static_cast<size_t>(step) * components + static_cast<size_t>(comp)];
  }
  double time(int step) const { return dt() * step; }

  /// Path with increments summed pairwise in groups of `factor`: the same
  /// underlying Brownian path viewed on a coarser grid (steps must divide).
  BrownianPath coarsen(int factor) const;

  /// Value W^comp at a grid node (prefix sum of increments).
  double value(int step, int comp) const;
};

enum class Scheme { ito_euler, strat_heun };

Scheme scheme_from_string(const std::string& s);
std::string scheme_name(Scheme s);

struct FlowOptions {
  bool store_history = true;
  bool track_jacobian = true;
  std::optional<GridBox> safety_box;
};

/// Per-initial-point trajectory with Jacobian matrix and log-determinant
/// history. x_0 = x, J_0 = I; a nonpositive Jacobian determinant aborts the
/// sample (step-size failure), a safety-box exit flags it divergent.
struct FlowSample {
  Vec x0;
  Scheme scheme = Scheme::strat_heun;
  double dt = 0.0;
  std::vector<Vec> traj;      // full history, or {x0, x_end} when not stored
  std::vector<Mat> jacobians; // aligned with traj when tracked
  std::vector<double> logdet;
  bool divergent = false;
  bool aborted = false;
  int fail_step = -1;

  const Vec& terminal() const { return traj.back(); }
  const Mat& terminal_jacobian() const { return jacobians.back(); }
  bool ok() const { return !divergent && !aborted; }
};

/// Integrates the characteristic SDE dx = b dt + sum_i xi_i o dW^i along the
/// given path. Scheme ito_euler applies Euler-Maruyama to the Ito form with
/// drift b + 1/2 sum_i xi_i . D xi_i; strat_heun is the predictor-corrector
/// (trapezoidal) scheme on the Stratonovich form. The Jacobian is propagated
/// through the variational equation with the same scheme and increments.
FlowSample integrate_flow(const VectorField& b, const std::vector<VectorField>& xis,
                          const Vec& x0, const BrownianPath& path, Scheme scheme,
                          const FlowOptions& opts = {});

/// Solves the backward SDE with negated coefficients over the reversed
/// increments of the same path, recovering psi_t(y) = phi_t^{-1}(y). t must
/// be a node of the path grid.
Vec inverse_flow(const VectorField& b, const std::vector<VectorField>& xis, const Vec& y,
                 double t, const BrownianPath& path, Scheme scheme);

/// Shared-coefficient Monte-Carlo carrier; samples ordered by
/// (path index, point index).
struct FlowEnsemble {
  Scheme scheme = Scheme::strat_heun;
  int n_components = 0;
  double horizon = 0.0;
  int steps = 0;
  uint64_t seed = 0;
  std::vector<uint64_t> path_indices;  // per sample
  std::vector<int> point_indices;      // per sample
  std::vector<FlowSample> samples;
  int excluded_divergent = 0;

  double dt() const { return horizon / steps; }
};

FlowEnsemble integrate_ensemble(const VectorField& b, const std::vector<VectorField>& xis,
                                const std::vector<Vec>& points, int n_components, double T,
                                int steps, uint64_t seed, int n_paths, Scheme scheme,
                                const FlowOptions& opts = {});

/// Volume diagnostics: per-sample max |det J - 1| over the history, and the
/// mismatch between log det J_T and the flow integral of the divergence
/// (left-point time integral of div b along the path plus the
/// Stratonovich-midpoint sum of div xi_i against the increments).
struct VolumeReport {
  std::vector<double> max_abs_jdet_minus_one;
  std::vector<double> logdet_mismatch;
};

VolumeReport volume_report(const FlowEnsemble& ensemble, const VectorField& b,
                           const std::vector<VectorField>& xis);

}  // namespace lieflow
