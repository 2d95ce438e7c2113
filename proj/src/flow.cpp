#include "lieflow/flow.hpp"

#include <cmath>
#include <stdexcept>

#include "lieflow/rng.hpp"

namespace lieflow {

BrownianPath BrownianPath::sample(int n_components, double T, int steps, uint64_t seed,
                                  uint64_t index) {
  if (steps < 1) throw std::invalid_argument("BrownianPath: need at least one step");
  if (T <= 0.0) throw std::invalid_argument("BrownianPath: horizon must be positive");
  if (n_components < 0) throw std::invalid_argument("BrownianPath: bad component count");
  BrownianPath p;
  p.components = n_components;
  p.horizon = T;
  p.steps = steps;
  p.seed = seed;
  p.index = index;
  p.dw.resize(static_cast<size_t>(steps) * static_cast<size_t>(std::max(n_components, 1)));
  const double sdt = std::sqrt(T / steps);
  for (int m = 0; m < steps; ++m)
    for (int i = 0; i < n_components; ++i)
      p.dw[static_cast<size_t>(m) * n_components + static_cast<size_t>(i)] =
          sdt * rng::normal(seed, index, static_cast<uint64_t>(m), static_cast<uint64_t>(i));
  return p;
}

BrownianPath BrownianPath::coarsen(int factor) const {
  if (factor < 1 || steps % factor != 0)
    throw std::invalid_argument("BrownianPath::coarsen: factor must divide the step count");
  BrownianPath p;
  p.components = components;
  p.horizon = horizon;
  p.steps = steps / factor;
  p.seed = seed;
  p.index = index;
  p.dw.assign(static_cast<size_t>(p.steps) * std::max(components, 1), 0.0);
  for (int m = 0; m < steps; ++m)
    for (int i = 0; i < components; ++i)
      p.dw[static_cast<size_t>(m / factor) * components + static_cast<size_t>(i)] +=
          increment(m, i);
  return p;
}

double BrownianPath::value(int step, int comp) const {
  double w = 0.0;
  for (int m = 0; m < step; ++m) w += increment(m, comp);
  return w;
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "ito_euler") return Scheme::ito_euler;
  if (s == "strat_heun") return Scheme::strat_heun;
  throw std::invalid_argument("unknown scheme: " + s);
}

std::string scheme_name(Scheme s) {
  return s == Scheme::ito_euler ? "ito_euler" : "strat_heun";
}

namespace {

// Ito-corrected drift b + 1/2 sum_i xi_i . D xi_i (the correction uses the
// analytic Jacobian of xi when present, FD otherwise).
Vec corrected_drift(const VectorField& b, const std::vector<VectorField>& xis, double t,
                    const Vec& x) {
  Vec v = b(t, x);
  for (const VectorField& xi : xis) v += 0.5 * (xi.jacobian(t, x) * xi(t, x));
  return v;
}

}  // namespace

FlowSample integrate_flow(const VectorField& b, const std::vector<VectorField>& xis,
                          const Vec& x0, const BrownianPath& path, Scheme scheme,
                          const FlowOptions& opts) {
  const int n = static_cast<int>(x0.size());
  const int N = static_cast<int>(xis.size());
  if (N > 0 && path.components < N)
    throw std::invalid_argument("integrate_flow: path has fewer components than noise fields");
  const double dt = path.dt();

  FlowSample s;
  s.x0 = x0;
  s.scheme = scheme;
  s.dt = dt;
  const bool hist = opts.store_history;
  s.traj.reserve(hist ? static_cast<size_t>(path.steps + 1) : 2);
  s.traj.push_back(x0);
  Mat J = Mat::Identity(n, n);
  if (opts.track_jacobian) {
    s.jacobians.reserve(hist ? static_cast<size_t>(path.steps + 1) : 2);
    s.jacobians.push_back(J);
    s.logdet.push_back(0.0);
  }

  // FD Jacobian of the corrected drift, used by the ito_euler variational
  // equation (avoids second derivatives of xi).
  auto corrected_drift_jac = [&](double t, const Vec& x) {
    const double h = 1e-5 * (1.0 + x.norm());
    Mat jm(n, n);
    Vec xp = x, xm = x;
    for (int c = 0; c < n; ++c) {
      xp[c] = x[c] + h;
      xm[c] = x[c] - h;
      Vec d = (corrected_drift(b, xis, t, xp) - corrected_drift(b, xis, t, xm)) / (2.0 * h);
      for (int r = 0; r < n; ++r) jm(r, c) = d[r];
      xp[c] = x[c];
      xm[c] = x[c];
    }
    return jm;
  };

  Vec x = x0;
  for (int m = 0; m < path.steps; ++m) {
    const double t = path.time(m);
    const double t1 = path.time(m + 1);
    Vec xnew(n);
    Mat Jnew = J;
    if (scheme == Scheme::ito_euler) {
      Vec drift = corrected_drift(b, xis, t, x);
      xnew = x + dt * drift;
      for (int i = 0; i < N; ++i) xnew += path.increment(m, i) * xis[static_cast<size_t>(i)](t, x);
      if (opts.track_jacobian) {
        Mat A = corrected_drift_jac(t, x);
        Jnew = J + dt * (A * J);
        for (int i = 0; i < N; ++i)
          Jnew += path.increment(m, i) * (xis[static_cast<size_t>(i)].jacobian(t, x) * J);
      }
    } else {
      // Heun predictor-corrector (trapezoidal) on the Stratonovich form.
      Vec pred = x + dt * b(t, x);
      for (int i = 0; i < N; ++i) pred += path.increment(m, i) * xis[static_cast<size_t>(i)](t, x);
      xnew = x + 0.5 * dt * (b(t, x) + b(t1, pred));
      for (int i = 0; i < N; ++i)
        xnew += 0.5 * path.increment(m, i) *
                (xis[static_cast<size_t>(i)](t, x) + xis[static_cast<size_t>(i)](t1, pred));
      if (opts.track_jacobian) {
        Mat Db0 = b.jacobian(t, x);
        Mat Jpred = J + dt * (Db0 * J);
        for (int i = 0; i < N; ++i)
          Jpred += path.increment(m, i) * (xis[static_cast<size_t>(i)].jacobian(t, x) * J);
        Mat Db1 = b.jacobian(t1, pred);
        Jnew = J + 0.5 * dt * (Db0 * J + Db1 * Jpred);
        for (int i = 0; i < N; ++i)
          Jnew += 0.5 * path.increment(m, i) *
                  (xis[static_cast<size_t>(i)].jacobian(t, x) * J +
                   xis[static_cast<size_t>(i)].jacobian(t1, pred) * Jpred);
      }
    }
    x = xnew;
    if (opts.track_jacobian) {
      J = Jnew;
      double det = J.determinant();
      if (!(det > 0.0)) {
        // Orientation lost: the step size failed this sample.
        s.aborted = true;
        s.fail_step = m + 1;
        break;
      }
      if (hist) {
        s.jacobians.push_back(J);
        s.logdet.push_back(std::log(det));
      }
    }
    if (opts.safety_box && !opts.safety_box->contains(x)) {
      s.divergent = true;
      s.fail_step = m + 1;
      break;
    }
    if (hist) s.traj.push_back(x);
  }
  if (!hist) {
    s.traj.push_back(x);
    if (opts.track_jacobian) {
      s.jacobians.push_back(J);
      double det = J.determinant();
      s.logdet.push_back(det > 0.0 ? std::log(det) : std::nan(""));
    }
  }
  return s;
}

Vec inverse_flow(const VectorField& b, const std::vector<VectorField>& xis, const Vec& y,
                 double t, const BrownianPath& path, Scheme scheme) {
  const double dt = path.dt();
  const int m_end = static_cast<int>(std::lround(t / dt));
  if (std::abs(m_end * dt - t) > 1e-9 * std::max(1.0, t) || m_end < 0 || m_end > path.steps)
    throw std::invalid_argument("inverse_flow: t must be a node of the path grid");
  const int N = static_cast<int>(xis.size());
  Vec z = y;
  // Backward SDE with negated coefficients over the reversed increments.
  for (int m = m_end - 1; m >= 0; --m) {
    const double t0 = path.time(m + 1);
    const double t1 = path.time(m);
    if (scheme == Scheme::ito_euler) {
      // Ito form of the reversed Stratonovich SDE: drift -b + 1/2 sum xi.Dxi.
      Vec drift = -b(t0, z);
      for (int i = 0; i < N; ++i)
        drift += 0.5 * (xis[static_cast<size_t>(i)].jacobian(t0, z) *
                        xis[static_cast<size_t>(i)](t0, z));
      Vec znew = z + dt * drift;
      for (int i = 0; i < N; ++i)
        znew -= path.increment(m, i) * xis[static_cast<size_t>(i)](t0, z);
      z = znew;
    } else {
      Vec pred = z - dt * b(t0, z);
      for (int i = 0; i < N; ++i) pred -= path.increment(m, i) * xis[static_cast<size_t>(i)](t0, z);
      Vec znew = z - 0.5 * dt * (b(t0, z) + b(t1, pred));
      for (int i = 0; i < N; ++i)
        znew -= 0.5 * path.increment(m, i) *
                (xis[static_cast<size_t>(i)](t0, z) + xis[static_cast<size_t>(i)](t1, pred));
      z = znew;
    }
  }
  return z;
}

FlowEnsemble integrate_ensemble(const VectorField& b, const std::vector<VectorField>& xis,
                                const std::vector<Vec>& points, int n_components, double T,
                                int steps, uint64_t seed, int n_paths, Scheme scheme,
                                const FlowOptions& opts) {
  FlowEnsemble e;
  e.scheme = scheme;
  e.n_components = n_components;
  e.horizon = T;
  e.steps = steps;
  e.seed = seed;
  for (int p = 0; p < n_paths; ++p) {
    BrownianPath path = BrownianPath::sample(n_components, T, steps, seed,
                                             static_cast<uint64_t>(p));
    for (int q = 0; q < static_cast<int>(points.size()); ++q) {
      FlowSample s = integrate_flow(b, xis, points[static_cast<size_t>(q)], path, scheme, opts);
      if (s.divergent) ++e.excluded_divergent;
      e.path_indices.push_back(static_cast<uint64_t>(p));
      e.point_indices.push_back(q);
      e.samples.push_back(std::move(s));
    }
  }
  return e;
}

VolumeReport volume_report(const FlowEnsemble& e, const VectorField& b,
                           const std::vector<VectorField>& xis) {
  VolumeReport r;
  const double dt = e.dt();
  for (size_t si = 0; si < e.samples.size(); ++si) {
    const FlowSample& s = e.samples[si];
    double worst = 0.0;
    for (double ld : s.logdet) worst = std::max(worst, std::abs(std::exp(ld) - 1.0));
    r.max_abs_jdet_minus_one.push_back(worst);

    if (s.traj.size() < 2 || s.logdet.size() != s.traj.size()) {
      r.logdet_mismatch.push_back(std::nan(""));
      continue;
    }
    BrownianPath path = BrownianPath::sample(e.n_components, e.horizon, e.steps, e.seed,
                                             e.path_indices[si]);
    double acc = 0.0;
    for (size_t m = 0; m + 1 < s.traj.size(); ++m) {
      double t = path.time(static_cast<int>(m));
      double t1 = path.time(static_cast<int>(m) + 1);
      acc += dt * b.divergence(t, s.traj[m]);
      for (int i = 0; i < static_cast<int>(xis.size()); ++i)
        acc += 0.5 * path.increment(static_cast<int>(m), i) *
               (xis[static_cast<size_t>(i)].divergence(t, s.traj[m]) +
                xis[static_cast<size_t>(i)].divergence(t1, s.traj[m + 1]));
    }
    r.logdet_mismatch.push_back(std::abs(s.logdet.back() - acc));
  }
  return r;
}

}  // namespace lieflow
