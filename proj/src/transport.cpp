#include "lieflow/transport.hpp"

#include <cmath>
#include <stdexcept>

#include "lieflow/lie_ops.hpp"

namespace lieflow {

FormValue contract_form_with_map(const FormValue& v, const Mat& dmap) {
  const int n = v.n(), k = v.k();
  FormValue out(n, k);
  if (k == 0) {
    out[0] = v[0];
    return out;
  }
  const auto& set = MultiIndexSet::get(n, k);
  Mat minor_m(k, k);
  for (int jp = 0; jp < set.size(); ++jp) {
    const MultiIndex& J = set[jp];
    double acc = 0.0;
    for (int ip = 0; ip < set.size(); ++ip) {
      const double vi = v[ip];
      if (vi == 0.0) continue;
      const MultiIndex& I = set[ip];
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) minor_m(r, c) = dmap(I.axis(r) - 1, J.axis(c) - 1);
      acc += vi * minor_m.determinant();
    }
    out[jp] = acc;
  }
  return out;
}

std::pair<Vec, Mat> FlowContext::forward_with_jacobian(double t, const Vec& x) const {
  return {forward(t, x), forward_jacobian(t, x)};
}

ClosedFormFlow::ClosedFormFlow(int n, MapFn phi, JacFn dphi, MapFn psi)
    : n_(n), phi_(std::move(phi)), psi_(std::move(psi)), dphi_(std::move(dphi)) {}

ClosedFormFlow::ClosedFormFlow(int n, MapFn phi, JacFn dphi, MapFn psi, JacFn dpsi)
    : n_(n), phi_(std::move(phi)), psi_(std::move(psi)), dphi_(std::move(dphi)),
      dpsi_(std::move(dpsi)) {}

std::pair<Vec, Mat> ClosedFormFlow::preimage(double t, const Vec& x) const {
  Vec y = psi_(t, x);
  if (dpsi_) return {y, dpsi_(t, x)};
  Mat dphi = dphi_(t, y);
  return {y, Mat(dphi.inverse())};
}

SampledFlow::SampledFlow(VectorField b, std::vector<VectorField> xis, BrownianPath path,
                         Scheme scheme)
    : n_(b.n()), b_(std::move(b)), xis_(std::move(xis)), path_(std::move(path)),
      scheme_(scheme) {}

int SampledFlow::step_of(double t) const {
  int m = static_cast<int>(std::lround(t / path_.dt()));
  if (std::abs(m * path_.dt() - t) > 1e-9 * std::max(1.0, std::abs(t)) || m < 0 ||
      m > path_.steps)
    throw std::invalid_argument("SampledFlow: t must be a node of the path grid");
  return m;
}

Vec SampledFlow::forward(double t, const Vec& x) const {
  return forward_with_jacobian(t, x).first;
}

Mat SampledFlow::forward_jacobian(double t, const Vec& x) const {
  return forward_with_jacobian(t, x).second;
}

std::pair<Vec, Mat> SampledFlow::forward_with_jacobian(double t, const Vec& x) const {
  const int m = step_of(t);
  BrownianPath truncated = path_;
  truncated.steps = m;
  truncated.horizon = m * path_.dt();
  truncated.dw.resize(static_cast<size_t>(m) * std::max(path_.components, 1));
  if (m == 0) return {x, Mat(Mat::Identity(n_, n_))};
  FlowOptions opts;
  opts.store_history = false;
  FlowSample s = integrate_flow(b_, xis_, x, truncated, scheme_, opts);
  return {s.terminal(), s.terminal_jacobian()};
}

std::pair<Vec, Mat> SampledFlow::preimage(double t, const Vec& x) const {
  Vec y = inverse_flow(b_, xis_, x, t, path_, scheme_);
  Mat dphi = forward_with_jacobian(t, y).second;
  return {y, Mat(dphi.inverse())};
}

FormValue pushforward_form(const KFormField& K0, const FlowContext& flow, double t,
                           const Vec& x) {
  auto [y, dpsi] = flow.preimage(t, x);
  return contract_form_with_map(K0(0.0, y), dpsi);
}

FormValue pullback_form(const KFormField& K, const FlowContext& flow, double t, const Vec& x) {
  auto [y, dphi] = flow.forward_with_jacobian(t, x);
  return contract_form_with_map(K(t, y), dphi);
}

Vec SubmanifoldChart::tangent_at(const Vec& u, int a) const {
  if (tangent) return tangent(u, a);
  const double h = 1e-6;
  Vec up = u, um = u;
  up[a] += h;
  um[a] -= h;
  return Vec((sigma(up) - sigma(um)) / (2.0 * h));
}

void SubmanifoldChart::for_each_node(const std::function<void(const Vec&, double)>& f) const {
  long count = 1;
  for (int a = 0; a < k; ++a) count *= nodes[static_cast<size_t>(a)];
  double w = 1.0;
  for (int a = 0; a < k; ++a) w /= nodes[static_cast<size_t>(a)];
  for (long flat = 0; flat < count; ++flat) {
    long rem = flat;
    Vec u(k);
    for (int a = k - 1; a >= 0; --a) {
      long i = rem % nodes[static_cast<size_t>(a)];
      rem /= nodes[static_cast<size_t>(a)];
      u[a] = (static_cast<double>(i) + 0.5) / nodes[static_cast<size_t>(a)];
    }
    f(u, w);
  }
}

namespace {

MultiVectorValue wedge_of_columns(const Mat& tmat, int n, int k) {
  MultiVectorValue u(n, k);
  if (k == 0) {
    u[0] = 1.0;  // 0-chart: evaluation at a point
    return u;
  }
  const auto& set = MultiIndexSet::get(n, k);
  Mat minor_m(k, k);
  for (int pos = 0; pos < set.size(); ++pos) {
    const MultiIndex& I = set[pos];
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) minor_m(r, c) = tmat(I.axis(r) - 1, c);
    u[pos] = minor_m.determinant();
  }
  return u;
}

}  // namespace

double integrate_over_chart(const KFormField& K, const SubmanifoldChart& chart, double t) {
  if (K.n() != chart.n || K.k() != chart.k)
    throw std::invalid_argument("integrate_over_chart: degree/dimension mismatch");
  double acc = 0.0;
  chart.for_each_node([&](const Vec& u, double w) {
    Mat tmat(chart.n, chart.k);
    for (int a = 0; a < chart.k; ++a) tmat.col(a) = chart.tangent_at(u, a);
    if (chart.k > 0) {
      Mat gram = tmat.transpose() * tmat;
      if (gram.determinant() < 1e-18)
        throw std::domain_error("integrate_over_chart: degenerate tangents at a quadrature node");
    }
    MultiVectorValue uvec = wedge_of_columns(tmat, chart.n, chart.k);
    acc += w * pairing(uvec, K(t, chart.sigma(u)));
  });
  return acc;
}

ConservationResult conservation_check(const KFormField& K0, const VectorField& b,
                                      const std::vector<VectorField>& xis,
                                      const SubmanifoldChart& chart, const BrownianPath& path,
                                      double T, Scheme scheme) {
  ConservationResult out;
  out.initial = integrate_over_chart(K0, chart, 0.0);
  SampledFlow flow(b, xis, path, scheme);
  double acc = 0.0;
  chart.for_each_node([&](const Vec& u, double w) {
    Vec x0 = chart.sigma(u);
    auto [y, dphi] = flow.forward_with_jacobian(T, x0);
    Mat tmat(chart.n, chart.k);
    for (int a = 0; a < chart.k; ++a) tmat.col(a) = dphi * chart.tangent_at(u, a);
    MultiVectorValue uvec = wedge_of_columns(tmat, chart.n, chart.k);
    FormValue kt = pushforward_form(K0, flow, T, y);
    acc += w * pairing(uvec, kt);
  });
  out.transported = acc;
  out.drift = std::abs(out.transported - out.initial);
  return out;
}

WeakResidualReport weak_residual(const SolutionSeries& series, const VectorField& b,
                                 const std::vector<VectorField>& xis,
                                 const std::vector<TestForm>& forms, const BrownianPath& path,
                                 const QuadratureGrid& grid) {
  const int n = series.n, k = series.k;
  const int F = static_cast<int>(forms.size());
  const int N = static_cast<int>(xis.size());
  if (N > 0 && path.components < N)
    throw std::invalid_argument("weak_residual: path/noise component mismatch");
  for (const TestForm& f : forms) {
    if (f.n() != n || f.k() != k)
      throw std::invalid_argument("weak_residual: test form degree mismatch");
    for (int a = 0; a < n; ++a)
      if (grid.box().lo[a] > -f.radius() || grid.box().hi[a] < f.radius())
        throw std::domain_error("weak_residual: test form support escapes grid box");
  }
  if (b.time_dependent())
    throw std::invalid_argument("weak_residual: time-dependent coefficients not supported");

  double maxR = 0.0;
  for (const TestForm& f : forms) maxR = std::max(maxR, f.radius());

  // Cache the t-independent adjoint data per active node:
  // [theta, L*_b theta, (L*_xi theta, L*_xi L*_xi theta) per noise component].
  const int nch = static_cast<int>(binomial(n, k));
  std::vector<Vec> pts;
  std::vector<double> cache;
  grid.for_each_node([&](const Vec& x, double) {
    if (x.norm() >= maxR) return;
    pts.push_back(x);
    for (int f = 0; f < F; ++f) {
      const KFormField& th = forms[static_cast<size_t>(f)].field();
      FormValue tv = th(0.0, x);
      FormValue lb = adjoint_lie(b, th, 0.0, x);
      for (int c = 0; c < nch; ++c) cache.push_back(tv[c]);
      for (int c = 0; c < nch; ++c) cache.push_back(lb[c]);
      for (int i = 0; i < N; ++i) {
        FormValue lx = adjoint_lie(xis[static_cast<size_t>(i)], th, 0.0, x);
        FormValue lxx = adjoint_lie_squared(xis[static_cast<size_t>(i)], th, 0.0, x);
        for (int c = 0; c < nch; ++c) cache.push_back(lx[c]);
        for (int c = 0; c < nch; ++c) cache.push_back(lxx[c]);
      }
    }
  });

  const double w = grid.cell_volume();
  const int M = path.steps;
  WeakResidualReport rep;
  rep.residuals.assign(static_cast<size_t>(F), {});
  // a(t) and the three pairing integrands per node, per form.
  std::vector<double> a0(static_cast<size_t>(F), 0.0);
  std::vector<double> run_ds(static_cast<size_t>(F), 0.0);   // drift + Ito-correction sums
  std::vector<double> run_dw(static_cast<size_t>(F), 0.0);   // martingale sums
  std::vector<double> prev_cb(static_cast<size_t>(F), 0.0);
  std::vector<double> prev_cx(static_cast<size_t>(F) * std::max(N, 1), 0.0);
  std::vector<double> prev_cxx(static_cast<size_t>(F) * std::max(N, 1), 0.0);

  for (int m = 0; m <= M; ++m) {
    const double t = path.time(m);
    std::vector<double> at(static_cast<size_t>(F), 0.0);
    std::vector<double> cb(static_cast<size_t>(F), 0.0);
    std::vector<double> cx(static_cast<size_t>(F) * std::max(N, 1), 0.0);
    std::vector<double> cxx(static_cast<size_t>(F) * std::max(N, 1), 0.0);
    const double* cp = cache.data();
    for (size_t p = 0; p < pts.size(); ++p) {
      FormValue kv = series.eval(t, pts[p]);
      for (int f = 0; f < F; ++f) {
        double sa = 0.0, sb = 0.0;
        for (int c = 0; c < nch; ++c) sa += kv[c] * cp[c];
        cp += nch;
        for (int c = 0; c < nch; ++c) sb += kv[c] * cp[c];
        cp += nch;
        at[static_cast<size_t>(f)] += sa;
        cb[static_cast<size_t>(f)] += sb;
        for (int i = 0; i < N; ++i) {
          double sx = 0.0, sxx = 0.0;
          for (int c = 0; c < nch; ++c) sx += kv[c] * cp[c];
          cp += nch;
          for (int c = 0; c < nch; ++c) sxx += kv[c] * cp[c];
          cp += nch;
          cx[static_cast<size_t>(f * std::max(N, 1) + i)] += sx;
          cxx[static_cast<size_t>(f * std::max(N, 1) + i)] += sxx;
        }
      }
    }
    for (int f = 0; f < F; ++f) {
      at[static_cast<size_t>(f)] *= w;
      cb[static_cast<size_t>(f)] *= w;
    }
    for (size_t i = 0; i < cx.size(); ++i) {
      cx[i] *= w;
      cxx[i] *= w;
    }
    if (m == 0) {
      a0 = at;
      rep.times.push_back(t);
      for (int f = 0; f < F; ++f) rep.residuals[static_cast<size_t>(f)].push_back(0.0);
    } else {
      // Left-endpoint sums use the previous node's pairings.
      const double dt = path.dt();
      for (int f = 0; f < F; ++f) {
        run_ds[static_cast<size_t>(f)] += prev_cb[static_cast<size_t>(f)] * dt;
        for (int i = 0; i < N; ++i) {
          run_dw[static_cast<size_t>(f)] +=
              prev_cx[static_cast<size_t>(f * std::max(N, 1) + i)] * path.increment(m - 1, i);
          run_ds[static_cast<size_t>(f)] -=
              0.5 * prev_cxx[static_cast<size_t>(f * std::max(N, 1) + i)] * dt;
        }
        double r = at[static_cast<size_t>(f)] - a0[static_cast<size_t>(f)] +
                   run_ds[static_cast<size_t>(f)] + run_dw[static_cast<size_t>(f)];
        rep.residuals[static_cast<size_t>(f)].push_back(r);
      }
      rep.times.push_back(t);
    }
    prev_cb = cb;
    prev_cx = cx;
    prev_cxx = cxx;
  }
  for (int f = 0; f < F; ++f) {
    double mx = 0.0;
    for (double r : rep.residuals[static_cast<size_t>(f)]) mx = std::max(mx, std::abs(r));
    rep.max_residual.push_back(mx);
  }
  return rep;
}

std::pair<double, double> scalar_pushforward_mean(
    const std::function<double(const Vec&)>& u0, const VectorField& b,
    const std::vector<VectorField>& xis, const Vec& x, double t, int steps, uint64_t seed,
    uint64_t first_path, int count, Scheme scheme) {
  if (count < 1) throw std::invalid_argument("scalar_pushforward_mean: empty path set");
  double s1 = 0.0, s2 = 0.0;
  for (int p = 0; p < count; ++p) {
    BrownianPath path = BrownianPath::sample(static_cast<int>(xis.size()), t, steps, seed,
                                             first_path + static_cast<uint64_t>(p));
    Vec z = inverse_flow(b, xis, x, t, path, scheme);
    double u = u0(z);
    s1 += u;
    s2 += u * u;
  }
  double mean = s1 / count;
  double var = std::max(0.0, s2 / count - mean * mean);
  double stderr_v = std::sqrt(var / count);
  return {mean, stderr_v};
}

double kiw_residual(const KiwFixture& fx, const BrownianPath& path,
                    const std::vector<Vec>& points) {
  const int n = fx.K0.n(), k = fx.K0.k();
  // Linearity in K: the Lie terms split over the three building blocks.
  KFormField LbK0 = lie_derivative_field(fx.b, fx.K0);
  KFormField LbG = lie_derivative_field(fx.b, fx.G);
  KFormField LbH = lie_derivative_field(fx.b, fx.H);
  KFormField LxK0 = lie_derivative_field(fx.xi, fx.K0);
  KFormField LxG = lie_derivative_field(fx.xi, fx.G);
  KFormField LxH = lie_derivative_field(fx.xi, fx.H);
  KFormField LxxK0 = lie_derivative_field(fx.xi, LxK0);
  KFormField LxxG = lie_derivative_field(fx.xi, LxG);
  KFormField LxxH = lie_derivative_field(fx.xi, LxH);

  const double dt = path.dt();
  double worst = 0.0;
  for (const Vec& x : points) {
    FlowSample s = integrate_flow(fx.b, {fx.xi}, x, path, Scheme::strat_heun, {});
    if (!s.ok()) throw std::runtime_error("kiw_residual: flow sample failed");
    FormValue rhs = fx.K0(0.0, x);
    double W = 0.0;
    for (int m = 0; m < path.steps; ++m) {
      const double t = path.time(m);
      const Vec& y = s.traj[static_cast<size_t>(m)];
      const Mat& J = s.jacobians[static_cast<size_t>(m)];
      const double dW = path.increment(m, 0);
      // ds terms: G + L_b K(t) + 1/2 L_xi L_xi K(t) + L_xi H (d[W,B] = dt).
      FormValue a = fx.G(0.0, y);
      a += LbK0(0.0, y) + t * LbG(0.0, y) + W * LbH(0.0, y);
      FormValue lxx = LxxK0(0.0, y) + t * LxxG(0.0, y) + W * LxxH(0.0, y);
      a += 0.5 * lxx;
      a += LxH(0.0, y);
      rhs += dt * contract_form_with_map(a, J);
      // dW terms: H + L_xi K(t) (B = W).
      FormValue bterm = fx.H(0.0, y);
      bterm += LxK0(0.0, y) + t * LxG(0.0, y) + W * LxH(0.0, y);
      rhs += dW * contract_form_with_map(bterm, J);
      W += dW;
    }
    const Vec& yT = s.traj.back();
    FormValue kT(n, k);
    kT += fx.K0(0.0, yT);
    kT += path.horizon * fx.G(0.0, yT);
    kT += W * fx.H(0.0, yT);
    FormValue lhs = contract_form_with_map(kT, s.jacobians.back());
    worst = std::max(worst, bundle_norm(lhs - rhs));
  }
  return worst;
}

}  // namespace lieflow
