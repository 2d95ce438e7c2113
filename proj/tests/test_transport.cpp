#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lieflow/counterexamples.hpp"
#include "lieflow/lie_ops.hpp"
#include "lieflow/transport.hpp"
#include "oracles.hpp"

using namespace lieflow;

namespace {
GridBox cube(int n, double half) {
  GridBox b;
  b.lo = Vec::Constant(n, -half);
  b.hi = Vec::Constant(n, half);
  return b;
}
}  // namespace

TEST_CASE("form contraction with a map matches the all-tuples oracle") {
  for (int c = 0; c < 40; ++c) {
    uint64_t tag = 0xCC + static_cast<uint64_t>(c);
    int n = 2 + static_cast<int>(rng::uniform(13, tag, 0, 0) * 2.0);  // 2..3
    int k = static_cast<int>(rng::uniform(13, tag, 0, 1) * (n + 1));
    FormValue v = oracle::random_form(n, k, 13, tag);
    Mat m(n, n);
    for (int r = 0; r < n; ++r)
      for (int cc = 0; cc < n; ++cc)
        m(r, cc) = rng::uniform_in(-1, 1, 13, tag, 2, static_cast<uint64_t>(r * n + cc));
    CHECK(bundle_norm(contract_form_with_map(v, m) - oracle::contract_all_tuples(v, m)) < 1e-12);
  }
}

TEST_CASE("degree specialization of the contraction: k=0 and k=n") {
  Mat m(2, 2);
  m << 1.5, 0.3, -0.2, 0.8;
  FormValue s(2, 0);
  s[0] = 3.0;
  CHECK(contract_form_with_map(s, m)[0] == 3.0);  // no Jacobian factor
  FormValue d(2, 2);
  d[0] = 2.0;
  CHECK(contract_form_with_map(d, m)[0] == doctest::Approx(2.0 * m.determinant()));
}

TEST_CASE("pushforward: identity flow returns the initial form") {
  ClosedFormFlow id(
      2, [](double, const Vec& x) { return x; },
      [](double, const Vec&) { return Mat(Mat::Identity(2, 2)); },
      [](double, const Vec& x) { return x; });
  TestForm K = TestForm::random(2, 1, 17, 20, 0.5, 0.9);
  Vec x = make_vec({0.2, -0.3});
  CHECK(bundle_norm(pushforward_form(K.field(), id, 1.0, x) - K.field()(0.0, x)) < 1e-14);
}

TEST_CASE("pushforward: constant drift translates scalars") {
  // k = 0, b constant, xi = 0: u(t, x) = u0(x - b t) via the sampled flow.
  VectorField b = VectorField::constant(make_vec({0.4, -0.2}));
  BrownianPath nopath = BrownianPath::sample(0, 1.0, 200, 19, 0);
  SampledFlow flow(b, {}, nopath, Scheme::strat_heun);
  KFormField u0 = KFormField::analytic(2, 0, [](double, const Vec& x) {
    FormValue v(2, 0);
    v[0] = std::exp(-x.squaredNorm());
    return v;
  });
  Vec x = make_vec({0.3, 0.5});
  Vec shifted = make_vec({0.3 - 0.4, 0.5 + 0.2});
  double got = pushforward_form(u0, flow, 1.0, x)[0];
  CHECK(got == doctest::Approx(std::exp(-shifted.squaredNorm())).epsilon(1e-9));
}

TEST_CASE("pushforward: density transport along the geometric flow") {
  // k = n = 1, phi_t(x) = x e^t: (phi_t)_*(rho0 dx) = rho0(x e^-t) e^-t dx.
  ClosedFormFlow flow(
      1, [](double t, const Vec& x) { return Vec(x * std::exp(t)); },
      [](double t, const Vec&) {
        Mat j(1, 1);
        j(0, 0) = std::exp(t);
        return j;
      },
      [](double t, const Vec& x) { return Vec(x * std::exp(-t)); });
  KFormField rho = KFormField::analytic(1, 1, [](double, const Vec& x) {
    FormValue v(1, 1);
    v[0] = 1.0 + 0.5 * std::sin(x[0]);
    return v;
  });
  double t = 0.7, x = 0.4;
  double expect = (1.0 + 0.5 * std::sin(x * std::exp(-t))) * std::exp(-t);
  CHECK(pushforward_form(rho, flow, t, make_vec({x}))[0] == doctest::Approx(expect));
}

TEST_CASE("pullback: identity, closed-form linear flow, round trip") {
  TestForm K = TestForm::random(2, 1, 23, 21, 0.5, 0.9);
  ClosedFormFlow rot = rotation_flow();
  Vec x = make_vec({0.3, 0.1});
  // against the matrix formula: (phi* K)_j = K_i(phi x) Dphi^i_j
  Mat R(2, 2);
  R << std::cos(0.5), std::sin(0.5), -std::sin(0.5), std::cos(0.5);
  FormValue at = K.field()(0.0, Vec(R * x));
  FormValue expect(2, 1);
  expect[0] = at[0] * R(0, 0) + at[1] * R(1, 0);
  expect[1] = at[0] * R(0, 1) + at[1] * R(1, 1);
  CHECK(bundle_norm(pullback_form(K.field(), rot, 0.5, x) - expect) < 1e-13);

  // pullback of pushforward returns the value within O(dt) on a sampled flow
  VectorField bs(
      2, [](double, const Vec& xx) { return make_vec({0.3 * xx[1], -0.2 * xx[0]}); },
      [](double, const Vec&) {
        Mat j(2, 2);
        j << 0, 0.3, -0.2, 0;
        return j;
      });
  std::vector<VectorField> xis = {VectorField::constant(make_vec({0.2, 0.1}))};
  BrownianPath path = BrownianPath::sample(1, 0.5, 500, 29, 0);
  SampledFlow flow(bs, xis, path, Scheme::strat_heun);
  KFormField pushed = KFormField::analytic(2, 1, [&](double t, const Vec& xx) {
    return pushforward_form(K.field(), flow, t, xx);
  });
  FormValue round = pullback_form(pushed, flow, 0.5, x);
  CHECK(bundle_norm(round - K.field()(0.0, x)) < 10.0 * path.dt());
}

TEST_CASE("change of variables: <<phi_* K, Th>> = <<K, |Jphi| (phi^* Th#)b>>") {
  // Anisotropic linear flow with non-unit Jacobian determinant.
  ClosedFormFlow flow(
      2,
      [](double t, const Vec& x) {
        return make_vec({x[0] * std::exp(t), x[1] * std::exp(-0.5 * t)});
      },
      [](double t, const Vec&) {
        Mat j(2, 2);
        j << std::exp(t), 0, 0, std::exp(-0.5 * t);
        return j;
      },
      [](double t, const Vec& x) {
        return make_vec({x[0] * std::exp(-t), x[1] * std::exp(0.5 * t)});
      },
      [](double t, const Vec&) {
        Mat j(2, 2);
        j << std::exp(-t), 0, 0, std::exp(0.5 * t);
        return j;
      });
  TestForm K = TestForm::random(2, 1, 27, 22, 0.3, 0.4);
  TestForm Th = TestForm::random(2, 1, 27, 23, 0.4, 0.5);
  const double t = 0.5;
  auto defect = [&](int res) {
    QuadratureGrid g(cube(2, 1.2), {res, res, 0, 0, 0, 0, 0, 0});
    double lhs = 0.0, rhs = 0.0;
    g.for_each_node([&](const Vec& x, double w) {
      lhs += w * bundle_dot(pushforward_form(K.field(), flow, t, x), Th.field()(0.0, x));
      // |Jphi| (phi^* Th^sharp)^flat: contravariant pull-back contracts with
      // Dpsi at phi(x), transposed relative to the covariant contraction.
      Vec y = flow.forward(t, x);
      Mat dpsi_at_y = flow.preimage(t, y).second;
      double jphi = flow.forward_jacobian(t, x).determinant();
      FormValue tilde =
          contract_form_with_map(Th.field()(0.0, y), Mat(dpsi_at_y.transpose()));
      rhs += w * std::abs(jphi) * bundle_dot(K.field()(0.0, x), tilde);
    });
    return std::abs(lhs - rhs);
  };
  double d1 = defect(24), d2 = defect(96);
  CHECK(d2 < 1e-5);
  // order >= 2 in space over the two dyadic refinements
  CHECK(std::log2(d1 / d2) / 2.0 >= 1.5);
}

TEST_CASE("integrate_over_chart: area form, Green circulation, degeneracy") {
  // unit square in the (1,2)-plane of R^3
  SubmanifoldChart square;
  square.k = 2;
  square.n = 3;
  square.sigma = [](const Vec& u) { return make_vec({u[0], u[1], 0.0}); };
  square.nodes[0] = 8;
  square.nodes[1] = 8;
  const int t12[] = {1, 2};
  KFormField area = KFormField::analytic(3, 2, [&](double, const Vec&) {
    return FormValue::basis(3, std::span<const int>(t12, 2));
  });
  CHECK(integrate_over_chart(area, square, 0.0) == doctest::Approx(1.0));
  CHECK(integrate_over_chart(KFormField::zero(3, 2), square, 0.0) == 0.0);

  // circle with K = x1 dx2 - x2 dx1: circulation = 2 * area = 2 pi
  SubmanifoldChart circle;
  circle.k = 1;
  circle.n = 2;
  circle.sigma = [](const Vec& u) {
    double w = 2.0 * std::numbers::pi * u[0];
    return make_vec({std::cos(w), std::sin(w)});
  };
  circle.nodes[0] = 64;
  KFormField green = KFormField::analytic(2, 1, [](double, const Vec& x) {
    FormValue v(2, 1);
    v[0] = -x[1];
    v[1] = x[0];
    return v;
  });
  CHECK(integrate_over_chart(green, circle, 0.0) ==
        doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-8));

  SubmanifoldChart degenerate;
  degenerate.k = 2;
  degenerate.n = 2;
  degenerate.sigma = [](const Vec& u) { return make_vec({u[0], 0.0}); };
  degenerate.nodes[0] = 4;
  degenerate.nodes[1] = 4;
  KFormField d2 = KFormField::analytic(2, 2, [](double, const Vec&) {
    FormValue v(2, 2);
    v[0] = 1.0;
    return v;
  });
  CHECK_THROWS_AS(integrate_over_chart(d2, degenerate, 0.0), std::domain_error);
}

TEST_CASE("conservation: identity dynamics is exact, noisy transport is O(dt)") {
  SubmanifoldChart circle;
  circle.k = 1;
  circle.n = 2;
  circle.sigma = [](const Vec& u) {
    double w = 2.0 * std::numbers::pi * u[0];
    return make_vec({std::cos(w), std::sin(w)});
  };
  circle.nodes[0] = 48;
  KFormField green = KFormField::analytic(
      2, 1,
      [](double, const Vec& x) {
        FormValue v(2, 1);
        v[0] = -x[1];
        v[1] = x[0];
        return v;
      },
      [](double, const Vec&, int axis) {
        FormValue v(2, 1);
        if (axis == 1) v[1] = 1.0;
        if (axis == 2) v[0] = -1.0;
        return v;
      });
  VectorField zero = VectorField::zero(2);
  BrownianPath nopath = BrownianPath::sample(0, 1.0, 50, 37, 0);
  ConservationResult idr =
      conservation_check(green, zero, {}, circle, nopath, 1.0, Scheme::strat_heun);
  CHECK(idr.drift < 1e-12);

  VectorField b = make_rotation_field();
  std::vector<VectorField> xis = {VectorField::constant(make_vec({0.25, 0.0})),
                                  VectorField::constant(make_vec({0.0, 0.25}))};
  BrownianPath path = BrownianPath::sample(2, 1.0, 1000, 37, 1);
  ConservationResult r = conservation_check(green, b, xis, circle, path, 1.0, Scheme::strat_heun);
  CHECK(r.initial == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-10));
  CHECK(r.drift / std::abs(r.initial) < 1e-2);
}

TEST_CASE("conservation: a 0-chart reduces to pointwise invariance") {
  // k = 0: the transported integral is the scalar value at the moving point.
  SubmanifoldChart point;
  point.k = 0;
  point.n = 2;
  const Vec x0 = make_vec({0.6, -0.2});
  point.sigma = [x0](const Vec&) { return x0; };
  KFormField u0 = KFormField::analytic(2, 0, [](double, const Vec& x) {
    FormValue v(2, 0);
    v[0] = std::exp(-x.squaredNorm()) + 0.3 * x[0];
    return v;
  });
  VectorField b = make_rotation_field();
  std::vector<VectorField> xis = {VectorField::constant(make_vec({0.2, 0.0}))};
  BrownianPath path = BrownianPath::sample(1, 1.0, 1000, 53, 0);
  ConservationResult r = conservation_check(u0, b, xis, point, path, 1.0, Scheme::strat_heun);
  CHECK(r.initial == doctest::Approx(u0(0.0, x0)[0]));
  CHECK(r.drift <= 10.0 * path.dt());
}

TEST_CASE("conservation drift is invariant under chart reparameterization") {
  // the same circle traversed at non-uniform speed
  auto warp = [](double u) { return u + 0.15 * std::sin(2.0 * std::numbers::pi * u); };
  SubmanifoldChart uniform, warped;
  for (SubmanifoldChart* c : {&uniform, &warped}) {
    c->k = 1;
    c->n = 2;
    c->nodes[0] = 128;
  }
  uniform.sigma = [](const Vec& u) {
    double w = 2.0 * std::numbers::pi * u[0];
    return make_vec({std::cos(w), std::sin(w)});
  };
  warped.sigma = [warp](const Vec& u) {
    double w = 2.0 * std::numbers::pi * warp(u[0]);
    return make_vec({std::cos(w), std::sin(w)});
  };
  KFormField green = KFormField::analytic(
      2, 1,
      [](double, const Vec& x) {
        FormValue v(2, 1);
        v[0] = -x[1];
        v[1] = x[0];
        return v;
      },
      [](double, const Vec&, int axis) {
        FormValue v(2, 1);
        if (axis == 1) v[1] = 1.0;
        if (axis == 2) v[0] = -1.0;
        return v;
      });
  VectorField b = make_rotation_field();
  std::vector<VectorField> xis = {VectorField::constant(make_vec({0.25, 0.0})),
                                  VectorField::constant(make_vec({0.0, 0.25}))};
  BrownianPath path = BrownianPath::sample(2, 1.0, 500, 59, 0);
  ConservationResult ru = conservation_check(green, b, xis, uniform, path, 1.0,
                                             Scheme::strat_heun);
  ConservationResult rw = conservation_check(green, b, xis, warped, path, 1.0,
                                             Scheme::strat_heun);
  CHECK(ru.initial == doctest::Approx(rw.initial).epsilon(1e-9));
  CHECK(std::abs(ru.drift - rw.drift) < 1e-6);
}

TEST_CASE("weak residual: zero solution, stochastic scalar transport decay") {
  QuadratureGrid g(cube(1, 4.0), {256, 0, 0, 0, 0, 0, 0, 0});
  VectorField b = VectorField::constant(make_vec({0.5}));
  std::vector<VectorField> xis = {VectorField::constant(make_vec({1.0}))};
  std::vector<TestForm> forms = {TestForm::random(1, 0, 43, 30, 1.0, 1.5)};

  SolutionSeries zero;
  zero.n = 1;
  zero.k = 0;
  zero.eval = [](double, const Vec&) { return FormValue(1, 0); };
  BrownianPath path = BrownianPath::sample(1, 0.5, 64, 43, 0);
  WeakResidualReport zr = weak_residual(zero, b, xis, forms, path, g);
  CHECK(zr.max_residual[0] == 0.0);

  // u(t,x) = u0(x - b t - W_t): the exact pathwise solution; residual decays
  // under (dt, grid) refinement at the adapted-sum rate. Single-path slopes
  // fluctuate, so the check averages a few paths.
  auto residual_at = [&](int factor, int res, uint64_t pidx) {
    BrownianPath fine = BrownianPath::sample(1, 0.5, 256, 43, pidx);
    BrownianPath pp = fine.coarsen(factor);
    SolutionSeries s;
    s.n = 1;
    s.k = 0;
    s.eval = [pp](double t, const Vec& x) {
      int m = static_cast<int>(std::lround(t / pp.dt()));
      double shift = 0.5 * t + pp.value(m, 0);
      FormValue v(1, 0);
      v[0] = std::exp(-(x[0] - shift) * (x[0] - shift));
      return v;
    };
    QuadratureGrid gg(cube(1, 4.0), {res, 0, 0, 0, 0, 0, 0, 0});
    return weak_residual(s, b, xis, forms, pp, gg).max_residual[0];
  };
  double r1 = 0.0, r2 = 0.0;
  for (uint64_t pidx = 1; pidx <= 4; ++pidx) {
    r1 += residual_at(4, 512, pidx) / 4.0;  // dt = 1/128
    r2 += residual_at(1, 512, pidx) / 4.0;  // dt = 1/512
  }
  CHECK(r2 < r1);
  CHECK(std::log2(r1 / r2) / 2.0 > 0.3);  // mean slope per halving
}

TEST_CASE("scalar pushforward mean: deterministic collapse and Gaussian oracle") {
  // xi = 0: the mean equals the single deterministic path value.
  VectorField b = VectorField::constant(make_vec({0.3}));
  auto u0 = [](const Vec& x) { return std::exp(-x.squaredNorm()); };
  auto [m0, s0] = scalar_pushforward_mean(u0, b, {}, make_vec({0.7}), 1.0, 100, 5, 0, 50,
                                          Scheme::strat_heun);
  CHECK(s0 < 1e-6);
  CHECK(m0 == doctest::Approx(std::exp(-0.4 * 0.4)).epsilon(1e-6));

  // b = 0, xi = 1, u0 standard normal density: E[u(t,x)] is the N(0, 1+t)
  // density (Gaussian convolution oracle).
  VectorField b0 = VectorField::zero(1);
  std::vector<VectorField> xis = {VectorField::constant(make_vec({1.0}))};
  auto gauss = [](const Vec& x) {
    return std::exp(-0.5 * x.squaredNorm()) / std::sqrt(2.0 * std::numbers::pi);
  };
  const double t = 0.5, x = 0.8;
  auto [m1, s1] = scalar_pushforward_mean(gauss, b0, xis, make_vec({x}), t, 50, 5, 0, 2000,
                                          Scheme::strat_heun);
  const double var = 1.0 + t;
  const double expect = std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
  CHECK(std::abs(m1 - expect) < 4.0 * s1 + 5.0 * (t / 50.0));

  // adding a constant drift shifts the kernel: E[u(t,x)] = N(ct, 1+t)(x)
  const double c = 0.6;
  VectorField bc = VectorField::constant(make_vec({c}));
  auto [m2, s2] = scalar_pushforward_mean(gauss, bc, xis, make_vec({x}), t, 50, 5, 0, 2000,
                                          Scheme::strat_heun);
  const double shifted =
      std::exp(-0.5 * (x - c * t) * (x - c * t) / var) / std::sqrt(2.0 * std::numbers::pi * var);
  CHECK(std::abs(m2 - shifted) < 4.0 * s2 + 5.0 * (t / 50.0));
}

TEST_CASE("KIW residual: forcing-free degeneration decays with the step") {
  KiwFixture fx;
  fx.K0 = KFormField::analytic(
      2, 1,
      [](double, const Vec& x) {
        FormValue v(2, 1);
        v[0] = 0.5 + 0.2 * x[1];
        v[1] = 0.3 * x[0];
        return v;
      },
      [](double, const Vec&, int axis) {
        FormValue v(2, 1);
        if (axis == 1) v[1] = 0.3;
        if (axis == 2) v[0] = 0.2;
        return v;
      });
  fx.G = KFormField::zero(2, 1);
  fx.H = KFormField::zero(2, 1);
  fx.b = VectorField(
      2, [](double, const Vec& x) { return make_vec({0.2 * x[1], -0.2 * x[0]}); },
      [](double, const Vec&) {
        Mat j(2, 2);
        j << 0, 0.2, -0.2, 0;
        return j;
      });
  fx.xi = VectorField(
      2, [](double, const Vec& x) { return make_vec({0.15 + 0.05 * x[0], 0.1}); },
      [](double, const Vec&) {
        Mat j(2, 2);
        j << 0.05, 0, 0, 0;
        return j;
      });
  std::vector<Vec> pts = {make_vec({0.2, -0.1}), make_vec({-0.3, 0.25})};
  BrownianPath fine = BrownianPath::sample(1, 0.25, 1000, 47, 0);
  double rc = kiw_residual(fx, fine.coarsen(20), pts);  // dt = 5e-3
  double rf = kiw_residual(fx, fine.coarsen(4), pts);   // dt = 1e-3
  CHECK(rf < rc);
}
