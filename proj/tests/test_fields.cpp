#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "lieflow/fields.hpp"
#include "lieflow/rng.hpp"
#include "oracles.hpp"

using namespace lieflow;

namespace {
GridBox box2(double half) {
  GridBox b;
  b.lo = make_vec({-half, -half});
  b.hi = make_vec({half, half});
  return b;
}
}  // namespace

TEST_CASE("vector field: FD jacobian matches the analytic one at smooth points") {
  VectorField f(
      2, [](double, const Vec& x) { return make_vec({std::sin(x[0]) * x[1], x[0] * x[0]}); },
      [](double, const Vec& x) {
        Mat j(2, 2);
        j << std::cos(x[0]) * x[1], std::sin(x[0]), 2.0 * x[0], 0.0;
        return j;
      });
  VectorField fd(2, [&f](double t, const Vec& x) { return f(t, x); });
  Vec x = make_vec({0.4, -0.7});
  CHECK((f.jacobian(0, x) - fd.jacobian(0, x)).norm() < 1e-7);
}

TEST_CASE("vector field: declared divergence-free flag is verifiable") {
  VectorField rot(2, [](double, const Vec& x) { return make_vec({x[1], -x[0]}); });
  rot.declare_divergence_free();
  std::vector<Vec> pts = {make_vec({0.3, 0.4}), make_vec({-1.0, 2.0})};
  CHECK(rot.verify_divergence_free(0.0, pts) < 1e-9);
}

TEST_CASE("grid field: interpolation reproduces node values exactly") {
  GridKForm g(2, 1, box2(1.0), {8, 8});
  std::vector<double> data(static_cast<size_t>(g.nodes()) * 2);
  for (long node = 0; node < g.nodes(); ++node) {
    Vec x = g.node_point(node);
    data[static_cast<size_t>(node)] = x[0] + 2.0 * x[1];
    data[static_cast<size_t>(g.nodes() + node)] = x[0] * x[1];
  }
  g.add_slice(0.0, data);
  for (long node = 0; node < g.nodes(); node += 7) {
    Vec x = g.node_point(node);
    FormValue v = g.eval(0.0, x);
    CHECK(v[0] == doctest::Approx(x[0] + 2.0 * x[1]).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(x[0] * x[1]).epsilon(1e-14));
  }
}

TEST_CASE("grid field: interpolation error for a quadratic field decays at order 2") {
  auto sample = [](int res) {
    KFormField f = KFormField::analytic(2, 0, [](double, const Vec& x) {
      FormValue v(2, 0);
      v[0] = x[0] * x[0] + 0.5 * x[0] * x[1];
      return v;
    });
    GridKForm g = sample_to_grid(f, box2(1.0), {res, res, 0, 0, 0, 0, 0, 0}, 0.0);
    // probe between nodes
    double worst = 0.0;
    for (int s = 0; s < 50; ++s) {
      Vec x = make_vec({rng::uniform_in(-0.8, 0.8, 3, 9, s, 0),
                        rng::uniform_in(-0.8, 0.8, 3, 9, s, 1)});
      double exact = x[0] * x[0] + 0.5 * x[0] * x[1];
      worst = std::max(worst, std::abs(g.eval(0.0, x)[0] - exact));
    }
    return worst;
  };
  double e1 = sample(16), e2 = sample(32);
  CHECK(e1 / e2 > 3.0);  // order ~2 under halving the spacing
}

TEST_CASE("grid field serialization round trip with JSON sidecar") {
  GridKForm g(2, 1, box2(1.5), {6, 4});
  std::vector<double> data(static_cast<size_t>(g.nodes()) * 2);
  for (size_t i = 0; i < data.size(); ++i)
    data[i] = std::sin(0.1 * static_cast<double>(i)) * 3.25;
  g.add_slice(0.0, data);
  std::string path = (std::filesystem::temp_directory_path() / "lieflow_grid.bin").string();
  g.save(path);
  GridKForm h = GridKForm::load(path);
  CHECK(h.n() == 2);
  CHECK(h.k() == 1);
  CHECK(h.resolution()[0] == 6);
  CHECK(h.resolution()[1] == 4);
  CHECK(h.box().lo[0] == -1.5);
  CHECK(h.slice(0) == g.slice(0));  // bit-identical payload
  CHECK(std::filesystem::exists(path + ".json"));
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
}

TEST_CASE("fd_derivative: constant field, symbolic example, Richardson order") {
  // constant -> 0
  KFormField c = KFormField::analytic(2, 1, [](double, const Vec&) {
    FormValue v(2, 1);
    v[0] = 3.0;
    v[1] = -1.0;
    return v;
  });
  CHECK(bundle_norm(fd_derivative(c, 0.0, make_vec({0.2, 0.3}), 1)) < 1e-10);

  // F = x1 dx2, d/dx1 -> dx2 (frozen from the symbolic oracle)
  KFormField f = KFormField::analytic(2, 1, [](double, const Vec& x) {
    FormValue v(2, 1);
    v[1] = x[0];
    return v;
  });
  FormValue d = fd_derivative(f, 0.0, make_vec({0.7, -0.2}), 1);
  CHECK(d[0] == doctest::Approx(0.0));
  CHECK(d[1] == doctest::Approx(1.0));

  // cubic coefficients: grid-FD error decays at order 2 in the cell width
  auto err_at = [](int res) {
    KFormField cubic = KFormField::analytic(2, 0, [](double, const Vec& x) {
      FormValue v(2, 0);
      v[0] = x[0] * x[0] * x[0];
      return v;
    });
    GridKForm g = sample_to_grid(cubic, box2(1.0), {res, res, 0, 0, 0, 0, 0, 0}, 0.0);
    KFormField gf = KFormField::grid(g);
    Vec x = g.node_point(g.flat_index({res / 2, res / 2}));
    double exact = 3.0 * x[0] * x[0];
    return std::abs(fd_derivative(gf, 0.0, x, 1)[0] - exact);
  };
  double e1 = err_at(16), e2 = err_at(32);
  CHECK(e1 / e2 > 3.2);
  CHECK(e1 / e2 < 4.8);

  // boundary proximity rejected for grid fields
  GridKForm g = sample_to_grid(c, box2(1.0), {8, 8, 0, 0, 0, 0, 0, 0}, 0.0);
  KFormField gf = KFormField::grid(g);
  CHECK_THROWS_AS(fd_derivative(gf, 0.0, make_vec({0.99, 0.0}), 1), std::domain_error);
}

TEST_CASE("quadrature grid: counts, exclusion validation, restriction") {
  QuadratureGrid g(box2(1.0), {10, 10});
  CHECK(g.node_count() == 100);
  CHECK(g.cell_volume() == doctest::Approx(0.04));
  CHECK_THROWS_AS(QuadratureGrid(box2(1.0), {10, 10}).exclude_ball(make_vec({0.9, 0.9}), 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(QuadratureGrid(box2(1.0), {0, 10}), std::invalid_argument);
}

TEST_CASE("l2_inner: zero, positivity, aligned indicator box integrates exactly") {
  QuadratureGrid g(box2(1.0), {32, 32});
  KFormField zero = KFormField::zero(2, 2);
  KFormField dens = KFormField::analytic(2, 2, [](double, const Vec& x) {
    FormValue v(2, 2);
    v[0] = (x[0] >= 0.0 && x[0] <= 0.5 && x[1] >= 0.0 && x[1] <= 0.5) ? 1.0 : 0.0;
    return v;
  });
  CHECK(l2_inner(zero, dens, g, 0.0) == 0.0);
  CHECK(l2_inner(dens, dens, g, 0.0) == doctest::Approx(0.25));  // area of the box
  // positive definiteness on a nonzero smooth field
  TestForm t = TestForm::bump(2, 2, 0.8);
  CHECK(l2_inner(t.field(), t.field(), g, 0.0) > 0.0);
  // symmetry/bilinearity at machine precision
  TestForm s = TestForm::random(2, 2, 5, 77, 0.5, 0.9);
  double ts = l2_inner(t.field(), s.field(), g, 0.0);
  double st = l2_inner(s.field(), t.field(), g, 0.0);
  CHECK(ts == doctest::Approx(st).epsilon(1e-14));
  KFormField combo = KFormField::analytic(2, 2, [&](double tt, const Vec& x) {
    return FormValue(t.field()(tt, x) * 2.5 + s.field()(tt, x));
  });
  double lin = l2_inner(combo, dens, g, 0.0);
  double split = 2.5 * l2_inner(t.field(), dens, g, 0.0) + l2_inner(s.field(), dens, g, 0.0);
  CHECK(lin == doctest::Approx(split).epsilon(1e-13));
  CHECK_THROWS_AS(l2_inner(zero, KFormField::zero(2, 1), g, 0.0), std::invalid_argument);
}

TEST_CASE("lp_norm: zero field, homogeneity, indicator box, p validation") {
  QuadratureGrid g(box2(1.0), {32, 32});
  CHECK(lp_norm(KFormField::zero(2, 1), 2.0, g, 0.0) == 0.0);
  KFormField dens = KFormField::analytic(2, 2, [](double, const Vec& x) {
    FormValue v(2, 2);
    v[0] = (std::abs(x[0]) <= 0.5 && std::abs(x[1]) <= 0.5) ? 1.0 : 0.0;
    return v;
  });
  CHECK(lp_norm(dens, 3.0, g, 0.0) == doctest::Approx(1.0));  // vol^{1/3} = 1
  KFormField scaled = KFormField::analytic(2, 2, [dens](double t, const Vec& x) {
    return FormValue(dens(t, x) * -2.0);
  });
  CHECK(lp_norm(scaled, 3.0, g, 0.0) == doctest::Approx(2.0 * lp_norm(dens, 3.0, g, 0.0)));
  CHECK_THROWS_AS(lp_norm(dens, 0.5, g, 0.0), std::invalid_argument);
}

TEST_CASE("parabolicity bracket: identity, degenerate, and eigenvalue cases") {
  std::vector<Vec> pts = {make_vec({0.0, 0.0}), make_vec({1.0, -2.0})};
  std::vector<double> times = {0.0};
  // xi_i = e_i -> c = C = 1
  std::vector<VectorField> id = {VectorField::constant(make_vec({1.0, 0.0})),
                                 VectorField::constant(make_vec({0.0, 1.0}))};
  auto [c1, C1] = check_parabolicity(id, pts, times, 128, 9);
  CHECK(c1 == doctest::Approx(1.0));
  CHECK(C1 == doctest::Approx(1.0));
  // single direction -> degenerate (basis sweep detects the exact zero)
  std::vector<VectorField> degen = {VectorField::constant(make_vec({1.0, 0.0}))};
  auto [c2, C2] = check_parabolicity(degen, pts, times, 128, 9);
  CHECK(c2 == 0.0);
  CHECK(C2 == doctest::Approx(1.0));
  // xi1 = (1,0), xi2 = (1,1): eigenvalues of [[2,1],[1,1]] are (3 +- sqrt 5)/2
  // (frozen from the eigenvalue oracle: 0.38196601..., 2.61803398...)
  std::vector<VectorField> pair = {VectorField::constant(make_vec({1.0, 0.0})),
                                   VectorField::constant(make_vec({1.0, 1.0}))};
  auto [c3, C3] = check_parabolicity(pair, pts, times, 4096, 9);
  CHECK(c3 == doctest::Approx(0.3819660113).epsilon(5e-3));
  CHECK(C3 == doctest::Approx(2.6180339887).epsilon(5e-3));
  CHECK_THROWS_AS(check_parabolicity({}, pts, times), std::invalid_argument);
}

TEST_CASE("test form: compact support of the profile and its derivatives") {
  TestForm t = TestForm::random(3, 1, 21, 5, 0.4, 0.7);
  const double R = t.radius();
  for (int s = 0; s < 20; ++s) {
    Vec dir = make_vec({rng::uniform_in(-1, 1, 4, 1, s, 0), rng::uniform_in(-1, 1, 4, 1, s, 1),
                        rng::uniform_in(-1, 1, 4, 1, s, 2)});
    dir /= dir.norm();
    Vec outside = Vec(dir * (R * 1.0001));
    CHECK(bundle_norm(t(0.0, outside)) == 0.0);
    for (int axis = 1; axis <= 3; ++axis)
      CHECK(bundle_norm(t.field().derivative(0.0, Vec(dir * (R * 1.2)), axis)) == 0.0);
    Vec inside = Vec(dir * (R * 0.5));
    CHECK(bundle_norm(t(0.0, inside)) >= 0.0);
  }
  CHECK(t.sup_norm_estimate() == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("holder quotient estimate is finite for the rough drift family") {
  VectorField b(1, [](double, const Vec& x) {
    Vec v(1);
    double a = std::abs(x[0]);
    v[0] = (x[0] >= 0 ? 1.0 : -1.0) * std::pow(std::min(a, 1.0), 0.5) * 2.0;
    return v;
  });
  GridBox box;
  box.lo = make_vec({-2.0});
  box.hi = make_vec({2.0});
  double q = holder_quotient_estimate(b, 0.5, box, 2000, 77);
  CHECK(q > 0.1);
  CHECK(q < 10.0);
}
