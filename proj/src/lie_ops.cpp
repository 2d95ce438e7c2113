#include "lieflow/lie_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lieflow {

namespace {

// dK[l-1] = coefficientwise d/dx_l of K at (t,x), l = 1..n.
std::vector<FormValue> coefficient_gradient(const KFormField& K, double t, const Vec& x) {
  std::vector<FormValue> dK;
  dK.reserve(static_cast<size_t>(K.n()));
  for (int l = 1; l <= K.n(); ++l) dK.push_back(K.derivative(t, x, l));
  return dK;
}

}  // namespace

FormValue lie_derivative(const VectorField& b, const KFormField& K, double t, const Vec& x) {
  if (b.n() != K.n()) throw std::invalid_argument("lie_derivative: dimension mismatch");
  const int n = K.n(), k = K.k();
  const Vec bv = b(t, x);
  const std::vector<FormValue> dK = coefficient_gradient(K, t, x);
  FormValue out(n, k);
  const auto& set = MultiIndexSet::get(n, k);
  for (int pos = 0; pos < set.size(); ++pos) {
    double v = 0.0;
    for (int l = 0; l < n; ++l) v += bv[l] * dK[static_cast<size_t>(l)][pos];
    out[pos] = v;
  }
  if (k == 0) return out;
  const Mat jac = b.jacobian(t, x);  // jac(r,c) = d b^r / d x_c
  const FormValue Kv = K(t, x);
  std::array<int, kMaxDim> tuple{};
  for (int pos = 0; pos < set.size(); ++pos) {
    const MultiIndex& J = set[pos];
    double v = 0.0;
    for (int a = 0; a < k; ++a) {
      for (int p = 0; p < k; ++p) tuple[static_cast<size_t>(p)] = J.axis(p);
      for (int l = 1; l <= n; ++l) {
        tuple[static_cast<size_t>(a)] = l;
        double kc = Kv.at(std::span<const int>(tuple.data(), static_cast<size_t>(k)));
        if (kc != 0.0) v += kc * jac(l - 1, J.axis(a) - 1);
      }
    }
    out[pos] += v;
  }
  return out;
}

FormValue adjoint_lie(const VectorField& b, const KFormField& theta, double t, const Vec& x) {
  if (b.n() != theta.n()) throw std::invalid_argument("adjoint_lie: dimension mismatch");
  const int n = theta.n(), k = theta.k();
  const Vec bv = b(t, x);
  const Mat jac = b.jacobian(t, x);
  const double divb = jac.trace();
  const std::vector<FormValue> dTh = coefficient_gradient(theta, t, x);
  const FormValue Th = theta(t, x);
  FormValue out(n, k);
  const auto& set = MultiIndexSet::get(n, k);
  std::array<int, kMaxDim> tuple{};
  for (int pos = 0; pos < set.size(); ++pos) {
    const MultiIndex& J = set[pos];
    double v = -divb * Th[pos];
    for (int l = 0; l < n; ++l) v -= bv[l] * dTh[static_cast<size_t>(l)][pos];
    for (int a = 0; a < k; ++a) {
      for (int p = 0; p < k; ++p) tuple[static_cast<size_t>(p)] = J.axis(p);
      for (int l = 1; l <= n; ++l) {
        tuple[static_cast<size_t>(a)] = l;
        double tc = Th.at(std::span<const int>(tuple.data(), static_cast<size_t>(k)));
        if (tc != 0.0) v += tc * jac(J.axis(a) - 1, l - 1);
      }
    }
    out[pos] = v;
  }
  return out;
}

KFormField lie_derivative_field(const VectorField& b, const KFormField& K) {
  return KFormField::analytic(K.n(), K.k(), [b, K](double t, const Vec& x) {
    return lie_derivative(b, K, t, x);
  });
}

KFormField adjoint_lie_field(const VectorField& b, const KFormField& theta) {
  return KFormField::analytic(theta.n(), theta.k(), [b, theta](double t, const Vec& x) {
    return adjoint_lie(b, theta, t, x);
  });
}

FormValue adjoint_lie_squared(const VectorField& xi, const KFormField& theta, double t,
                              const Vec& x) {
  return adjoint_lie(xi, adjoint_lie_field(xi, theta), t, x);
}

double distributional_adjoint_pairing(const VectorField& b, const TestForm& theta,
                                      const KFormField& K, const QuadratureGrid& grid,
                                      double t) {
  const int n = K.n(), k = K.k();
  if (theta.n() != n || theta.k() != k)
    throw std::invalid_argument("distributional_adjoint_pairing: degree mismatch");
  for (int a = 0; a < n; ++a)
    if (grid.box().lo[a] > -theta.radius() || grid.box().hi[a] < theta.radius())
      throw std::domain_error("distributional_adjoint_pairing: test form support escapes grid box");
  const KFormField& th = theta.field();
  const auto& set = MultiIndexSet::get(n, k);
  std::array<int, kMaxDim> tuple{};
  double acc = 0.0;
  grid.for_each_node([&](const Vec& x, double w) {
    if (x.norm() >= theta.radius()) return;  // integrand carries a Theta factor
    const double h = 1e-4 * (1.0 + x.norm());
    // Stencil values of b and Theta for product derivatives d_m(b^l Th_J).
    std::vector<Vec> bp(static_cast<size_t>(n)), bm(static_cast<size_t>(n));
    std::vector<FormValue> thp(static_cast<size_t>(n)), thm(static_cast<size_t>(n));
    Vec xs = x;
    for (int m = 0; m < n; ++m) {
      xs[m] = x[m] + h;
      bp[static_cast<size_t>(m)] = b(t, xs);
      thp[static_cast<size_t>(m)] = th(t, xs);
      xs[m] = x[m] - h;
      bm[static_cast<size_t>(m)] = b(t, xs);
      thm[static_cast<size_t>(m)] = th(t, xs);
      xs[m] = x[m];
    }
    const Vec bv = b(t, x);
    const FormValue Kv = K(t, x);
    double node = 0.0;
    for (int pos = 0; pos < set.size(); ++pos) {
      const MultiIndex& J = set[pos];
      // -K_J sum_l d_l(b^l Th_J)
      double divbth = 0.0;
      for (int l = 0; l < n; ++l)
        divbth += (bp[static_cast<size_t>(l)][l] * thp[static_cast<size_t>(l)][pos] -
                   bm[static_cast<size_t>(l)][l] * thm[static_cast<size_t>(l)][pos]) /
                  (2.0 * h);
      node -= Kv[pos] * divbth;
      // + K_{J[a->l]} [ d_{ja}(b^l Th_J) - b^l d_{ja} Th_J ]
      for (int a = 0; a < k; ++a) {
        const int ja = J.axis(a);  // 1-based derivative axis
        for (int p = 0; p < k; ++p) tuple[static_cast<size_t>(p)] = J.axis(p);
        for (int l = 0; l < n; ++l) {
          tuple[static_cast<size_t>(a)] = l + 1;
          double kc = Kv.at(std::span<const int>(tuple.data(), static_cast<size_t>(k)));
          if (kc == 0.0) continue;
          double d_bth = (bp[static_cast<size_t>(ja - 1)][l] * thp[static_cast<size_t>(ja - 1)][pos] -
                          bm[static_cast<size_t>(ja - 1)][l] * thm[static_cast<size_t>(ja - 1)][pos]) /
                         (2.0 * h);
          double d_th = (thp[static_cast<size_t>(ja - 1)][pos] - thm[static_cast<size_t>(ja - 1)][pos]) /
                        (2.0 * h);
          node += kc * (d_bth - bv[l] * d_th);
        }
      }
    }
    acc += w * node;
  });
  return acc;
}

// ---------------------------------------------------------------------------
// Mollifier

namespace {

// Smooth bump on B(0, 1/4).
double inner_bump(double s) {
  double u = 4.0 * s;
  if (u >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

// Fraction of the unit sphere with t = cos(angle to a fixed axis) >= c,
// i.e. int_c^1 (1-t^2)^((n-3)/2) dt normalized; computed in the theta
// parameterization t = sin(theta).
double sphere_cap_fraction(int n, double c) {
  if (c <= -1.0) return 1.0;
  if (c >= 1.0) return 0.0;
  if (n == 1) return 0.5;  // one of the two directions
  auto integrand = [n](double th) { return std::pow(std::cos(th), n - 2); };
  const double a = std::asin(c), bnd = std::numbers::pi / 2.0;
  const int m = 256;
  auto simpson = [&](double lo, double hi) {
    double s = integrand(lo) + integrand(hi);
    double hh = (hi - lo) / m;
    for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * integrand(lo + i * hh);
    return s * hh / 3.0;
  };
  return simpson(a, bnd) / simpson(-bnd, bnd);
}

double sphere_area(int n) {
  // |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)
  return 2.0 * std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0);
}

}  // namespace

Mollifier::Mollifier(int n, double eps) : n_(n), eps_(eps) {
  if (n < 1 || n > kMaxDim) throw std::invalid_argument("Mollifier: dimension out of range");
  if (eps <= 0.0) throw std::invalid_argument("Mollifier: scale must be positive");
  const int table_size = 1024;
  table_.assign(table_size, 0.0);
  const int ms = 512;  // radial quadrature panels for the s integral
  const double smax = 0.25;
  for (int j = 0; j < table_size; ++j) {
    double r = static_cast<double>(j) / (table_size - 1);
    double acc = 0.0;
    double hs = smax / ms;
    for (int i = 0; i <= ms; ++i) {
      double s = i * hs;
      double wgt = (i == 0 || i == ms) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      double beta = inner_bump(s);
      if (beta == 0.0) continue;
      double frac;
      if (n_ == 1) {
        // directions +1/-1; contribution from |r - s| <= 3/4 and r + s <= 3/4
        frac = 0.5 * ((std::abs(r - s) <= 0.75 ? 1.0 : 0.0) + (r + s <= 0.75 ? 1.0 : 0.0));
      } else {
        double denom = 2.0 * r * s;
        double num = r * r + s * s - 0.5625;  // (3/4)^2
        double c = (denom < 1e-300) ? (num <= 0.0 ? -2.0 : 2.0) : num / denom;
        frac = sphere_cap_fraction(n_, c);
      }
      acc += wgt * beta * std::pow(s, n_ - 1) * frac;
    }
    table_[static_cast<size_t>(j)] = acc * hs / 3.0;
  }
  // Normalize to unit mass: |S^{n-1}| int_0^1 g(r) r^{n-1} dr = 1.
  double mass = 0.0;
  const int nt = table_size - 1;
  for (int j = 0; j <= nt; ++j) {
    double r = static_cast<double>(j) / nt;
    double wgt = (j == 0 || j == nt) ? 1.0 : (j % 2 ? 4.0 : 2.0);
    mass += wgt * table_[static_cast<size_t>(j)] * std::pow(r, n_ - 1);
  }
  mass *= (1.0 / nt) / 3.0 * sphere_area(n_);
  for (double& v : table_) v /= mass;
}

double Mollifier::profile(double r) const {
  if (r >= 1.0 || r < 0.0) return 0.0;
  double u = r * (table_.size() - 1);
  size_t j = static_cast<size_t>(u);
  if (j + 1 >= table_.size()) return table_.back();
  double f = u - static_cast<double>(j);
  return (1.0 - f) * table_[j] + f * table_[j + 1];
}

double Mollifier::operator()(const Vec& x) const {
  return std::pow(eps_, -n_) * profile(x.norm() / eps_);
}

GridKForm mollify(const GridKForm& g, const Mollifier& m) {
  const int n = g.n();
  if (m.n() != n) throw std::invalid_argument("mollify: dimension mismatch");
  double hmax = 0.0;
  for (int a = 0; a < n; ++a) hmax = std::max(hmax, g.cell_width(a));
  if (m.eps() < 2.0 * hmax)
    throw std::invalid_argument("mollify: scale below grid resolution (need eps >= 2 cells)");

  // Discrete kernel over integer offsets, normalized to unit discrete mass.
  std::array<int, kMaxDim> rad{};
  std::array<long, kMaxDim> kdim{};
  long ksize = 1;
  for (int a = 0; a < n; ++a) {
    rad[static_cast<size_t>(a)] = static_cast<int>(std::ceil(m.eps() / g.cell_width(a)));
    kdim[static_cast<size_t>(a)] = 2L * rad[static_cast<size_t>(a)] + 1;
    ksize *= kdim[static_cast<size_t>(a)];
  }
  std::vector<double> kernel(static_cast<size_t>(ksize));
  std::vector<std::array<int, kMaxDim>> offsets(static_cast<size_t>(ksize));
  double total = 0.0;
  for (long f = 0; f < ksize; ++f) {
    long rem = f;
    Vec d(n);
    std::array<int, kMaxDim> off{};
    for (int a = n - 1; a >= 0; --a) {
      long i = rem % kdim[static_cast<size_t>(a)];
      rem /= kdim[static_cast<size_t>(a)];
      off[static_cast<size_t>(a)] = static_cast<int>(i) - rad[static_cast<size_t>(a)];
      d[a] = off[static_cast<size_t>(a)] * g.cell_width(a);
    }
    double w = m(d);
    kernel[static_cast<size_t>(f)] = w;
    offsets[static_cast<size_t>(f)] = off;
    total += w;
  }
  for (double& w : kernel) w /= total;

  GridKForm out(n, g.k(), g.box(), g.resolution());
  const long nodes = g.nodes();
  const int channels = g.channels();
  for (int s = 0; s < g.slice_count(); ++s) {
    const std::vector<double>& in = g.slice(s);
    std::vector<double> data(static_cast<size_t>(nodes) * channels, 0.0);
    std::array<int, kMaxDim> idx{};
    for (long node = 0; node < nodes; ++node) {
      // decode node into per-axis indices
      long rem = node;
      for (int a = n - 1; a >= 0; --a) {
        idx[static_cast<size_t>(a)] = static_cast<int>(rem % g.resolution()[static_cast<size_t>(a)]);
        rem /= g.resolution()[static_cast<size_t>(a)];
      }
      for (long f = 0; f < ksize; ++f) {
        double w = kernel[static_cast<size_t>(f)];
        if (w == 0.0) continue;
        std::array<int, kMaxDim> src = idx;
        bool inside = true;
        for (int a = 0; a < n; ++a) {
          src[static_cast<size_t>(a)] -= offsets[static_cast<size_t>(f)][static_cast<size_t>(a)];
          if (src[static_cast<size_t>(a)] < 0 ||
              src[static_cast<size_t>(a)] >= g.resolution()[static_cast<size_t>(a)]) {
            inside = false;
            break;
          }
        }
        if (!inside) continue;  // zero padding outside the box
        long snode = g.flat_index(src);
        for (int c = 0; c < channels; ++c)
          data[static_cast<size_t>(c) * nodes + static_cast<size_t>(node)] +=
              w * in[static_cast<size_t>(c) * nodes + static_cast<size_t>(snode)];
      }
    }
    out.add_slice(g.slice_time(s), std::move(data));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commutators

namespace {

void check_commutator_support(const TestForm& theta, const Mollifier& m,
                              const QuadratureGrid& grid) {
  const double reach = theta.radius() + m.eps();
  for (int a = 0; a < grid.n(); ++a)
    if (grid.box().lo[a] > -reach || grid.box().hi[a] < reach)
      throw std::domain_error("commutator: support(Theta) + eps escapes the grid box");
}

GridKForm sample_on(const QuadratureGrid& grid, const KFormField& f, double t) {
  std::array<int, kMaxDim> res{};
  for (int a = 0; a < grid.n(); ++a)
    res[static_cast<size_t>(a)] = static_cast<int>(
        std::lround((grid.box().hi[a] - grid.box().lo[a]) / grid.cell_width(a)));
  return sample_to_grid(f, grid.box(), res, t);
}

}  // namespace

double commutator_pairing(const VectorField& b, const KFormField& K, const TestForm& theta,
                          const Mollifier& m, const QuadratureGrid& grid, double t) {
  check_commutator_support(theta, m, grid);
  GridKForm Keps = mollify(sample_on(grid, K, t), m);
  KFormField Keps_f = KFormField::grid(std::move(Keps));
  KFormField theta_eps = KFormField::grid(mollify(sample_on(grid, theta.field(), t), m));

  const double reach = theta.radius() + m.eps() + 3.0 * grid.min_cell_width();
  double term1 = 0.0, term2 = 0.0;
  grid.for_each_node([&](const Vec& x, double w) {
    if (x.norm() > reach) return;
    term1 += w * bundle_dot(Keps_f(t, x), adjoint_lie(b, theta.field(), t, x));
    term2 += w * bundle_dot(K(t, x), adjoint_lie(b, theta_eps, t, x));
  });
  return term1 - term2;
}

double double_commutator_pairing(const VectorField& xi, const KFormField& K,
                                 const TestForm& theta, const Mollifier& m,
                                 const QuadratureGrid& grid, double t) {
  check_commutator_support(theta, m, grid);
  KFormField Keps_f = KFormField::grid(mollify(sample_on(grid, K, t), m));
  KFormField theta_eps = KFormField::grid(mollify(sample_on(grid, theta.field(), t), m));
  KFormField adj_eps =
      KFormField::grid(mollify(sample_on(grid, adjoint_lie_field(xi, theta.field()), t), m));
  KFormField LK = lie_derivative_field(xi, K);

  const double reach = theta.radius() + m.eps() + 3.0 * grid.min_cell_width();
  double term1 = 0.0, term2 = 0.0, term3 = 0.0;
  grid.for_each_node([&](const Vec& x, double w) {
    if (x.norm() > reach) return;
    term1 += w * bundle_dot(Keps_f(t, x), adjoint_lie_squared(xi, theta.field(), t, x));
    term2 += w * bundle_dot(LK(t, x), adj_eps(t, x));
    term3 += w * bundle_dot(lie_derivative(xi, LK, t, x), theta_eps(t, x));
  });
  return term1 - 2.0 * term2 + term3;
}

double fitted_loglog_slope(const std::vector<double>& scales, const std::vector<double>& values) {
  if (scales.size() != values.size() || scales.size() < 2)
    throw std::invalid_argument("fitted_loglog_slope: need matching lists of length >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double nn = static_cast<double>(scales.size());
  for (size_t i = 0; i < scales.size(); ++i) {
    double lx = std::log(scales[i]);
    double ly = std::log(std::max(values[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
}

}  // namespace lieflow
