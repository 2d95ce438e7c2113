#include "lieflow/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lieflow/rng.hpp"

namespace lieflow {

Vec make_vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

// ---------------------------------------------------------------------------
// VectorField

VectorField::VectorField(int n, EvalFn eval) : n_(n), eval_(std::move(eval)) {}
VectorField::VectorField(int n, EvalFn eval, JacFn jac)
    : n_(n), eval_(std::move(eval)), jac_(std::move(jac)) {}

VectorField VectorField::zero(int n) {
  return VectorField(n, [n](double, const Vec&) { return Vec(Vec::Zero(n)); },
                     [n](double, const Vec&) { return Mat(Mat::Zero(n, n)); })
      .declare_divergence_free();
}

VectorField VectorField::constant(const Vec& v) {
  const int n = static_cast<int>(v.size());
  Vec c = v;
  return VectorField(n, [c](double, const Vec&) { return c; },
                     [n](double, const Vec&) { return Mat(Mat::Zero(n, n)); })
      .declare_divergence_free();
}

Mat VectorField::jacobian(double t, const Vec& x) const {
  if (jac_) return jac_(t, x);
  const double h = fd_step_ * (1.0 + x.norm());
  Mat j(n_, n_);
  Vec xp = x, xm = x;
  for (int c = 0; c < n_; ++c) {
    xp[c] = x[c] + h;
    xm[c] = x[c] - h;
    Vec d = (eval_(t, xp) - eval_(t, xm)) / (2.0 * h);
    for (int r = 0; r < n_; ++r) j(r, c) = d[r];
    xp[c] = x[c];
    xm[c] = x[c];
  }
  return j;
}

double VectorField::divergence(double t, const Vec& x) const { return jacobian(t, x).trace(); }

double VectorField::verify_divergence_free(double t, const std::vector<Vec>& pts) const {
  double m = 0.0;
  for (const Vec& x : pts) m = std::max(m, std::abs(divergence(t, x)));
  return m;
}

VectorField VectorField::negated() const {
  VectorField out;
  out.n_ = n_;
  auto e = eval_;
  out.eval_ = [e](double t, const Vec& x) { return Vec(-e(t, x)); };
  if (jac_) {
    auto j = jac_;
    out.jac_ = [j](double t, const Vec& x) { return Mat(-j(t, x)); };
  }
  out.fd_step_ = fd_step_;
  out.divergence_free_ = divergence_free_;
  out.time_dependent_ = time_dependent_;
  return out;
}

// ---------------------------------------------------------------------------
// GridBox / GridKForm

bool GridBox::contains(const Vec& x) const {
  for (int i = 0; i < n(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

GridKForm::GridKForm(int n, int k, GridBox box, std::array<int, kMaxDim> res)
    : n_(n), k_(k), box_(std::move(box)), res_(res) {
  if (box_.n() != n) throw std::invalid_argument("GridKForm: box dimension mismatch");
  channels_ = static_cast<int>(binomial(n, k));
  nodes_ = 1;
  for (int a = 0; a < n; ++a) {
    if (res_[static_cast<size_t>(a)] < 1) throw std::invalid_argument("GridKForm: empty resolution");
    nodes_ *= res_[static_cast<size_t>(a)];
    cell_[static_cast<size_t>(a)] =
        (box_.hi[a] - box_.lo[a]) / res_[static_cast<size_t>(a)];
  }
}

double GridKForm::min_cell_width() const {
  double m = cell_[0];
  for (int a = 1; a < n_; ++a) m = std::min(m, cell_[static_cast<size_t>(a)]);
  return m;
}

Vec GridKForm::node_point(long flat) const {
  Vec x(n_);
  for (int a = n_ - 1; a >= 0; --a) {
    long r = res_[static_cast<size_t>(a)];
    long i = flat % r;
    flat /= r;
    x[a] = box_.lo[a] + (static_cast<double>(i) + 0.5) * cell_[static_cast<size_t>(a)];
  }
  return x;
}

long GridKForm::flat_index(const std::array<int, kMaxDim>& idx) const {
  long f = 0;
  for (int a = 0; a < n_; ++a) f = f * res_[static_cast<size_t>(a)] + idx[static_cast<size_t>(a)];
  return f;
}

void GridKForm::add_slice(double time, std::vector<double> data) {
  if (static_cast<long>(data.size()) != nodes_ * channels_)
    throw std::invalid_argument("GridKForm::add_slice: wrong data size");
  times_.push_back(time);
  data_.push_back(std::move(data));
}

int GridKForm::nearest_slice(double t) const {
  if (times_.empty()) throw std::runtime_error("GridKForm: no slices");
  int best = 0;
  double d = std::abs(times_[0] - t);
  for (int s = 1; s < slice_count(); ++s) {
    double ds = std::abs(times_[static_cast<size_t>(s)] - t);
    if (ds < d) {
      d = ds;
      best = s;
    }
  }
  return best;
}

FormValue GridKForm::eval(double t, const Vec& x) const {
  const std::vector<double>& data = data_[static_cast<size_t>(nearest_slice(t))];
  // Multilinear interpolation on the cell-center lattice, clamped at the rim.
  std::array<int, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  for (int a = 0; a < n_; ++a) {
    double u = (x[a] - box_.lo[a]) / cell_[static_cast<size_t>(a)] - 0.5;
    int ra = res_[static_cast<size_t>(a)];
    if (ra == 1) {
      base[static_cast<size_t>(a)] = 0;
      frac[static_cast<size_t>(a)] = 0.0;
      continue;
    }
    double fl = std::floor(u);
    int i0 = static_cast<int>(fl);
    double fr = u - fl;
    if (i0 < 0) {
      i0 = 0;
      fr = 0.0;
    } else if (i0 > ra - 2) {
      i0 = ra - 2;
      fr = 1.0;
    }
    base[static_cast<size_t>(a)] = i0;
    frac[static_cast<size_t>(a)] = fr;
  }
  FormValue out(n_, k_);
  const int corners = 1 << n_;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::array<int, kMaxDim> idx = base;
    for (int a = 0; a < n_; ++a) {
      if (c & (1 << a)) {
        w *= frac[static_cast<size_t>(a)];
        idx[static_cast<size_t>(a)] += (res_[static_cast<size_t>(a)] > 1) ? 1 : 0;
      } else {
        w *= 1.0 - frac[static_cast<size_t>(a)];
      }
    }
    if (w == 0.0) continue;
    long node = flat_index(idx);
    for (int ch = 0; ch < channels_; ++ch)
      out[ch] += w * data[static_cast<size_t>(ch) * static_cast<size_t>(nodes_) +
                          static_cast<size_t>(node)];
  }
  return out;
}

namespace {
void write_u64(std::ofstream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}
uint64_t read_u64(std::ifstream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}
void write_f64(std::ofstream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  write_u64(os, u);
}
double read_f64(std::ifstream& is) {
  uint64_t u = read_u64(is);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}
}  // namespace

void GridKForm::save(const std::string& path) const {
  if (slice_count() != 1)
    throw std::runtime_error("GridKForm::save: exactly one time slice per file");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("GridKForm::save: cannot open " + path);
  write_u64(os, static_cast<uint64_t>(n_));
  write_u64(os, static_cast<uint64_t>(k_));
  for (int a = 0; a < n_; ++a) write_u64(os, static_cast<uint64_t>(res_[static_cast<size_t>(a)]));
  for (int a = 0; a < n_; ++a) write_f64(os, box_.lo[a]);
  for (int a = 0; a < n_; ++a) write_f64(os, box_.hi[a]);
  for (double v : data_[0]) write_f64(os, v);
  os.close();

  nlohmann::json j;
  j["n"] = n_;
  j["k"] = k_;
  std::vector<int> res(res_.begin(), res_.begin() + n_);
  j["resolution"] = res;
  std::vector<double> lo(n_), hi(n_);
  for (int a = 0; a < n_; ++a) {
    lo[static_cast<size_t>(a)] = box_.lo[a];
    hi[static_cast<size_t>(a)] = box_.hi[a];
  }
  j["box_lo"] = lo;
  j["box_hi"] = hi;
  j["channels"] = channels_;
  j["layout"] = "channel-major, row-major over axes, little-endian float64";
  std::ofstream js(path + ".json");
  js << j.dump(2) << "\n";
}

GridKForm GridKForm::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("GridKForm::load: cannot open " + path);
  int n = static_cast<int>(read_u64(is));
  int k = static_cast<int>(read_u64(is));
  if (n < 1 || n > kMaxDim || k < 0 || k > n)
    throw std::runtime_error("GridKForm::load: corrupt header");
  std::array<int, kMaxDim> res{};
  for (int a = 0; a < n; ++a) res[static_cast<size_t>(a)] = static_cast<int>(read_u64(is));
  GridBox box;
  box.lo = Vec(n);
  box.hi = Vec(n);
  for (int a = 0; a < n; ++a) box.lo[a] = read_f64(is);
  for (int a = 0; a < n; ++a) box.hi[a] = read_f64(is);
  GridKForm g(n, k, box, res);
  std::vector<double> data(static_cast<size_t>(g.nodes()) * static_cast<size_t>(g.channels()));
  for (double& v : data) v = read_f64(is);
  if (!is) throw std::runtime_error("GridKForm::load: truncated file");
  g.add_slice(0.0, std::move(data));
  return g;
}

// ---------------------------------------------------------------------------
// KFormField

KFormField KFormField::analytic(int n, int k, EvalFn eval) {
  KFormField f;
  f.n_ = n;
  f.k_ = k;
  f.eval_ = std::move(eval);
  return f;
}

KFormField KFormField::analytic(int n, int k, EvalFn eval, DerivFn deriv) {
  KFormField f = analytic(n, k, std::move(eval));
  f.deriv_ = std::move(deriv);
  return f;
}

KFormField KFormField::grid(GridKForm g) {
  KFormField f;
  f.n_ = g.n();
  f.k_ = g.k();
  f.grid_ = std::make_shared<const GridKForm>(std::move(g));
  return f;
}

KFormField KFormField::zero(int n, int k) {
  return analytic(
      n, k, [n, k](double, const Vec&) { return FormValue(n, k); },
      [n, k](double, const Vec&, int) { return FormValue(n, k); });
}

FormValue KFormField::operator()(double t, const Vec& x) const {
  if (grid_) return grid_->eval(t, x);
  return eval_(t, x);
}

const GridKForm& KFormField::grid_data() const {
  if (!grid_) throw std::runtime_error("KFormField: not a grid field");
  return *grid_;
}

double KFormField::fd_step(const Vec& x) const {
  if (grid_) return grid_->min_cell_width();
  return 1e-4 * (1.0 + x.norm());
}

FormValue KFormField::derivative(double t, const Vec& x, int axis) const {
  if (deriv_) return deriv_(t, x, axis);
  return fd_derivative(*this, t, x, axis);
}

FormValue fd_derivative(const KFormField& f, double t, const Vec& x, int axis) {
  if (axis < 1 || axis > f.n()) throw std::invalid_argument("fd_derivative: bad axis");
  const double h = f.fd_step(x);
  if (f.is_grid()) {
    const GridBox& box = f.grid_data().box();
    for (int a = 0; a < f.n(); ++a)
      if (x[a] - h < box.lo[a] || x[a] + h > box.hi[a])
        throw std::domain_error("fd_derivative: point too close to grid boundary");
  }
  Vec xp = x, xm = x;
  xp[axis - 1] += h;
  xm[axis - 1] -= h;
  FormValue d = f(t, xp);
  d -= f(t, xm);
  d *= 1.0 / (2.0 * h);
  return d;
}

// ---------------------------------------------------------------------------
// QuadratureGrid

QuadratureGrid::QuadratureGrid(GridBox box, std::array<int, kMaxDim> nodes_per_axis)
    : box_(std::move(box)), nodes_(nodes_per_axis) {
  count_ = 1;
  cellvol_ = 1.0;
  for (int a = 0; a < box_.n(); ++a) {
    if (nodes_[static_cast<size_t>(a)] < 1)
      throw std::invalid_argument("QuadratureGrid: node count must be positive");
    count_ *= nodes_[static_cast<size_t>(a)];
    cell_[static_cast<size_t>(a)] =
        (box_.hi[a] - box_.lo[a]) / nodes_[static_cast<size_t>(a)];
    cellvol_ *= cell_[static_cast<size_t>(a)];
  }
}

double QuadratureGrid::min_cell_width() const {
  double m = cell_[0];
  for (int a = 1; a < n(); ++a) m = std::min(m, cell_[static_cast<size_t>(a)]);
  return m;
}

QuadratureGrid& QuadratureGrid::exclude_ball(const Vec& center, double radius) {
  for (int a = 0; a < n(); ++a)
    if (center[a] - radius < box_.lo[a] || center[a] + radius > box_.hi[a])
      throw std::invalid_argument("QuadratureGrid: excluded ball must lie strictly inside box");
  excluded_ = {center, radius};
  return *this;
}

QuadratureGrid& QuadratureGrid::clear_excluded_ball() {
  excluded_.reset();
  return *this;
}

QuadratureGrid& QuadratureGrid::restrict_to_ball(const Vec& center, double radius) {
  include_ = {center, radius};
  return *this;
}

Vec QuadratureGrid::node(long flat) const {
  Vec x(n());
  for (int a = n() - 1; a >= 0; --a) {
    long r = nodes_[static_cast<size_t>(a)];
    long i = flat % r;
    flat /= r;
    x[a] = box_.lo[a] + (static_cast<double>(i) + 0.5) * cell_[static_cast<size_t>(a)];
  }
  return x;
}

bool QuadratureGrid::active(const Vec& x) const {
  if (excluded_ && (x - excluded_->first).norm() < excluded_->second) return false;
  if (include_ && (x - include_->first).norm() > include_->second) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Quadrature reductions

double l2_inner(const KFormField& a, const KFormField& b, const QuadratureGrid& grid, double t) {
  if (a.n() != b.n() || a.k() != b.k())
    throw std::invalid_argument("l2_inner: degree/dimension mismatch");
  double s = 0.0;
  grid.for_each_node([&](const Vec& x, double w) { s += w * bundle_dot(a(t, x), b(t, x)); });
  return s;
}

double lp_norm(const KFormField& a, double p, const QuadratureGrid& grid, double t) {
  if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
  double s = 0.0;
  grid.for_each_node([&](const Vec& x, double w) { s += w * std::pow(bundle_norm(a(t, x)), p); });
  return std::pow(s, 1.0 / p);
}

double w1q_norm(const VectorField& b, double q, const QuadratureGrid& grid, double t) {
  double s0 = 0.0, s1 = 0.0;
  grid.for_each_node([&](const Vec& x, double w) {
    s0 += w * std::pow(b(t, x).norm(), q);
    s1 += w * std::pow(b.jacobian(t, x).norm(), q);
  });
  return std::pow(s0, 1.0 / q) + std::pow(s1, 1.0 / q);
}

std::pair<double, double> check_parabolicity(const std::vector<VectorField>& xis,
                                             const std::vector<Vec>& points,
                                             const std::vector<double>& times, int random_dirs,
                                             uint64_t seed) {
  if (xis.empty()) throw std::invalid_argument("check_parabolicity: empty diffusion list");
  const int n = xis.front().n();
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  auto probe = [&](double t, const Vec& x, const Vec& v) {
    double s = 0.0;
    for (const VectorField& xi : xis) {
      double d = xi(t, x).dot(v);
      s += d * d;
    }
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  };
  for (double t : times)
    for (size_t pi = 0; pi < points.size(); ++pi) {
      const Vec& x = points[pi];
      for (int a = 0; a < n; ++a) {
        Vec e = Vec::Zero(n);
        e[a] = 1.0;
        probe(t, x, e);
      }
      for (int r = 0; r < random_dirs; ++r) {
        Vec v(n);
        for (int a = 0; a < n; ++a)
          v[a] = rng::normal(seed, 0x70617261u + pi, static_cast<uint64_t>(r),
                             static_cast<uint64_t>(a));
        double nrm = v.norm();
        if (nrm < 1e-12) continue;
        probe(t, x, Vec(v / nrm));
      }
    }
  return {lo, hi};
}

double holder_quotient_estimate(const VectorField& f, double alpha, const GridBox& box,
                                int pairs, uint64_t seed) {
  const int n = box.n();
  double q = 0.0;
  for (int p = 0; p < pairs; ++p) {
    Vec x(n), y(n);
    for (int a = 0; a < n; ++a) {
      x[a] = rng::uniform_in(box.lo[a], box.hi[a], seed, 0x686F6C64, static_cast<uint64_t>(p),
                             static_cast<uint64_t>(a));
      y[a] = rng::uniform_in(box.lo[a], box.hi[a], seed, 0x686F6C65, static_cast<uint64_t>(p),
                             static_cast<uint64_t>(a));
    }
    double d = (x - y).norm();
    if (d < 1e-12) continue;
    q = std::max(q, (f(0.0, x) - f(0.0, y)).norm() / std::pow(d, alpha));
  }
  return q;
}

// ---------------------------------------------------------------------------
// TestForm

namespace {
// Profile exp(1 - 1/(1 - s)) with s = |x/R|^2; value 1 at the origin,
// identically 0 for |x| >= R.
double bump_value(const Vec& x, double radius) {
  double s = x.squaredNorm() / (radius * radius);
  if (s >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s));
}
Vec bump_gradient(const Vec& x, double radius) {
  double s = x.squaredNorm() / (radius * radius);
  if (s >= 1.0) return Vec(Vec::Zero(x.size()));
  double b = std::exp(1.0 - 1.0 / (1.0 - s));
  double g = -2.0 / (radius * radius) / ((1.0 - s) * (1.0 - s));
  return Vec(b * g * x);
}
}  // namespace

TestForm::TestForm(int n, int k, double radius, std::vector<Channel> channels)
    : n_(n), k_(k), radius_(radius) {
  const int nch = static_cast<int>(binomial(n, k));
  if (static_cast<int>(channels.size()) != nch)
    throw std::invalid_argument("TestForm: need one polynomial per channel");
  auto chans = std::make_shared<std::vector<Channel>>(std::move(channels));
  double R = radius;
  auto eval = [n, k, nch, R, chans](double, const Vec& x) {
    FormValue v(n, k);
    double b = bump_value(x, R);
    if (b == 0.0) return v;
    for (int c = 0; c < nch; ++c) v[c] = b * (*chans)[static_cast<size_t>(c)].value(x);
    return v;
  };
  auto deriv = [n, k, nch, R, chans](double, const Vec& x, int axis) {
    FormValue v(n, k);
    double b = bump_value(x, R);
    if (b == 0.0) return v;
    Vec gb = bump_gradient(x, R);
    for (int c = 0; c < nch; ++c) {
      const Channel& ch = (*chans)[static_cast<size_t>(c)];
      v[c] = gb[axis - 1] * ch.value(x) + b * ch.gradient(x)[axis - 1];
    }
    return v;
  };
  field_ = KFormField::analytic(n, k, eval, deriv);
}

TestForm TestForm::bump(int n, int k, double radius, int channel) {
  const int nch = static_cast<int>(binomial(n, k));
  std::vector<Channel> chans;
  for (int c = 0; c < nch; ++c) {
    double v = (c == channel) ? 1.0 : 0.0;
    chans.push_back({[v](const Vec&) { return v; },
                     [n](const Vec&) { return Vec(Vec::Zero(n)); }});
  }
  return TestForm(n, k, radius, std::move(chans));
}

TestForm TestForm::random(int n, int k, uint64_t seed, uint64_t tag, double min_radius,
                          double max_radius) {
  const int nch = static_cast<int>(binomial(n, k));
  double radius = rng::uniform_in(min_radius, max_radius, seed, tag, 0, 0);
  std::vector<Channel> chans;
  for (int c = 0; c < nch; ++c) {
    // Quadratic polynomial a0 + sum a_i x_i + sum b_i x_i^2 per channel.
    double a0 = rng::uniform_in(-1.0, 1.0, seed, tag, 1, static_cast<uint64_t>(c));
    std::vector<double> a1(static_cast<size_t>(n)), a2(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      a1[static_cast<size_t>(i)] =
          rng::uniform_in(-1.0, 1.0, seed, tag, 2, static_cast<uint64_t>(c * kMaxDim + i));
      a2[static_cast<size_t>(i)] =
          rng::uniform_in(-1.0, 1.0, seed, tag, 3, static_cast<uint64_t>(c * kMaxDim + i));
    }
    chans.push_back({[a0, a1, a2, n](const Vec& x) {
                       double v = a0;
                       for (int i = 0; i < n; ++i)
                         v += a1[static_cast<size_t>(i)] * x[i] +
                              a2[static_cast<size_t>(i)] * x[i] * x[i];
                       return v;
                     },
                     [a1, a2, n](const Vec& x) {
                       Vec g(n);
                       for (int i = 0; i < n; ++i)
                         g[i] = a1[static_cast<size_t>(i)] +
                                2.0 * a2[static_cast<size_t>(i)] * x[i];
                       return g;
                     }});
  }
  TestForm out(n, k, radius, std::move(chans));
  // Rescale so the sup bundle norm is about 1.
  double sup = out.sup_norm_estimate();
  if (sup < 1e-12) sup = 1.0;
  KFormField f = out.field_;
  out.field_ = KFormField::analytic(
      n, k, [f, sup](double t, const Vec& x) { return FormValue(f(t, x) * (1.0 / sup)); },
      [f, sup](double t, const Vec& x, int axis) {
        return FormValue(f.derivative(t, x, axis) * (1.0 / sup));
      });
  return out;
}

double TestForm::sup_norm_estimate(int samples_per_axis) const {
  double m = 0.0;
  const int s = samples_per_axis;
  std::vector<int> idx(static_cast<size_t>(n_), 0);
  Vec x(n_);
  bool done = false;
  while (!done) {
    for (int a = 0; a < n_; ++a)
      x[a] = -radius_ + 2.0 * radius_ * (idx[static_cast<size_t>(a)] + 0.5) / s;
    m = std::max(m, bundle_norm(field_(0.0, x)));
    int a = 0;
    while (a < n_) {
      if (++idx[static_cast<size_t>(a)] < s) break;
      idx[static_cast<size_t>(a)] = 0;
      ++a;
    }
    done = (a == n_);
  }
  return m;
}

GridKForm sample_to_grid(const KFormField& f, const GridBox& box,
                         const std::array<int, kMaxDim>& res, double t) {
  GridKForm g(f.n(), f.k(), box, res);
  std::vector<double> data(static_cast<size_t>(g.nodes()) * static_cast<size_t>(g.channels()));
  for (long node = 0; node < g.nodes(); ++node) {
    FormValue v = f(t, g.node_point(node));
    for (int c = 0; c < g.channels(); ++c)
      data[static_cast<size_t>(c) * static_cast<size_t>(g.nodes()) + static_cast<size_t>(node)] =
          v[c];
  }
  g.add_slice(t, std::move(data));
  return g;
}

}  // namespace lieflow
