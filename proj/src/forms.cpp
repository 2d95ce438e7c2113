#include "lieflow/forms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace lieflow {

long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

MultiIndexSet::MultiIndexSet(int n, int k) : n_(n), k_(k) {
  if (n < 0 || n > kMaxDim || k < 0 || k > n)
    throw std::invalid_argument("MultiIndexSet: need 0 <= k <= n <= 8");
  list_.reserve(static_cast<size_t>(binomial(n, k)));
  MultiIndex m;
  m.n = n;
  m.k = k;
  if (k == 0) {
    list_.push_back(m);
    return;
  }
  std::array<int, kMaxDim> a{};
  for (int i = 0; i < k; ++i) a[static_cast<size_t>(i)] = i + 1;
  while (true) {
    for (int i = 0; i < k; ++i) m.axes[static_cast<size_t>(i)] = static_cast<uint8_t>(a[static_cast<size_t>(i)]);
    list_.push_back(m);
    int i = k - 1;
    while (i >= 0 && a[static_cast<size_t>(i)] == n - k + 1 + i) --i;
    if (i < 0) break;
    ++a[static_cast<size_t>(i)];
    for (int j = i + 1; j < k; ++j) a[static_cast<size_t>(j)] = a[static_cast<size_t>(j - 1)] + 1;
  }
}

const MultiIndexSet& MultiIndexSet::get(int n, int k) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, MultiIndexSet> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({n, k});
  if (it == cache.end())
    it = cache.emplace(std::make_pair(n, k), MultiIndexSet(n, k)).first;
  return it->second;
}

int MultiIndexSet::position(std::span<const int> sorted_axes) const {
  // Combinatorial ranking in the lexicographic order.
  if (static_cast<int>(sorted_axes.size()) != k_)
    throw std::invalid_argument("MultiIndexSet::position: wrong degree");
  long rank = 0;
  int prev = 0;
  for (int j = 0; j < k_; ++j) {
    int aj = sorted_axes[static_cast<size_t>(j)];
    for (int v = prev + 1; v < aj; ++v) rank += binomial(n_ - v, k_ - j - 1);
    prev = aj;
  }
  return static_cast<int>(rank);
}

int canonicalize(std::span<int> axes) {
  int sign = 1;
  const int k = static_cast<int>(axes.size());
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j + 1 < k - i; ++j) {
      if (axes[static_cast<size_t>(j)] == axes[static_cast<size_t>(j + 1)]) return 0;
      if (axes[static_cast<size_t>(j)] > axes[static_cast<size_t>(j + 1)]) {
        std::swap(axes[static_cast<size_t>(j)], axes[static_cast<size_t>(j + 1)]);
        sign = -sign;
      }
    }
  }
  for (int i = 0; i + 1 < k; ++i)
    if (axes[static_cast<size_t>(i)] == axes[static_cast<size_t>(i + 1)]) return 0;
  return sign;
}

namespace {

void check_nk(int n, int k) {
  if (n < 1 || n > kMaxDim || k < 0 || k > n)
    throw std::invalid_argument("form value: need 1 <= n <= 8, 0 <= k <= n");
}

template <class V>
double value_at(const V& v, std::span<const int> axes) {
  std::array<int, kMaxDim> tmp{};
  std::copy(axes.begin(), axes.end(), tmp.begin());
  std::span<int> s(tmp.data(), axes.size());
  int sign = canonicalize(s);
  if (sign == 0) return 0.0;
  const auto& set = MultiIndexSet::get(v.n(), v.k());
  return sign * v[set.position(std::span<const int>(tmp.data(), axes.size()))];
}

template <class V>
void add_value_at(V& v, std::span<const int> axes, double val) {
  std::array<int, kMaxDim> tmp{};
  std::copy(axes.begin(), axes.end(), tmp.begin());
  std::span<int> s(tmp.data(), axes.size());
  int sign = canonicalize(s);
  if (sign == 0) return;
  const auto& set = MultiIndexSet::get(v.n(), v.k());
  v[set.position(std::span<const int>(tmp.data(), axes.size()))] += sign * val;
}

}  // namespace

FormValue::FormValue(int n, int k) : n_(n), k_(k) {
  check_nk(n, k);
  size_ = static_cast<int>(binomial(n, k));
}

FormValue FormValue::basis(int n, std::span<const int> axes, double coeff) {
  FormValue f(n, static_cast<int>(axes.size()));
  f.add_at(axes, coeff);
  return f;
}

double FormValue::at(std::span<const int> axes) const { return value_at(*this, axes); }
void FormValue::add_at(std::span<const int> axes, double v) { add_value_at(*this, axes, v); }

FormValue& FormValue::operator+=(const FormValue& o) {
  if (n_ != o.n_ || k_ != o.k_) throw std::invalid_argument("FormValue: degree/dimension mismatch");
  for (int i = 0; i < size_; ++i) c_[static_cast<size_t>(i)] += o.c_[static_cast<size_t>(i)];
  return *this;
}

FormValue& FormValue::operator-=(const FormValue& o) {
  if (n_ != o.n_ || k_ != o.k_) throw std::invalid_argument("FormValue: degree/dimension mismatch");
  for (int i = 0; i < size_; ++i) c_[static_cast<size_t>(i)] -= o.c_[static_cast<size_t>(i)];
  return *this;
}

FormValue& FormValue::operator*=(double s) {
  for (int i = 0; i < size_; ++i) c_[static_cast<size_t>(i)] *= s;
  return *this;
}

MultiVectorValue::MultiVectorValue(int n, int k) : n_(n), k_(k) {
  check_nk(n, k);
  size_ = static_cast<int>(binomial(n, k));
}

MultiVectorValue MultiVectorValue::basis(int n, std::span<const int> axes, double coeff) {
  MultiVectorValue u(n, static_cast<int>(axes.size()));
  u.add_at(axes, coeff);
  return u;
}

double MultiVectorValue::at(std::span<const int> axes) const { return value_at(*this, axes); }
void MultiVectorValue::add_at(std::span<const int> axes, double v) { add_value_at(*this, axes, v); }

MultiVectorValue& MultiVectorValue::operator+=(const MultiVectorValue& o) {
  if (n_ != o.n_ || k_ != o.k_) throw std::invalid_argument("MultiVectorValue: degree/dimension mismatch");
  for (int i = 0; i < size_; ++i) c_[static_cast<size_t>(i)] += o.c_[static_cast<size_t>(i)];
  return *this;
}

MultiVectorValue& MultiVectorValue::operator*=(double s) {
  for (int i = 0; i < size_; ++i) c_[static_cast<size_t>(i)] *= s;
  return *this;
}

FormValue wedge(const FormValue& a, const FormValue& b) {
  if (a.n() != b.n()) throw std::invalid_argument("wedge: dimension mismatch");
  const int n = a.n();
  const int k = a.k() + b.k();
  if (k > n) throw std::invalid_argument("wedge: degree overflow (k1 + k2 > n)");
  FormValue out(n, k);
  const auto& sa = MultiIndexSet::get(n, a.k());
  const auto& sb = MultiIndexSet::get(n, b.k());
  for (int ia = 0; ia < sa.size(); ++ia) {
    const double ca = a[ia];
    if (ca == 0.0) continue;
    const MultiIndex& I = sa[ia];
    for (int ib = 0; ib < sb.size(); ++ib) {
      const double cb = b[ib];
      if (cb == 0.0) continue;
      const MultiIndex& J = sb[ib];
      // Sign of merging two sorted disjoint tuples = parity of crossing pairs.
      bool repeated = false;
      int crossings = 0;
      for (int p = 0; p < I.k && !repeated; ++p)
        for (int q = 0; q < J.k; ++q) {
          if (I.axis(p) == J.axis(q)) {
            repeated = true;
            break;
          }
          if (I.axis(p) > J.axis(q)) ++crossings;
        }
      if (repeated) continue;
      std::array<int, kMaxDim> merged{};
      for (int p = 0; p < I.k; ++p) merged[static_cast<size_t>(p)] = I.axis(p);
      for (int q = 0; q < J.k; ++q) merged[static_cast<size_t>(I.k + q)] = J.axis(q);
      std::sort(merged.begin(), merged.begin() + k);
      const auto& sk = MultiIndexSet::get(n, k);
      int pos = sk.position(std::span<const int>(merged.data(), static_cast<size_t>(k)));
      out[pos] += ((crossings % 2) ? -1.0 : 1.0) * ca * cb;
    }
  }
  return out;
}

double pairing(const MultiVectorValue& u, const FormValue& k) {
  if (u.n() != k.n() || u.k() != k.k())
    throw std::invalid_argument("pairing: degree/dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < u.size(); ++i) s += u[i] * k[i];
  return s;
}

MultiVectorValue sharp(const FormValue& k) {
  MultiVectorValue u(k.n(), k.k());
  for (int i = 0; i < k.size(); ++i) u[i] = k[i];
  return u;
}

FormValue flat(const MultiVectorValue& u) {
  FormValue k(u.n(), u.k());
  for (int i = 0; i < u.size(); ++i) k[i] = u[i];
  return k;
}

double bundle_norm(const FormValue& k) {
  double s = 0.0;
  for (int i = 0; i < k.size(); ++i) s += k[i] * k[i];
  return std::sqrt(s);
}

double bundle_norm(const MultiVectorValue& u) {
  double s = 0.0;
  for (int i = 0; i < u.size(); ++i) s += u[i] * u[i];
  return std::sqrt(s);
}

double bundle_dot(const FormValue& a, const FormValue& b) {
  if (a.n() != b.n() || a.k() != b.k())
    throw std::invalid_argument("bundle_dot: degree/dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace lieflow
