#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace lieflow {

/// Supported ambient dimensions are 1..8; coefficient tables are dense with
/// one entry per sorted multi-index, so the largest table is C(8,4) = 70.
inline constexpr int kMaxDim = 8;
inline constexpr int kMaxCoeffs = 70;

long binomial(int n, int k);

/// One strictly increasing index tuple (i1 < ... < ik), entries in {1..n},
/// identifying the exterior basis element dx_{i1} ^ ... ^ dx_{ik}.
struct MultiIndex {
  int n = 0;
  int k = 0;
  std::array<uint8_t, kMaxDim> axes{};

  int axis(int a) const { return axes[static_cast<size_t>(a)]; }
};

/// Lexicographically ordered enumeration of all C(n,k) sorted multi-indices
/// for fixed (n,k). Instances are interned per (n,k).
class MultiIndexSet {
 public:
  static const MultiIndexSet& get(int n, int k);

  int n() const { return n_; }
  int k() const { return k_; }
  int size() const { return static_cast<int>(list_.size()); }
  const MultiIndex& operator[](int pos) const { return list_[static_cast<size_t>(pos)]; }

  /// Rank of a sorted tuple within the lexicographic enumeration.
  int position(std::span<const int> sorted_axes) const;

 private:
  MultiIndexSet(int n, int k);
  int n_, k_;
  std::vector<MultiIndex> list_;
};

/// Sorts an arbitrary index tuple in place and returns the permutation sign,
/// or 0 if any index repeats.
int canonicalize(std::span<int> axes);

class MultiVectorValue;

/// Antisymmetric coefficient table of a k-form at a single point. The stored
/// coefficient at a sorted multi-index (i1<...<ik) is the component of
/// dx_{i1}^...^dx_{ik}; components at unsorted tuples are defined through the
/// permutation sign.
class FormValue {
 public:
  FormValue() = default;
  FormValue(int n, int k);

  static FormValue basis(int n, std::span<const int> axes, double coeff = 1.0);

  int n() const { return n_; }
  int k() const { return k_; }
  int size() const { return size_; }

  double operator[](int pos) const { return c_[static_cast<size_t>(pos)]; }
  double& operator[](int pos) { return c_[static_cast<size_t>(pos)]; }

  /// Component at an arbitrary (possibly unsorted) index tuple.
  double at(std::span<const int> axes) const;
  /// Adds v to the component at an arbitrary tuple (sign-adjusted).
  void add_at(std::span<const int> axes, double v);

  FormValue& operator+=(const FormValue& o);
  FormValue& operator-=(const FormValue& o);
  FormValue& operator*=(double s);

  friend FormValue operator+(FormValue a, const FormValue& b) { return a += b; }
  friend FormValue operator-(FormValue a, const FormValue& b) { return a -= b; }
  friend FormValue operator*(FormValue a, double s) { return a *= s; }
  friend FormValue operator*(double s, FormValue a) { return a *= s; }

 private:
  int n_ = 0, k_ = 0, size_ = 0;
  std::array<double, kMaxCoeffs> c_{};
};

/// Contravariant counterpart of FormValue (k-vector at a point); identical
/// dense layout over sorted multi-indices.
class MultiVectorValue {
 public:
  MultiVectorValue() = default;
  MultiVectorValue(int n, int k);

  static MultiVectorValue basis(int n, std::span<const int> axes, double coeff = 1.0);

  int n() const { return n_; }
  int k() const { return k_; }
  int size() const { return size_; }

  double operator[](int pos) const { return c_[static_cast<size_t>(pos)]; }
  double& operator[](int pos) { return c_[static_cast<size_t>(pos)]; }

  double at(std::span<const int> axes) const;
  void add_at(std::span<const int> axes, double v);

  MultiVectorValue& operator+=(const MultiVectorValue& o);
  MultiVectorValue& operator*=(double s);
  friend MultiVectorValue operator+(MultiVectorValue a, const MultiVectorValue& b) { return a += b; }
  friend MultiVectorValue operator*(MultiVectorValue a, double s) { return a *= s; }
  friend MultiVectorValue operator*(double s, MultiVectorValue a) { return a *= s; }

 private:
  int n_ = 0, k_ = 0, size_ = 0;
  std::array<double, kMaxCoeffs> c_{};
};

/// Exterior product. Degrees add; k1 + k2 > n is rejected.
FormValue wedge(const FormValue& a, const FormValue& b);

/// Natural pairing <U, K> between a k-vector and a k-form, normalized so
/// that <d/dx_{i1}^...^d/dx_{ik}, dx_{i1}^...^dx_{ik}> = 1.
double pairing(const MultiVectorValue& u, const FormValue& k);

/// Euclidean-metric index raising/lowering: coefficient-identical relabeling.
MultiVectorValue sharp(const FormValue& k);
FormValue flat(const MultiVectorValue& u);

/// Fibre norm induced by the Euclidean bundle metric: l2 norm of the sorted
/// multi-index coefficient vector.
double bundle_norm(const FormValue& k);
double bundle_norm(const MultiVectorValue& u);

/// Pointwise bundle metric (F, G) = sum of products over sorted indices.
double bundle_dot(const FormValue& a, const FormValue& b);

}  // namespace lieflow
