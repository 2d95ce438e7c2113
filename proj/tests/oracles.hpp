#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <vector>

#include "lieflow/fields.hpp"
#include "lieflow/forms.hpp"
#include "lieflow/rng.hpp"

namespace lieflow::oracle {

// Wedge by subset splitting: for a sorted target M of degree k1+k2, the
// coefficient is the signed sum over k1-subsets S of M of a(S) * b(M\S),
// where the sign is the parity of the shuffle that interleaves S and M\S.
inline FormValue wedge_by_shuffles(const FormValue& a, const FormValue& b) {
  const int n = a.n();
  const int k1 = a.k(), k2 = b.k(), k = k1 + k2;
  FormValue out(n, k);
  const auto& set = MultiIndexSet::get(n, k);
  for (int pos = 0; pos < set.size(); ++pos) {
    const MultiIndex& M = set[pos];
    double acc = 0.0;
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
      if (__builtin_popcount(mask) != k1) continue;
      std::vector<int> s, t;
      for (int i = 0; i < k; ++i)
        (mask & (1u << i) ? s : t).push_back(M.axis(i));
      // shuffle sign: count pairs (i in s, j in t) appearing out of order in M
      int inv = 0;
      for (int i : s)
        for (int j : t)
          if (i > j) ++inv;
      double sign = (inv % 2) ? -1.0 : 1.0;
      acc += sign * a.at(std::span<const int>(s.data(), s.size())) *
             b.at(std::span<const int>(t.data(), t.size()));
    }
    out[pos] = acc;
  }
  return out;
}

// Push-forward / pull-back contraction over *all* index tuples, using the
// antisymmetric extension of the coefficients (no minor determinants).
inline FormValue contract_all_tuples(const FormValue& v, const Mat& dmap) {
  const int n = v.n(), k = v.k();
  FormValue out(n, k);
  const auto& set = MultiIndexSet::get(n, k);
  std::vector<int> tuple(static_cast<size_t>(k));
  for (int jp = 0; jp < set.size(); ++jp) {
    const MultiIndex& J = set[jp];
    double acc = 0.0;
    // iterate all n^k tuples (i1..ik)
    long total = 1;
    for (int a = 0; a < k; ++a) total *= n;
    for (long flat = 0; flat < total; ++flat) {
      long rem = flat;
      for (int a = 0; a < k; ++a) {
        tuple[static_cast<size_t>(a)] = static_cast<int>(rem % n) + 1;
        rem /= n;
      }
      double c = v.at(std::span<const int>(tuple.data(), tuple.size()));
      if (c == 0.0) continue;
      double prod = 1.0;
      for (int a = 0; a < k; ++a) prod *= dmap(tuple[static_cast<size_t>(a)] - 1, J.axis(a) - 1);
      acc += c * prod;
    }
    out[jp] = acc;
  }
  return out;
}

inline FormValue random_form(int n, int k, uint64_t seed, uint64_t tag) {
  FormValue f(n, k);
  for (int i = 0; i < f.size(); ++i)
    f[i] = rng::uniform_in(-1.0, 1.0, seed, tag, 10, static_cast<uint64_t>(i));
  return f;
}

}  // namespace lieflow::oracle
