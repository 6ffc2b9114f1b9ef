#pragma once

// Slab sets on the nm-torus.  For q in Z^n \ {0}, delta in (0, 1/2):
//
//   B(q, delta)  = { X in [0,1]^{n x m} : ||qX||_infty < delta }
//                  (|| . || = distance to the nearest integer vector)
//   B'(q, delta) = same, with the witness p required to satisfy
//                  gcd(p, q) = 1 (primitive correction)
//
// Exact Lebesgue measures: |B| = (2 delta)^m, and |B'| = (2 delta)^m *
// prod_{p | content(q)} (1 - p^-m).  Non-parallel pairs of B-slabs are
// independent (measure of the intersection is the product); parallel
// primitive pairs only get an upper bound C (delta1 delta2)^m, audited by
// Monte Carlo elsewhere.

#include "kgx/approx.hpp"
#include "kgx/arith.hpp"
#include "kgx/intvec.hpp"
#include "kgx/rational.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace kgx {

struct SlabSpec {
  IntVec q;
  unsigned m = 1;
  Rat delta;
  bool coprime = false;  // true selects B'

  void validate() const {
    q.require_nonzero();
    if (m < 1) throw domain_error("SlabSpec: m must be >= 1");
    if (!(sgn(delta) > 0 && delta < Rat(1, 2)))
      throw domain_error("SlabSpec: delta must lie in (0, 1/2)");
  }

  unsigned n() const { return q.n(); }
};

inline Rat measure_exact(const SlabSpec& s) {
  s.validate();
  Rat r = rat_pow(2 * s.delta, static_cast<long>(s.m));
  if (s.coprime) r *= coprime_density(s.q.content_factored(), s.m);
  return r;
}

// Certified enclosure for |B'|.  m = 1 is exact on both sides; for m >= 2 the
// lower constant is the uniform floor 6079/10000 < prod_p (1 - p^-2).
inline std::pair<Rat, Rat> measure_bounds(const SlabSpec& s) {
  s.validate();
  if (!s.coprime) throw domain_error("measure_bounds: defined for primitive-witness slabs");
  Rat full = rat_pow(2 * s.delta, static_cast<long>(s.m));
  if (s.m == 1) {
    Rat exact = full * coprime_density(s.q.content_factored(), 1);
    return {exact, exact};
  }
  return {coprime_density_floor() * full, full};
}

// |B(q1,d1) cap B(q2,d2)| for non-parallel q1, q2: exact product.
inline Rat intersection_measure_nonparallel(const SlabSpec& a, const SlabSpec& b) {
  a.validate();
  b.validate();
  if (a.coprime || b.coprime)
    throw domain_error("intersection_measure_nonparallel: plain slabs only");
  if (a.q.n() != b.q.n() || a.m != b.m)
    throw domain_error("intersection_measure_nonparallel: shape mismatch");
  if (a.q.parallel_to(b.q))
    throw domain_error("intersection_measure_nonparallel: vectors are parallel");
  return measure_exact(a) * measure_exact(b);
}

// C (d1 d2)^m bound for primitive pairs with q1 != +-q2.
inline Rat intersection_upper_bound(const SlabSpec& a, const SlabSpec& b, const Rat& C) {
  a.validate();
  b.validate();
  if (!a.coprime || !b.coprime)
    throw domain_error("intersection_upper_bound: primitive-witness slabs only");
  if (a.q.n() != b.q.n() || a.m != b.m)
    throw domain_error("intersection_upper_bound: shape mismatch");
  bool same = a.q == b.q;
  bool neg = [&] {
    for (std::size_t i = 0; i < a.q.q.size(); ++i)
      if (a.q.q[i] != -b.q.q[i]) return false;
    return true;
  }();
  if (same || neg) throw domain_error("intersection_upper_bound: q1 = +-q2 excluded");
  if (sgn(C) <= 0) throw domain_error("intersection_upper_bound: C must be positive");
  return C * rat_pow(a.delta * b.delta, static_cast<long>(a.m));
}

// ---------------------------------------------------------------------------
// pointwise membership
// ---------------------------------------------------------------------------

// X is an n x m real matrix in row-major storage: X[i*m + j].
struct Matrix {
  unsigned n = 0, m = 0;
  std::vector<double> a;

  static Matrix zero(unsigned n, unsigned m) { return Matrix{n, m, std::vector<double>(std::size_t(n) * m, 0.0)}; }
  double at(unsigned i, unsigned j) const { return a[std::size_t(i) * m + j]; }
  double& at(unsigned i, unsigned j) { return a[std::size_t(i) * m + j]; }
};

// max_j || (qX)_j ||  (distance of the image point to Z^m).
inline double slab_distance(const Matrix& X, const IntVec& q) {
  q.require_nonzero();
  if (q.n() != X.n) throw domain_error("slab_distance: dimension mismatch");
  double worst = 0.0;
  for (unsigned j = 0; j < X.m; ++j) {
    double y = 0.0;
    for (unsigned i = 0; i < X.n; ++i) y += static_cast<double>(q.q[i]) * X.at(i, j);
    double d = std::abs(y - std::nearbyint(y));
    worst = std::max(worst, d);
  }
  return worst;
}

// Strict membership; points at exactly half-integer distance are outside
// (delta < 1/2 makes them unreachable anyway).  For B' the witness p is the
// unique nearest integer vector, and gcd(p, q) = 1 is required.
inline bool slab_membership(const Matrix& X, const SlabSpec& s) {
  s.validate();
  if (s.q.n() != X.n || s.m != X.m) throw domain_error("slab_membership: shape mismatch");
  double delta = to_double(s.delta);
  std::uint64_t g = 0;
  for (unsigned j = 0; j < X.m; ++j) {
    double y = 0.0;
    for (unsigned i = 0; i < X.n; ++i) y += static_cast<double>(s.q.q[i]) * X.at(i, j);
    double r = std::nearbyint(y);
    if (!(std::abs(y - r) < delta)) return false;
    if (s.coprime) {
      long long p = -static_cast<long long>(r);
      std::uint64_t ap = p < 0 ? static_cast<std::uint64_t>(-(p + 1)) + 1 : static_cast<std::uint64_t>(p);
      g = std::gcd(g, ap);
    }
  }
  if (s.coprime) {
    g = std::gcd(g, s.q.content());
    return g == 1;
  }
  return true;
}

// y = qX mod 1 in [0,1)^m.  Pushing forward Lebesgue measure through this map
// is measure preserving; it collapses parallel-pair intersections to n=1.
inline std::vector<double> torus_map(const Matrix& X, const IntVec& q) {
  q.require_nonzero();
  if (q.n() != X.n) throw domain_error("torus_map: dimension mismatch");
  std::vector<double> y(X.m);
  for (unsigned j = 0; j < X.m; ++j) {
    double t = 0.0;
    for (unsigned i = 0; i < X.n; ++i) t += static_cast<double>(q.q[i]) * X.at(i, j);
    double f = t - std::floor(t);
    if (f >= 1.0) f = 0.0;  // guard against floor rounding at the seam
    y[j] = f;
  }
  return y;
}

}  // namespace kgx
