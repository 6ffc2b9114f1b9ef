#pragma once

// Approximating functions psi: N -> [0, 1/2) and their lifts Psi on Z^n.
//
// Four representations, chosen so every quantity the series/counting layer
// needs is exactly representable:
//   Constant  psi(h) = c
//   Power     psi(h) = c * h^-tau   (tau rational; psi(h)^m exact iff tau*m
//                                    is an integer, otherwise double only)
//   Table     finite map h -> psi(h), zero off the table
//   Sparse    finite support given in factored form; stores the *weighted*
//             values w_l = l * psi(l)^m for a fixed exponent m, so block sums
//             and partial series over astronomically large support points stay
//             exact rationals.
//
// truncate_min(psi, c) is pointwise min(psi, c); for Power with c below the
// peak value this is recorded in an explicit cap field.

#include "kgx/arith.hpp"
#include "kgx/factorization.hpp"
#include "kgx/intvec.hpp"
#include "kgx/rational.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kgx {

struct SparseEntry {
  Factorization l;
  Int lv;        // cached value of l
  Rat weighted;  // w_l = l * psi(l)^m  (exact)

  bool operator==(const SparseEntry& o) const { return l == o.l && weighted == o.weighted; }
};

struct ApproxFunction {
  enum class Kind { Constant, Power, Table, Sparse };

  Kind kind = Kind::Constant;
  Rat c;                          // Constant value / Power coefficient
  Rat tau;                        // Power exponent
  std::optional<Rat> cap;         // pointwise min for Power (from truncate_min)
  std::map<std::uint64_t, Rat> table;
  unsigned sparse_m = 0;          // exponent baked into Sparse weights
  std::vector<SparseEntry> support;

  bool operator==(const ApproxFunction& o) const {
    return kind == o.kind && c == o.c && tau == o.tau && cap == o.cap && table == o.table &&
           sparse_m == o.sparse_m && support == o.support;
  }

  // -- constructors ---------------------------------------------------------

  static ApproxFunction constant(Rat v) {
    if (sgn(v) < 0) throw domain_error("ApproxFunction: negative value");
    ApproxFunction f;
    f.kind = Kind::Constant;
    f.c = std::move(v);
    return f;
  }

  static ApproxFunction power(Rat coeff, Rat exponent) {
    if (sgn(coeff) < 0) throw domain_error("ApproxFunction: negative coefficient");
    ApproxFunction f;
    f.kind = Kind::Power;
    f.c = std::move(coeff);
    f.tau = std::move(exponent);
    return f;
  }

  static ApproxFunction from_table(std::map<std::uint64_t, Rat> t) {
    for (auto& [h, v] : t) {
      if (h == 0) throw domain_error("ApproxFunction table: key 0");
      if (sgn(v) < 0) throw domain_error("ApproxFunction table: negative value");
    }
    ApproxFunction f;
    f.kind = Kind::Table;
    f.table = std::move(t);
    return f;
  }

  static ApproxFunction sparse(unsigned m, std::vector<SparseEntry> entries) {
    if (m == 0) throw domain_error("ApproxFunction sparse: m must be >= 1");
    ApproxFunction f;
    f.kind = Kind::Sparse;
    f.sparse_m = m;
    for (auto& e : entries) {
      e.lv = e.l.value();
      if (sgn(e.weighted) <= 0) throw domain_error("ApproxFunction sparse: weights must be positive");
    }
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].lv <= entries[i - 1].lv)
        throw domain_error("ApproxFunction sparse: support must be strictly ascending");
    f.support = std::move(entries);
    return f;
  }

  // -- exact evaluation ------------------------------------------------------

  // Can psi(h)^m be produced exactly?  (Power with fractional tau*m cannot.)
  bool exact_pow_available(unsigned m) const {
    switch (kind) {
      case Kind::Power: {
        Rat tm = tau * static_cast<long>(m);
        return tm.get_den() == 1;
      }
      case Kind::Sparse:
        return m == sparse_m;
      default:
        return true;
    }
  }

  // Exact psi(h)^m.  domain_error when not exactly representable.
  Rat value_pow(const Int& h, unsigned m) const {
    if (m == 0) throw domain_error("value_pow: m must be >= 1");
    if (sgn(h) <= 0) throw domain_error("value_pow: h must be >= 1");
    Rat raw;
    switch (kind) {
      case Kind::Constant:
        raw = rat_pow(c, static_cast<long>(m));
        break;
      case Kind::Power: {
        Rat tm = tau * static_cast<long>(m);
        if (tm.get_den() != 1) throw domain_error("value_pow: tau*m not integral for Power function");
        long e = static_cast<long>(mpz_get_si(tm.get_num().get_mpz_t()));
        raw = rat_pow(c, static_cast<long>(m)) * rat_pow(Rat(h), -e);
        break;
      }
      case Kind::Table: {
        if (!fits_u64(h)) return Rat(0);
        auto it = table.find(to_u64(h));
        raw = it == table.end() ? Rat(0) : rat_pow(it->second, static_cast<long>(m));
        break;
      }
      case Kind::Sparse: {
        if (m != sparse_m) throw domain_error("value_pow: Sparse function pinned to different exponent m");
        raw = Rat(0);
        for (auto& e : support)
          if (e.lv == h) {
            raw = e.weighted / Rat(e.lv);
            raw.canonicalize();
            break;
          }
        break;
      }
    }
    if (cap) {
      // compare psi(h) vs cap without forming psi(h) when unnecessary:
      // here raw = psi^m is already exact, so compare against cap^m.
      Rat cm = rat_pow(*cap, static_cast<long>(m));
      if (raw > cm) return cm;
    }
    return raw;
  }

  Rat value_pow(std::uint64_t h, unsigned m) const { return value_pow(to_int(h), m); }

  // psi(h) as double (for membership predicates and MC).
  double value_double(std::uint64_t h) const {
    double v = 0;
    switch (kind) {
      case Kind::Constant:
        v = to_double(c);
        break;
      case Kind::Power:
        v = to_double(c) * std::pow(static_cast<double>(h), -to_double(tau));
        break;
      case Kind::Table: {
        auto it = table.find(h);
        v = it == table.end() ? 0.0 : to_double(it->second);
        break;
      }
      case Kind::Sparse: {
        for (auto& e : support)
          if (e.lv == to_int(h)) {
            Rat r = e.weighted / Rat(e.lv);
            r.canonicalize();
            v = std::pow(to_double(r), 1.0 / sparse_m);
            break;
          }
        break;
      }
    }
    if (cap) v = std::min(v, to_double(*cap));
    return v;
  }

  // Exact test psi(h) < bound (bound > 0), all kinds, no rounding.
  bool less_than(const Int& h, const Rat& bound) const {
    switch (kind) {
      case Kind::Power: {
        if (cap && *cap < bound) return true;
        // c * h^-tau < bound  <=>  c^b < bound^b * h^a  (tau = a/b, b > 0)
        Int a = tau.get_num(), b = tau.get_den();
        unsigned long bu = static_cast<unsigned long>(mpz_get_ui(b.get_mpz_t()));
        Rat lhs = rat_pow(c, static_cast<long>(bu));
        Rat rhs = rat_pow(bound, static_cast<long>(bu));
        long ae = static_cast<long>(mpz_get_si(a.get_mpz_t()));
        if (ae >= 0)
          rhs *= rat_pow(Rat(h), ae);
        else
          lhs *= rat_pow(Rat(h), -ae);
        return lhs < rhs;
      }
      case Kind::Sparse: {
        if (sgn(h) <= 0) throw domain_error("less_than: h must be >= 1");
        for (auto& e : support)
          if (e.lv == h) {
            // psi(l) < bound <=> w/l < bound^m
            Rat v = e.weighted / Rat(e.lv);
            v.canonicalize();
            bool raw_ok = v < rat_pow(bound, static_cast<long>(sparse_m));
            if (cap && *cap < bound) return true;
            return raw_ok;
          }
        return sgn(bound) > 0;
      }
      default: {
        Rat v = value_pow(h, 1);
        return v < bound;
      }
    }
  }

  // Throws domain_error unless psi(h) < 1/2 for all h in [1, N].
  void require_below_half(std::uint64_t N) const {
    static const Rat half(1, 2);
    switch (kind) {
      case Kind::Constant:
        if (!(c < half)) throw domain_error("psi >= 1/2 at h=1");
        return;
      case Kind::Power: {
        // monotone in h: check the end where psi is largest
        bool decreasing = sgn(tau) >= 0;
        Int h = decreasing ? Int(1) : to_int(N);
        if (!less_than(h, half))
          throw domain_error("psi >= 1/2 at h=" + h.get_str());
        return;
      }
      case Kind::Table:
        for (auto& [h, v] : table)
          if (h <= N && !(v < half)) throw domain_error("psi >= 1/2 at h=" + std::to_string(h));
        return;
      case Kind::Sparse:
        for (auto& e : support)
          if (e.lv <= to_int(N) && !less_than(e.lv, half))
            throw domain_error("psi >= 1/2 at h=" + e.lv.get_str());
        return;
    }
  }
};

// Pointwise min(psi, bound); normalizes Constant/Table/Sparse, caps Power.
inline ApproxFunction truncate_min(const ApproxFunction& f, const Rat& bound) {
  if (sgn(bound) < 0) throw domain_error("truncate_min: negative bound");
  ApproxFunction r = f;
  switch (f.kind) {
    case ApproxFunction::Kind::Constant:
      if (bound < r.c) r.c = bound;
      return r;
    case ApproxFunction::Kind::Table:
      for (auto& [h, v] : r.table)
        if (bound < v) v = bound;
      return r;
    case ApproxFunction::Kind::Sparse: {
      Rat bm = rat_pow(bound, static_cast<long>(f.sparse_m));
      for (auto& e : r.support) {
        Rat capw = bm * Rat(e.lv);
        capw.canonicalize();
        if (capw < e.weighted) e.weighted = capw;
      }
      return r;
    }
    case ApproxFunction::Kind::Power: {
      // peak is at h=1 for tau >= 0; cap only when it actually binds there
      if (sgn(f.tau) >= 0 && !(bound < f.c)) return r;
      Rat nc = r.cap ? std::min(*r.cap, bound) : bound;
      r.cap = nc;
      return r;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// lifts Psi : Z^n \ {0} -> [0, 1/2)
// ---------------------------------------------------------------------------

struct MultiApprox {
  enum class Kind { NormLift, PlaneLift, ZTable };

  Kind kind = Kind::NormLift;
  unsigned n = 2;
  ApproxFunction psi;                       // lifts
  std::map<std::vector<long long>, Rat> ztable;  // explicit values

  static MultiApprox norm_lift(ApproxFunction f, unsigned n) {
    if (n < 1) throw domain_error("norm_lift: n must be >= 1");
    MultiApprox m;
    m.kind = Kind::NormLift;
    m.n = n;
    m.psi = std::move(f);
    return m;
  }

  // Psi(q) = psi(|q|) iff q = (q1, q2, 0, ..., 0), else 0.  Requires n >= 2.
  static MultiApprox plane_lift(ApproxFunction f, unsigned n) {
    if (n < 2) throw domain_error("plane_lift: n must be >= 2");
    MultiApprox m;
    m.kind = Kind::PlaneLift;
    m.n = n;
    m.psi = std::move(f);
    return m;
  }

  static MultiApprox z_table(unsigned n, std::map<std::vector<long long>, Rat> values) {
    if (n < 1) throw domain_error("z_table: n must be >= 1");
    for (auto& [q, v] : values) {
      if (q.size() != n) throw domain_error("z_table: vector dimension mismatch");
      IntVec iv{q};
      iv.require_nonzero();
      if (sgn(v) < 0) throw domain_error("z_table: negative value");
    }
    MultiApprox m;
    m.kind = Kind::ZTable;
    m.n = n;
    m.ztable = std::move(values);
    return m;
  }

  bool on_plane(const IntVec& q) const {
    for (std::size_t i = 2; i < q.q.size(); ++i)
      if (q.q[i] != 0) return false;
    return true;
  }

  // Exact Psi(q)^m.
  Rat value_pow(const IntVec& q, unsigned m) const {
    if (q.n() != n) throw domain_error("MultiApprox: dimension mismatch");
    q.require_nonzero();
    switch (kind) {
      case Kind::NormLift:
        return psi.value_pow(q.sup_norm(), m);
      case Kind::PlaneLift:
        return on_plane(q) ? psi.value_pow(q.sup_norm(), m) : Rat(0);
      case Kind::ZTable: {
        auto it = ztable.find(q.q);
        return it == ztable.end() ? Rat(0) : rat_pow(it->second, static_cast<long>(m));
      }
    }
    return Rat(0);
  }

  double value_double(const IntVec& q) const {
    if (q.n() != n) throw domain_error("MultiApprox: dimension mismatch");
    switch (kind) {
      case Kind::NormLift:
        return psi.value_double(q.sup_norm());
      case Kind::PlaneLift:
        return on_plane(q) ? psi.value_double(q.sup_norm()) : 0.0;
      case Kind::ZTable: {
        auto it = ztable.find(q.q);
        return it == ztable.end() ? 0.0 : to_double(it->second);
      }
    }
    return 0.0;
  }
};

inline MultiApprox lift_to_plane(const ApproxFunction& f, unsigned n) {
  return MultiApprox::plane_lift(f, n);
}

}  // namespace kgx
