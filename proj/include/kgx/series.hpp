#pragma once

// Lattice counting and the divergence series.
//
//   sphere_count(n, h)        #{ q in Z^n : |q|_infty = h }  = (2h+1)^n - (2h-1)^n
//   primitive_count(n, h)     same with gcd(q) = 1, via Moebius inversion
//   khintchine_partial_sum    sum_{h<=N} h^{n-1} psi(h)^m
//   sum_B_prime_measures      S_N = sum_{0<|q|<=N} |B'(q, psi(|q|))|
//   schmidt_main_term         Phi(h)  (expected primitive count to height h)
//   schmidt_divisor_term      chi(h)  (divisor-weighted variant, chi >= Phi)
//
// Two normalizations are in circulation for Phi/chi; both are implemented and
// every artifact records which one it used:
//   Convention::Theorem  uses (2 Psi(q))^m   (Phi = exact expected count)
//   Convention::Proof    uses Psi(q)^m       (feasibility chain normalization)

#include "kgx/approx.hpp"
#include "kgx/arith.hpp"
#include "kgx/factorization.hpp"
#include "kgx/intvec.hpp"
#include "kgx/rational.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace kgx {

enum class Convention { Theorem, Proof };

inline std::string convention_name(Convention c) {
  return c == Convention::Theorem ? "theorem" : "proof";
}

inline Convention parse_convention(std::string_view s) {
  if (s == "theorem") return Convention::Theorem;
  if (s == "proof") return Convention::Proof;
  throw parse_error("unknown convention: '" + std::string(s) + "'");
}

// Enumeration ceiling for dense per-height loops.
inline constexpr std::uint64_t kDenseHeightCap = 10'000'000;

// ---------------------------------------------------------------------------
// counts
// ---------------------------------------------------------------------------

inline Int sphere_count(unsigned n, const Int& h) {
  if (n < 1) throw domain_error("sphere_count: n must be >= 1");
  if (sgn(h) <= 0) throw domain_error("sphere_count: h must be >= 1");
  return int_pow(2 * h + 1, n) - int_pow(2 * h - 1, n);
}

inline Int sphere_count(unsigned n, std::uint64_t h) { return sphere_count(n, to_int(h)); }

// #{ |q|_infty = h, gcd(q) = 1 } = sum_{v|h} mu(v) sphere_count(n, h/v).
// For n = 2 this equals 8 phi(h) (pinned against brute enumeration in tests).
inline Int primitive_count(unsigned n, const Factorization& h) {
  Int total = 0;
  Int hv = h.value();
  h.for_each_squarefree_divisor([&](const Factorization& v, int sign) {
    Int c = sphere_count(n, hv / v.value());
    total += sign > 0 ? c : -c;
  });
  return total;
}

inline Int primitive_count(unsigned n, std::uint64_t h) {
  return primitive_count(n, Factorization::of(h));
}

// sum_{|q|=l} d(gcd q) = sum_{v|l} d(v) primitive_count(n, l/v).
// n = 2 collapses to 8 sigma(l) via primitive_count(2, x) = 8 phi(x) and the
// convolution d * phi = sigma.
inline Int divisor_weighted_sphere_count(unsigned n, const Factorization& l) {
  if (n == 2) return 8 * divisor_sigma(l);
  if (n == 1) return 2 * divisor_count(l);
  Int total = 0;
  l.for_each_divisor([&](const Factorization& v) {
    total += divisor_count(v) * primitive_count(n, l.divide(v));
  });
  return total;
}

// Cached tables for dense loops (indices 1..N).
inline std::vector<Int> primitive_count_table(unsigned n, std::uint32_t N) {
  auto spf = spf_table(N);
  std::vector<Int> t(static_cast<std::size_t>(N) + 1);
  for (std::uint32_t h = 1; h <= N; ++h)
    t[h] = primitive_count(n, Factorization::from_spf(h, spf));
  return t;
}

inline std::vector<Rat> coprime_density_table(unsigned m, std::uint32_t N) {
  auto spf = spf_table(N);
  std::vector<Rat> t(static_cast<std::size_t>(N) + 1);
  for (std::uint32_t d = 1; d <= N; ++d)
    t[d] = coprime_density(Factorization::from_spf(d, spf), m);
  return t;
}

// ---------------------------------------------------------------------------
// partial sums
// ---------------------------------------------------------------------------

// sum_{h=1}^{N} h^{n-1} psi(h)^m, exact.
inline Rat khintchine_partial_sum(const ApproxFunction& psi, unsigned n, unsigned m, const Int& N) {
  if (n < 1 || m < 1) throw domain_error("khintchine_partial_sum: n, m must be >= 1");
  if (sgn(N) <= 0) throw domain_error("khintchine_partial_sum: N must be >= 1");
  Rat total(0);
  if (psi.kind == ApproxFunction::Kind::Sparse) {
    for (auto& e : psi.support) {
      if (e.lv > N) break;
      Rat v = psi.value_pow(e.lv, m);  // handles cap
      total += v * rat_pow(Rat(e.lv), static_cast<long>(n) - 1);
    }
    return total;
  }
  if (psi.kind == ApproxFunction::Kind::Table) {
    for (auto& [h, v] : psi.table) {
      if (to_int(h) > N) break;
      total += psi.value_pow(h, m) * rat_pow(Rat(to_int(h)), static_cast<long>(n) - 1);
    }
    return total;
  }
  if (!fits_u64(N) || to_u64(N) > kDenseHeightCap)
    throw capacity_error("khintchine_partial_sum: N too large for dense enumeration");
  std::uint64_t Nu = to_u64(N);
  for (std::uint64_t h = 1; h <= Nu; ++h)
    total += psi.value_pow(h, m) * rat_pow(Rat(to_int(h)), static_cast<long>(n) - 1);
  return total;
}

inline Rat khintchine_partial_sum(const ApproxFunction& psi, unsigned n, unsigned m, std::uint64_t N) {
  return khintchine_partial_sum(psi, n, m, to_int(N));
}

// S_N = sum_{h<=N} (2 psi(h))^m sum_{d|h} coprime_density(d, m) primitive_count(n, h/d).
// Requires nm > 1 (else the slab family is empty of interest) and psi < 1/2 on [1, N].
inline Rat sum_B_prime_measures(const ApproxFunction& psi, unsigned n, unsigned m, std::uint64_t N) {
  if (n < 1 || m < 1) throw domain_error("sum_B_prime_measures: n, m must be >= 1");
  if (static_cast<std::uint64_t>(n) * m <= 1)
    throw domain_error("sum_B_prime_measures: requires nm > 1");
  if (N < 1) throw domain_error("sum_B_prime_measures: N must be >= 1");
  psi.require_below_half(N);
  Rat total(0);
  Rat two_m = rat_pow(Rat(2), static_cast<long>(m));

  auto height_term = [&](const Factorization& h) {
    Rat inner(0);
    h.for_each_divisor([&](const Factorization& d) {
      inner += coprime_density(d, m) * Rat(primitive_count(n, h.divide(d)));
    });
    return inner;
  };

  if (psi.kind == ApproxFunction::Kind::Sparse) {
    for (auto& e : psi.support) {
      if (e.lv > to_int(N)) break;
      Rat pm = psi.value_pow(e.lv, m);
      if (sgn(pm) == 0) continue;
      total += two_m * pm * height_term(e.l);
    }
    return total;
  }
  if (psi.kind == ApproxFunction::Kind::Table) {
    auto spf = spf_table(static_cast<std::uint32_t>(std::min<std::uint64_t>(N, UINT32_MAX)));
    for (auto& [h, v] : psi.table) {
      if (h > N) break;
      Rat pm = psi.value_pow(h, m);
      if (sgn(pm) == 0) continue;
      if (h >= spf.size()) throw capacity_error("sum_B_prime_measures: table key too large");
      total += two_m * pm * height_term(Factorization::from_spf(static_cast<std::uint32_t>(h), spf));
    }
    return total;
  }
  if (N > kDenseHeightCap) throw capacity_error("sum_B_prime_measures: N too large");
  auto spf = spf_table(static_cast<std::uint32_t>(N));
  for (std::uint64_t h = 1; h <= N; ++h) {
    Rat pm = psi.value_pow(h, m);
    if (sgn(pm) == 0) continue;
    total += two_m * pm * height_term(Factorization::from_spf(static_cast<std::uint32_t>(h), spf));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Schmidt terms
// ---------------------------------------------------------------------------

namespace detail {

inline Rat convention_scale(Convention conv, unsigned m) {
  return conv == Convention::Theorem ? rat_pow(Rat(2), static_cast<long>(m)) : Rat(1);
}

// Generic accumulation over heights for lifts; weight(l) gives the lattice
// weight of the norm-l sphere in the lifted geometry.
template <class WeightFn>
Rat lift_sum(const ApproxFunction& psi, unsigned m, const Int& h, Convention conv, WeightFn&& weight) {
  Rat scale = convention_scale(conv, m);
  Rat total(0);
  if (psi.kind == ApproxFunction::Kind::Sparse) {
    for (auto& e : psi.support) {
      if (e.lv > h) break;
      Rat pm = psi.value_pow(e.lv, m);
      if (sgn(pm) == 0) continue;
      total += scale * pm * Rat(weight(e.l, e.lv));
    }
    return total;
  }
  if (psi.kind == ApproxFunction::Kind::Table) {
    for (auto& [t, v] : psi.table) {
      if (to_int(t) > h) break;
      Rat pm = psi.value_pow(t, m);
      if (sgn(pm) == 0) continue;
      Factorization f = Factorization::of(t);
      total += scale * pm * Rat(weight(f, to_int(t)));
    }
    return total;
  }
  if (!fits_u64(h) || to_u64(h) > kDenseHeightCap)
    throw capacity_error("schmidt term: height too large for dense enumeration");
  std::uint64_t hu = to_u64(h);
  auto spf = spf_table(static_cast<std::uint32_t>(hu));
  for (std::uint64_t l = 1; l <= hu; ++l) {
    Rat pm = psi.value_pow(l, m);
    if (sgn(pm) == 0) continue;
    Factorization f = Factorization::from_spf(static_cast<std::uint32_t>(l), spf);
    total += scale * pm * Rat(weight(f, to_int(l)));
  }
  return total;
}

}  // namespace detail

// Phi(h) = sum_{0 < |q| <= h} (k Psi(q))^m  with k per Convention.
inline Rat schmidt_main_term(const MultiApprox& Psi, unsigned m, const Int& h, Convention conv) {
  if (m < 1) throw domain_error("schmidt_main_term: m must be >= 1");
  if (sgn(h) <= 0) throw domain_error("schmidt_main_term: h must be >= 1");
  switch (Psi.kind) {
    case MultiApprox::Kind::NormLift:
      return detail::lift_sum(Psi.psi, m, h, conv,
                              [&](const Factorization&, const Int& lv) { return sphere_count(Psi.n, lv); });
    case MultiApprox::Kind::PlaneLift:
      return detail::lift_sum(Psi.psi, m, h, conv,
                              [&](const Factorization&, const Int& lv) { return sphere_count(2, lv); });
    case MultiApprox::Kind::ZTable: {
      Rat scale = detail::convention_scale(conv, m);
      Rat total(0);
      for (auto& [qv, val] : Psi.ztable) {
        IntVec q{qv};
        if (to_int(q.sup_norm()) > h || sgn(val) == 0) continue;
        total += scale * rat_pow(val, static_cast<long>(m));
      }
      return total;
    }
  }
  throw domain_error("schmidt_main_term: unknown lift");
}

// chi(h) = sum_{0 < |q| <= h} (k Psi(q))^m d(gcd q); chi >= Phi pointwise.
inline Rat schmidt_divisor_term(const MultiApprox& Psi, unsigned m, const Int& h, Convention conv) {
  if (m < 1) throw domain_error("schmidt_divisor_term: m must be >= 1");
  if (sgn(h) <= 0) throw domain_error("schmidt_divisor_term: h must be >= 1");
  switch (Psi.kind) {
    case MultiApprox::Kind::NormLift:
      return detail::lift_sum(Psi.psi, m, h, conv, [&](const Factorization& f, const Int&) {
        return divisor_weighted_sphere_count(Psi.n, f);
      });
    case MultiApprox::Kind::PlaneLift:
      return detail::lift_sum(Psi.psi, m, h, conv, [&](const Factorization& f, const Int&) {
        return divisor_weighted_sphere_count(2, f);
      });
    case MultiApprox::Kind::ZTable: {
      Rat scale = detail::convention_scale(conv, m);
      Rat total(0);
      for (auto& [qv, val] : Psi.ztable) {
        IntVec q{qv};
        if (to_int(q.sup_norm()) > h || sgn(val) == 0) continue;
        total += scale * rat_pow(val, static_cast<long>(m)) * Rat(divisor_count(q.content_factored()));
      }
      return total;
    }
  }
  throw domain_error("schmidt_divisor_term: unknown lift");
}

}  // namespace kgx
