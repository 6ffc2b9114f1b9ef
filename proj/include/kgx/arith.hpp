#pragma once

// Multiplicative arithmetic over factored integers: Moebius mu, Euler phi,
// divisor count/sum, the coprime-density product prod_{p|d}(1 - p^-m) that
// scales primitive slab measures, and the totient ratio theta(l) = l/phi(l)
// driving the counterexample feasibility inequalities.

#include "kgx/factorization.hpp"
#include "kgx/rational.hpp"

#include <span>

namespace kgx {

inline int mobius(const Factorization& h) {
  if (!h.squarefree()) return 0;
  return h.omega() % 2 == 0 ? 1 : -1;
}

inline Int euler_phi(const Factorization& h) {
  Int v = 1;
  for (auto& [p, e] : h.f) v *= int_pow(p, e - 1) * (to_int(p) - 1);
  return v;
}

inline Int divisor_count(const Factorization& h) {
  Int v = 1;
  for (auto& [p, e] : h.f) v *= static_cast<unsigned long>(e) + 1;
  return v;
}

// sigma(h) = sum of divisors = prod (p^{e+1}-1)/(p-1).  Also equals the
// Dirichlet convolution (d * phi)(h), which is how the divisor-weighted
// counting series consumes it; the convolution identity is pinned in tests.
inline Int divisor_sigma(const Factorization& h) {
  Int v = 1;
  for (auto& [p, e] : h.f) v *= (int_pow(p, e + 1) - 1) / (to_int(p) - 1);
  return v;
}

// prod_{p|d} (1 - p^-m) = density of m-tuples coprime to d; equals
// sum_{l|d} mu(l) / l^m (Moebius identity, pinned in tests).
inline Rat coprime_density(const Factorization& d, unsigned m) {
  if (m == 0) throw domain_error("coprime_density: m must be >= 1");
  Int num = 1, den = 1;
  for (auto& [p, e] : d.f) {
    (void)e;
    Int pm = int_pow(p, m);
    num *= pm - 1;
    den *= pm;
  }
  Rat r(num, den);
  r.canonicalize();
  return r;
}

// theta(l) = prod_{p|l} p/(p-1) = l/phi(l) for squarefree l.
inline Rat totient_ratio(const Factorization& l) {
  Int num = 1, den = 1;
  for (auto& [p, e] : l.f) {
    (void)e;
    num *= to_int(p);
    den *= to_int(p) - 1;
  }
  Rat r(num, den);
  r.canonicalize();
  return r;
}

// sigma(l)/l as a rational (prod over p of (p^{e+1}-1)/(p^e (p-1))).
inline Rat sigma_ratio(const Factorization& l) {
  Rat r(divisor_sigma(l), l.value());
  r.canonicalize();
  return r;
}

// h * prod_{p|h} (1 - p^-2); equals sum_{d|h} phi(d) phi(h/d) / d.  This is
// the exact value of the totient pair-correlation convolution (tests pin the
// divisor-sum form against this closed form).
inline Rat totient_density_convolution(const Factorization& h) {
  Int num = h.value(), den = 1;
  for (auto& [p, e] : h.f) {
    (void)e;
    Int p2 = to_int(p) * to_int(p);
    num *= p2 - 1;
    den *= p2;
  }
  Rat r(num, den);
  r.canonicalize();
  return r;
}

// Certified rational lower bound for prod_{p|d}(1 - p^-m), m >= 2, uniform in
// d: 6079/10000 < 6/pi^2 = prod_p (1 - p^-2) <= the partial product for any d.
// The certification chain for the constant lives in the test suite.
inline const Rat& coprime_density_floor() {
  static const Rat r(6079, 10000);
  return r;
}

// ---------------------------------------------------------------------------
// balanced products (exact theta at large primorial scale)
// ---------------------------------------------------------------------------

// prod f(v[i]) over [lo, hi) as a balanced tree; f maps uint64 -> uint64.
template <class Fn>
Int balanced_product(std::span<const std::uint64_t> v, std::size_t lo, std::size_t hi, Fn&& f) {
  if (lo >= hi) return Int(1);
  if (hi - lo == 1) return to_int(f(v[lo]));
  std::size_t mid = lo + (hi - lo) / 2;
  return balanced_product(v, lo, mid, f) * balanced_product(v, mid, hi, f);
}

// Exact theta over an explicit prime list (balanced trees + one gcd).
inline Rat totient_ratio_of_primes(std::span<const std::uint64_t> primes) {
  Int num = balanced_product(primes, 0, primes.size(), [](std::uint64_t p) { return p; });
  Int den = balanced_product(primes, 0, primes.size(), [](std::uint64_t p) { return p - 1; });
  Rat r(num, den);
  r.canonicalize();
  return r;
}

// Exact sigma(l)/l for l squarefree with the given prime support.
inline Rat sigma_ratio_of_primes(std::span<const std::uint64_t> primes) {
  Int num = balanced_product(primes, 0, primes.size(), [](std::uint64_t p) { return p + 1; });
  Int den = balanced_product(primes, 0, primes.size(), [](std::uint64_t p) { return p; });
  Rat r(num, den);
  r.canonicalize();
  return r;
}

}  // namespace kgx
