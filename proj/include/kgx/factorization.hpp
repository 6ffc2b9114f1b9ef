#pragma once

// Factored natural numbers.  A Factorization is the canonical prime->exponent
// map of some v >= 1 (empty list = 1), kept ascending.  Pinned text form:
// "2^3*3*5^2" with ^1 omitted, "1" for the empty product.  Huge values (e.g.
// primorials with millions of prime factors) stay factored; value() extracts
// the mpz when actually needed.

#include "kgx/rational.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace kgx {

// ---------------------------------------------------------------------------
// prime utilities
// ---------------------------------------------------------------------------

// Primes <= limit, ascending (simple Eratosthenes; ~0.4s at 7e7).
inline std::vector<std::uint64_t> sieve_primes(std::uint64_t limit) {
  std::vector<std::uint64_t> out;
  if (limit < 2) return out;
  std::vector<bool> comp(limit + 1, false);
  for (std::uint64_t i = 2; i <= limit; ++i) {
    if (!comp[i]) {
      out.push_back(i);
      if (i * i <= limit)
        for (std::uint64_t j = i * i; j <= limit; j += i) comp[j] = true;
    }
  }
  return out;
}

// Smallest-prime-factor table for batch factorization of 1..n (spf[1] = 1).
inline std::vector<std::uint32_t> spf_table(std::uint32_t n) {
  std::vector<std::uint32_t> spf(n + 1, 0);
  if (n >= 1) spf[1] = 1;
  for (std::uint32_t i = 2; i <= n; ++i) {
    if (spf[i] == 0) {
      for (std::uint64_t j = i; j <= n; j += i)
        if (spf[j] == 0) spf[j] = i;
    }
  }
  return spf;
}

inline bool is_prime_u64(std::uint64_t v) {
  if (v < 2) return false;
  Int z = to_int(v);
  return mpz_probab_prime_p(z.get_mpz_t(), 32) != 0;
}

namespace detail {

inline std::uint64_t mulmod_u64(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

// Pollard rho (Floyd cycle detection); v composite, returns a proper factor.
inline std::uint64_t pollard_rho(std::uint64_t v, std::uint64_t c0) {
  if (v % 2 == 0) return 2;
  for (std::uint64_t c = c0;; ++c) {
    auto g = [&](std::uint64_t x) { return (mulmod_u64(x, x, v) + c) % v; };
    std::uint64_t x = 2, y = 2, d = 1;
    do {
      x = g(x);
      y = g(g(y));
      std::uint64_t diff = x > y ? x - y : y - x;
      d = diff == 0 ? v : std::gcd(diff, v);
    } while (d == 1);
    if (d != v) return d;
  }
}

inline const std::vector<std::uint64_t>& small_primes() {
  static const std::vector<std::uint64_t> p = sieve_primes(1u << 16);
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Factorization
// ---------------------------------------------------------------------------

struct Factorization {
  // (prime, exponent), primes strictly ascending, exponents >= 1.
  std::vector<std::pair<std::uint64_t, std::uint32_t>> f;

  bool operator==(const Factorization&) const = default;

  bool is_one() const { return f.empty(); }
  std::size_t omega() const { return f.size(); }
  bool squarefree() const {
    return std::all_of(f.begin(), f.end(), [](auto& pe) { return pe.second == 1; });
  }

  // Balanced product so primorial-sized values cost ~M(bits) log omega, not
  // omega squared.
  Int value() const { return value_range(0, f.size()); }

  // Value when it fits in 64 bits (capacity_error otherwise).
  std::uint64_t value_u64() const { return to_u64(value()); }

  Int value_range(std::size_t lo, std::size_t hi) const {
    if (lo >= hi) return Int(1);
    if (hi - lo == 1) return int_pow(f[lo].first, f[lo].second);
    std::size_t mid = lo + (hi - lo) / 2;
    return value_range(lo, mid) * value_range(mid, hi);
  }

  std::string str() const {
    if (f.empty()) return "1";
    std::string s;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) s += '*';
      s += std::to_string(f[i].first);
      if (f[i].second != 1) {
        s += '^';
        s += std::to_string(f[i].second);
      }
    }
    return s;
  }

  // Validates shape and primality of each base.
  void validate() const {
    std::uint64_t prev = 1;
    for (auto& [p, e] : f) {
      if (p <= prev) throw parse_error("factorization primes not strictly ascending");
      if (e < 1) throw parse_error("factorization exponent < 1");
      if (!is_prime_u64(p)) throw parse_error("factorization base " + std::to_string(p) + " is not prime");
      prev = p;
    }
  }

  static Factorization parse(std::string_view s) {
    auto fail = [&] { throw parse_error("invalid factorization: '" + std::string(s) + "'"); };
    Factorization r;
    if (s == "1") return r;
    if (s.empty()) fail();
    std::size_t i = 0;
    auto read_num = [&]() -> std::uint64_t {
      std::size_t b = i;
      std::uint64_t v = 0;
      while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
        std::uint64_t d = static_cast<std::uint64_t>(s[i] - '0');
        if (v > (UINT64_MAX - d) / 10) throw capacity_error("factorization component exceeds 64 bits");
        v = v * 10 + d;
        ++i;
      }
      if (i == b) fail();
      return v;
    };
    while (true) {
      std::uint64_t p = read_num();
      std::uint32_t e = 1;
      if (i < s.size() && s[i] == '^') {
        ++i;
        std::uint64_t ee = read_num();
        if (ee == 0 || ee > UINT32_MAX) fail();
        e = static_cast<std::uint32_t>(ee);
      }
      r.f.emplace_back(p, e);
      if (i == s.size()) break;
      if (s[i] != '*') fail();
      ++i;
    }
    r.validate();
    return r;
  }

  static Factorization of(std::uint64_t v) {
    if (v == 0) throw domain_error("cannot factor 0");
    Factorization r;
    std::uint64_t rem = v;
    for (std::uint64_t p : detail::small_primes()) {
      if (p * p > rem) break;
      if (rem % p == 0) {
        std::uint32_t e = 0;
        while (rem % p == 0) { rem /= p; ++e; }
        r.f.emplace_back(p, e);
      }
    }
    if (rem > 1) {
      // Residue has no prime factor <= 2^16.
      std::vector<std::uint64_t> stack{rem};
      std::vector<std::uint64_t> primes;
      while (!stack.empty()) {
        std::uint64_t t = stack.back();
        stack.pop_back();
        if (is_prime_u64(t)) {
          primes.push_back(t);
          continue;
        }
        std::uint64_t d = detail::pollard_rho(t, 1);
        stack.push_back(d);
        stack.push_back(t / d);
      }
      std::sort(primes.begin(), primes.end());
      for (std::size_t i = 0; i < primes.size();) {
        std::size_t j = i;
        while (j < primes.size() && primes[j] == primes[i]) ++j;
        r.f.emplace_back(primes[i], static_cast<std::uint32_t>(j - i));
        i = j;
      }
    }
    return r;
  }

  // Batch-friendly: factor v <= spf table size via repeated spf division.
  static Factorization from_spf(std::uint32_t v, const std::vector<std::uint32_t>& spf) {
    if (v == 0 || v >= spf.size()) throw domain_error("from_spf: value out of table range");
    Factorization r;
    while (v > 1) {
      std::uint32_t p = spf[v], e = 0;
      while (v % p == 0) { v /= p; ++e; }
      r.f.emplace_back(p, e);
    }
    return r;
  }

  // this / d for divisors d given in factored form; throws if not a divisor.
  Factorization divide(const Factorization& d) const {
    Factorization r;
    std::size_t j = 0;
    for (auto& [p, e] : f) {
      std::uint32_t sub = 0;
      if (j < d.f.size() && d.f[j].first == p) {
        sub = d.f[j].second;
        ++j;
      }
      if (sub > e) throw domain_error("divide: not a divisor");
      if (e - sub > 0) r.f.emplace_back(p, e - sub);
    }
    if (j != d.f.size()) throw domain_error("divide: not a divisor");
    return r;
  }

  // Enumerates all divisors in odometer order; fn(const Factorization&).
  template <class Fn>
  void for_each_divisor(Fn&& fn) const {
    std::vector<std::uint32_t> exps(f.size(), 0);
    while (true) {
      Factorization d;
      for (std::size_t i = 0; i < f.size(); ++i)
        if (exps[i] > 0) d.f.emplace_back(f[i].first, exps[i]);
      fn(static_cast<const Factorization&>(d));
      std::size_t i = 0;
      while (i < f.size()) {
        if (exps[i] < f[i].second) { ++exps[i]; break; }
        exps[i] = 0;
        ++i;
      }
      if (i == f.size()) break;
    }
  }

  // Squarefree divisors with their Moebius sign: fn(const Factorization&, int).
  template <class Fn>
  void for_each_squarefree_divisor(Fn&& fn) const {
    std::size_t k = f.size();
    if (k > 63) throw capacity_error("too many prime factors for subset enumeration");
    for (std::uint64_t mask = 0; mask < (1ull << k); ++mask) {
      Factorization d;
      int sign = 1;
      for (std::size_t i = 0; i < k; ++i)
        if (mask & (1ull << i)) {
          d.f.emplace_back(f[i].first, 1);
          sign = -sign;
        }
      fn(static_cast<const Factorization&>(d), sign);
    }
  }
};

// ---------------------------------------------------------------------------
// primorials
// ---------------------------------------------------------------------------

// Successive primorials 2, 2*3, 2*3*5, ... up to a prime budget.
class PrimorialStream {
 public:
  explicit PrimorialStream(std::uint64_t prime_budget)
      : primes_(sieve_primes(prime_budget)), budget_(prime_budget) {}

  // Multiplies in the next prime; false once the budget is exhausted.
  bool advance() {
    if (idx_ >= primes_.size()) return false;
    cur_.f.emplace_back(primes_[idx_], 1);
    ++idx_;
    return true;
  }

  const Factorization& current() const {
    if (idx_ == 0) throw domain_error("PrimorialStream: no primorial yet");
    return cur_;
  }

  std::uint64_t last_prime() const { return primes_.at(idx_ - 1); }
  std::size_t index() const { return idx_; }  // 1-based primorial index
  std::size_t primes_available() const { return primes_.size(); }
  std::uint64_t budget() const { return budget_; }
  const std::vector<std::uint64_t>& primes() const { return primes_; }

 private:
  std::vector<std::uint64_t> primes_;
  Factorization cur_;
  std::size_t idx_ = 0;
  std::uint64_t budget_;
};

// Primorial of all primes <= p_max.
inline Factorization primorial_upto(std::uint64_t p_max) {
  Factorization r;
  for (std::uint64_t p : sieve_primes(p_max)) r.f.emplace_back(p, 1);
  return r;
}

}  // namespace kgx
