#pragma once

// Exact arithmetic foundation. GMP backs arbitrary-precision integers and
// rationals; this header pins the text form used by every external format:
// rationals print as "a/b" in lowest terms with positive denominator, and the
// "/1" is omitted for integers.

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace kgx {

using Int = mpz_class;
using Rat = mpq_class;

// Error taxonomy shared across the library.  The CLI maps these onto its
// exit codes: parse_error -> 2, domain_error / capacity_error -> 3.
// Infeasibility of a construction is not an error (a report is returned).
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct capacity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Strict "a/b" | "a" parser: optional leading '-', decimal digits only,
// positive denominator.  Result is canonicalized.
inline Rat parse_rational(std::string_view s) {
  auto fail = [&] { throw parse_error("invalid rational: '" + std::string(s) + "'"); };
  if (s.empty()) fail();
  std::size_t i = 0;
  if (s[0] == '-') i = 1;
  std::size_t num_begin = i;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == num_begin) fail();
  std::size_t num_end = i;
  if (i < s.size()) {
    if (s[i] != '/') fail();
    ++i;
    std::size_t den_begin = i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
    if (i == den_begin || i != s.size()) fail();
    (void)num_end;
  }
  Rat r;
  if (mpq_set_str(r.get_mpq_t(), std::string(s).c_str(), 10) != 0) fail();
  if (mpz_sgn(mpq_denref(r.get_mpq_t())) == 0)
    throw parse_error("zero denominator in rational: '" + std::string(s) + "'");
  r.canonicalize();
  return r;
}

inline std::string format_rational(const Rat& r) { return r.get_str(); }

inline Int parse_integer(std::string_view s) {
  Rat r = parse_rational(s);
  if (r.get_den() != 1) throw parse_error("expected integer, got '" + std::string(s) + "'");
  return r.get_num();
}

// x^e for integer e (e < 0 requires x != 0).
inline Rat rat_pow(const Rat& x, long e) {
  if (e == 0) return Rat(1);
  bool inv = e < 0;
  unsigned long k = inv ? static_cast<unsigned long>(-(e + 1)) + 1ul : static_cast<unsigned long>(e);
  if (inv && sgn(x) == 0) throw domain_error("rat_pow: zero base with negative exponent");
  Rat r;
  mpz_pow_ui(mpq_numref(r.get_mpq_t()), mpq_numref(x.get_mpq_t()), k);
  mpz_pow_ui(mpq_denref(r.get_mpq_t()), mpq_denref(x.get_mpq_t()), k);
  // x canonical => num/den coprime after powering; sign rides the numerator.
  if (inv) mpq_inv(r.get_mpq_t(), r.get_mpq_t());
  return r;
}

inline Int int_pow(const Int& x, unsigned long e) {
  Int r;
  mpz_pow_ui(r.get_mpz_t(), x.get_mpz_t(), e);
  return r;
}

inline Int int_pow(std::uint64_t x, unsigned long e) {
  Int b;
  mpz_import(b.get_mpz_t(), 1, -1, sizeof(x), 0, 0, &x);
  return int_pow(b, e);
}

// mpz <-> uint64 helpers (GMP's get_ui truncates to unsigned long).
inline Int to_int(std::uint64_t v) {
  Int b;
  mpz_import(b.get_mpz_t(), 1, -1, sizeof(v), 0, 0, &v);
  return b;
}

inline bool fits_u64(const Int& v) {
  return sgn(v) >= 0 && mpz_sizeinbase(v.get_mpz_t(), 2) <= 64;
}

inline std::uint64_t to_u64(const Int& v) {
  if (!fits_u64(v)) throw capacity_error("integer does not fit in 64 bits");
  std::uint64_t out = 0;
  mpz_export(&out, nullptr, -1, sizeof(out), 0, 0, v.get_mpz_t());
  return out;
}

inline double to_double(const Rat& r) { return mpq_get_d(r.get_mpq_t()); }

// Directed double enclosure of a positive rational: lo <= r <= hi with lo/hi
// adjacent doubles around the truncated conversion.
inline std::pair<double, double> double_bracket(const Rat& r) {
  double t = mpq_get_d(r.get_mpq_t());  // rounds toward zero
  if (sgn(r) >= 0) return {t, std::nextafter(t, 1e308)};
  return {std::nextafter(t, -1e308), t};
}

}  // namespace kgx
