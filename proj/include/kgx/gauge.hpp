#pragma once

// Monotone gauges F : [0, inf) -> [0, inf) used to target chi(h) >= F(Phi(h)).
// Identity and Linear evaluate exactly; Log (ln(1+x)) and Exp (e^{ax}) return
// certified rational brackets from MPFR directed rounding, refined until a
// comparison against an exact rational is decided.  No floating point is
// trusted anywhere in a verdict.

#include "kgx/rational.hpp"

#include <mpfr.h>

#include <string>
#include <string_view>
#include <utility>

namespace kgx {

namespace detail {

// Exact rational from an mpfr value (mantissa * 2^exp).
inline Rat rat_from_mpfr(mpfr_srcptr f) {
  if (mpfr_zero_p(f)) return Rat(0);
  if (!mpfr_number_p(f)) throw domain_error("gauge bracket overflowed mpfr range");
  Int z;
  mpfr_exp_t e = mpfr_get_z_2exp(z.get_mpz_t(), f);
  Rat r(z);
  if (e >= 0) {
    mpz_mul_2exp(mpq_numref(r.get_mpq_t()), mpq_numref(r.get_mpq_t()),
                 static_cast<mp_bitcnt_t>(e));
  } else {
    mpz_mul_2exp(mpq_denref(r.get_mpq_t()), mpq_denref(r.get_mpq_t()),
                 static_cast<mp_bitcnt_t>(-e));
  }
  r.canonicalize();
  return r;
}

}  // namespace detail

struct Gauge {
  enum class Kind { Identity, Linear, Log, Exp };

  Kind kind = Kind::Identity;
  Rat a, b;  // Linear: a x + b (a > 0); Exp: e^{a x} (a > 0)

  bool operator==(const Gauge&) const = default;

  static Gauge identity() { return Gauge{Kind::Identity, Rat(1), Rat(0)}; }

  static Gauge linear(Rat a, Rat b) {
    if (sgn(a) <= 0) throw domain_error("Gauge::linear requires a > 0");
    return Gauge{Kind::Linear, std::move(a), std::move(b)};
  }

  static Gauge log() { return Gauge{Kind::Log, Rat(0), Rat(0)}; }

  static Gauge exp(Rat a) {
    if (sgn(a) <= 0) throw domain_error("Gauge::exp requires a > 0");
    return Gauge{Kind::Exp, std::move(a), Rat(0)};
  }

  bool is_rational() const { return kind == Kind::Identity || kind == Kind::Linear; }

  std::string name() const {
    switch (kind) {
      case Kind::Identity: return "identity";
      case Kind::Linear: return "linear";
      case Kind::Log: return "log";
      case Kind::Exp: return "exp";
    }
    return "?";
  }

  // Exact value; rational gauges only.
  Rat eval_exact(const Rat& x) const {
    switch (kind) {
      case Kind::Identity: return x;
      case Kind::Linear: return a * x + b;
      default: throw domain_error("eval_exact: gauge value is irrational");
    }
  }

  // Certified enclosure lo <= F(x) <= hi at the given working precision.
  std::pair<Rat, Rat> bracket(const Rat& x, mpfr_prec_t prec = 128) const {
    if (sgn(x) < 0) throw domain_error("gauge: argument must be >= 0");
    if (is_rational()) {
      Rat v = eval_exact(x);
      return {v, v};
    }
    mpfr_t lo, hi;
    mpfr_init2(lo, prec);
    mpfr_init2(hi, prec);
    if (kind == Kind::Log) {
      Rat t = x + 1;
      mpfr_set_q(lo, t.get_mpq_t(), MPFR_RNDD);
      mpfr_set_q(hi, t.get_mpq_t(), MPFR_RNDU);
      mpfr_log(lo, lo, MPFR_RNDD);
      mpfr_log(hi, hi, MPFR_RNDU);
    } else {  // Exp
      Rat t = a * x;
      mpfr_set_q(lo, t.get_mpq_t(), MPFR_RNDD);
      mpfr_set_q(hi, t.get_mpq_t(), MPFR_RNDU);
      mpfr_exp(lo, lo, MPFR_RNDD);
      mpfr_exp(hi, hi, MPFR_RNDU);
    }
    Rat rlo = detail::rat_from_mpfr(lo), rhi = detail::rat_from_mpfr(hi);
    mpfr_clear(lo);
    mpfr_clear(hi);
    return {rlo, rhi};
  }

  // Decide lhs >= F(x) exactly (refining precision until separated; rational
  // lhs can never equal the transcendental values of Log/Exp at rational
  // x > 0, and the x = 0 endpoints are exact in mpfr, so this terminates).
  bool ge(const Rat& lhs, const Rat& x) const {
    if (is_rational()) return lhs >= eval_exact(x);
    for (mpfr_prec_t prec = 64; prec <= (mpfr_prec_t{1} << 16); prec *= 2) {
      auto [lo, hi] = bracket(x, prec);
      if (lhs >= hi) return true;
      if (lhs < lo) return false;
    }
    throw domain_error("gauge comparison did not separate (unexpected)");
  }
};

inline Gauge parse_gauge(std::string_view spec) {
  auto colon = spec.find(':');
  std::string_view head = colon == std::string_view::npos ? spec : spec.substr(0, colon);
  std::string_view args = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  if (head == "identity") {
    if (!args.empty()) throw parse_error("identity gauge takes no parameters");
    return Gauge::identity();
  }
  if (head == "log") {
    if (!args.empty()) throw parse_error("log gauge takes no parameters");
    return Gauge::log();
  }
  if (head == "linear") {
    auto comma = args.find(',');
    if (comma == std::string_view::npos)
      throw parse_error("linear gauge needs a,b (e.g. linear:1/4,0)");
    return Gauge::linear(parse_rational(args.substr(0, comma)),
                         parse_rational(args.substr(comma + 1)));
  }
  if (head == "exp") {
    if (args.empty()) throw parse_error("exp gauge needs a rate (e.g. exp:2)");
    return Gauge::exp(parse_rational(args));
  }
  throw parse_error("unknown gauge: '" + std::string(spec) + "'");
}

}  // namespace kgx
