#pragma once

// Nonzero integer vectors q in Z^n: sup norm, content (gcd of coordinates),
// primitive part, and the parallelism test used to split intersection cases.

#include "kgx/factorization.hpp"
#include "kgx/rational.hpp"

#include <cstdlib>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace kgx {

struct IntVec {
  std::vector<long long> q;

  bool operator==(const IntVec&) const = default;

  unsigned n() const { return static_cast<unsigned>(q.size()); }

  bool is_zero() const {
    for (long long v : q)
      if (v != 0) return false;
    return true;
  }

  void require_nonzero() const {
    if (q.empty() || is_zero()) throw domain_error("IntVec: zero vector not allowed");
  }

  std::uint64_t sup_norm() const {
    require_nonzero();
    std::uint64_t m = 0;
    for (long long v : q) {
      std::uint64_t a = v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1 : static_cast<std::uint64_t>(v);
      m = std::max(m, a);
    }
    return m;
  }

  // gcd of |coordinates| (classical "content"); > 0 for nonzero vectors.
  std::uint64_t content() const {
    require_nonzero();
    std::uint64_t g = 0;
    for (long long v : q) {
      std::uint64_t a = v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1 : static_cast<std::uint64_t>(v);
      g = std::gcd(g, a);
    }
    return g;
  }

  Factorization content_factored() const { return Factorization::of(content()); }

  bool is_primitive() const { return content() == 1; }

  IntVec primitive_part() const {
    std::uint64_t g = content();
    IntVec r;
    r.q.reserve(q.size());
    for (long long v : q) r.q.push_back(v / static_cast<long long>(g));
    return r;
  }

  // Parallel iff all 2x2 minors vanish (q2 is a rational multiple of q1).
  bool parallel_to(const IntVec& o) const {
    require_nonzero();
    o.require_nonzero();
    if (q.size() != o.q.size()) throw domain_error("IntVec: dimension mismatch");
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = i + 1; j < q.size(); ++j) {
        __int128 det = static_cast<__int128>(q[i]) * o.q[j] - static_cast<__int128>(q[j]) * o.q[i];
        if (det != 0) return false;
      }
    return true;
  }

  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(q[i]);
    }
    return s;
  }

  // "1,-2,3"
  static IntVec parse(std::string_view s) {
    IntVec r;
    std::size_t i = 0;
    if (s.empty()) throw parse_error("empty integer vector");
    while (i <= s.size()) {
      std::size_t j = i;
      while (j < s.size() && s[j] != ',') ++j;
      std::string tok(s.substr(i, j - i));
      if (tok.empty()) throw parse_error("invalid integer vector: '" + std::string(s) + "'");
      try {
        std::size_t pos = 0;
        long long v = std::stoll(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        r.q.push_back(v);
      } catch (const std::exception&) {
        throw parse_error("invalid integer vector component: '" + tok + "'");
      }
      if (j == s.size()) break;
      i = j + 1;
    }
    return r;
  }
};

}  // namespace kgx
