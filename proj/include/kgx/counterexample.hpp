#pragma once

// Certified construction of approximating functions whose planar counting
// profile dominates a prescribed gauge: build_psi produces a sparse psi
// supported on consecutive primorials, grouped into blocks of unit mass
// (weight 1/s_t on each of the s_t support points of block t), such that
//
//   (feasibility)  (1/2) * sum_{j <= T'} theta(h_j)  >=  F(8 T' + 8)
//
// holds for every block prefix T', where theta(l) = l/phi(l) and h_j is the
// primorial opening block j.  Block step sizes s_t are forced nondecreasing
// (candidates inside the forbidden gap are skipped; `thinned` records when
// that actually suppressed an otherwise admissible candidate).  From the
// feasibility chain the planar (n = 2) sum functions at the block checkpoints
// satisfy the headline inequality
//
//   chi(h_t) >= chi_lower(h_t) = (1/2) sum_{l <= h_t} w_l theta(l) >= F(Phi(h_t))
//
// for t >= 2, with Phi(h) = 8 sum_{l <= h} w_l and chi(h) = 8 sum w_l sigma(l)/l
// (proof normalization; certificates are issued in that normalization only).
//
// certify() re-derives everything from scratch — support shape, weights,
// exact theta/sigma ratios, gauge comparisons through certified brackets —
// and returns named verdicts; it shares no state with the builder.

#include "kgx/approx.hpp"
#include "kgx/arith.hpp"
#include "kgx/factorization.hpp"
#include "kgx/gauge.hpp"
#include "kgx/rational.hpp"
#include "kgx/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace kgx {

// ---------------------------------------------------------------------------
// certificate
// ---------------------------------------------------------------------------

struct CertBlock {
  std::size_t index = 0;  // primorial index of h (= number of prime factors)
  std::uint64_t s = 0;    // support points in this block (step to the next)
  Factorization h;
  Rat theta;      // l/phi(l) at h, exact
  Rat phi;        // Phi(h) = 8 * sum_{l <= h} w_l
  Rat chi_lower;  // (1/2) * sum_{l <= h} w_l theta(l)
  Rat chi;        // chi(h) = 8 * sum_{l <= h} w_l sigma(l)/l

  bool operator==(const CertBlock&) const = default;
};

struct Certificate {
  unsigned m = 1;
  Convention convention = Convention::Proof;
  Gauge gauge;
  std::vector<CertBlock> blocks;
  Factorization support_end;  // first primorial past the support
  bool thinned = false;

  bool operator==(const Certificate&) const = default;
};

struct BuildResult {
  ApproxFunction psi;
  Certificate cert;
};

struct InfeasibilityReport {
  std::size_t failed_block = 0;  // 1-based block that could not be placed
  Rat required_lo, required_hi;  // certified bracket: theta needed >= 2 F(8T+8) - sum
  Rat achieved_lo, achieved_hi;  // theta at the last primorial within budget
  std::uint64_t prime_budget = 0;
  std::size_t primes_available = 0;
  std::uint64_t last_prime = 0;
};

using BuildOutcome = std::variant<BuildResult, InfeasibilityReport>;

struct BuildConfig {
  Gauge gauge;
  unsigned m = 1;
  std::size_t blocks = 1;
  std::uint64_t prime_budget = 1'000'000;
  // capacity guards for materializing the support explicitly
  std::size_t support_cap = 20'000;
  std::uint64_t work_cap = 60'000'000;  // support points * primes per point
};

// ---------------------------------------------------------------------------
// builder
// ---------------------------------------------------------------------------

namespace detail {

inline double dbl_down(double x) {
  return std::nextafter(x, -std::numeric_limits<double>::infinity());
}
inline double dbl_up(double x) {
  return std::nextafter(x, std::numeric_limits<double>::infinity());
}

}  // namespace detail

inline BuildOutcome build_psi(const BuildConfig& cfg) {
  if (cfg.m == 0) throw domain_error("build_psi: m must be >= 1");
  if (cfg.blocks == 0) throw domain_error("build_psi: need at least one block");

  PrimorialStream stream(cfg.prime_budget);
  std::span<const std::uint64_t> primes(stream.primes());

  struct Chosen {
    std::size_t idx;
    Rat theta;
  };
  std::vector<Chosen> chosen;
  Rat sum_theta(0);
  double sum_lo = 0.0, sum_hi = 0.0;
  double th_lo = 1.0, th_hi = 1.0;  // enclosure of theta(current primorial)
  std::size_t last_gap = 1;         // realized s_{t-1}; forces s nondecreasing
  bool thinned = false;

  while (chosen.size() < cfg.blocks) {
    const std::size_t t1 = chosen.size() + 1;
    const Rat x(static_cast<unsigned long>(8 * t1 + 8));
    auto [f_lo, f_hi] = cfg.gauge.bracket(x, 256);
    const double flo_d = double_bracket(f_lo).first;
    const double fhi_d = double_bracket(f_hi).second;

    bool placed = false;
    while (stream.advance()) {
      const std::uint64_t p = stream.last_prime();
      th_lo = detail::dbl_down(detail::dbl_down(th_lo * static_cast<double>(p)) /
                               static_cast<double>(p - 1));
      th_hi = detail::dbl_up(detail::dbl_up(th_hi * static_cast<double>(p)) /
                             static_cast<double>(p - 1));
      const std::size_t i = stream.index();
      const double lhs_lo = detail::dbl_down((sum_lo + th_lo) / 2);
      const double lhs_hi = detail::dbl_up((sum_hi + th_hi) / 2);
      if (!chosen.empty() && i - chosen.back().idx < last_gap) {
        // forbidden gap; note whether thinning suppressed a viable candidate
        if (lhs_lo >= fhi_d) thinned = true;
        continue;
      }
      if (lhs_hi < flo_d) continue;  // certainly below the threshold
      // possibly (or certainly) enough: settle it exactly
      Rat th_exact = totient_ratio_of_primes(primes.first(i));
      Rat lhs = (sum_theta + th_exact) / 2;
      if (!cfg.gauge.ge(lhs, x)) continue;
      if (!chosen.empty()) last_gap = i - chosen.back().idx;
      sum_theta += th_exact;
      auto [s_lo, s_hi] = double_bracket(sum_theta);
      sum_lo = s_lo;
      sum_hi = s_hi;
      auto [t_lo, t_hi] = double_bracket(th_exact);
      th_lo = t_lo;
      th_hi = t_hi;
      chosen.push_back({i, std::move(th_exact)});
      placed = true;
      break;
    }
    if (!placed) {
      InfeasibilityReport rep;
      rep.failed_block = t1;
      rep.required_lo = 2 * f_lo - sum_theta;
      rep.required_hi = 2 * f_hi - sum_theta;
      rep.prime_budget = stream.budget();
      rep.primes_available = stream.primes_available();
      rep.last_prime = primes.empty() ? 0 : primes.back();
      if (primes.size() <= 400'000) {
        Rat th = totient_ratio_of_primes(primes);
        rep.achieved_lo = th;
        rep.achieved_hi = std::move(th);
      } else {
        rep.achieved_lo = Rat(th_lo);
        rep.achieved_hi = Rat(th_hi);
      }
      return rep;
    }
  }

  // Close the last block with the minimal admissible step, keeping s_t
  // nondecreasing; the boundary primorial is one past the support.
  const std::size_t boundary_gap = cfg.blocks >= 2 ? last_gap : 1;
  const std::size_t boundary_idx = chosen.back().idx + boundary_gap;
  if (boundary_idx > primes.size())
    throw capacity_error("build_psi: prime budget cannot close the final block");

  const std::size_t base = chosen.front().idx;
  const std::size_t count = boundary_idx - base;
  if (count > cfg.support_cap)
    throw capacity_error("build_psi: support of " + std::to_string(count) +
                         " primorials exceeds the materialization cap");
  if (static_cast<std::uint64_t>(count) * boundary_idx > cfg.work_cap)
    throw capacity_error("build_psi: support materialization exceeds the work cap");

  const std::size_t T = cfg.blocks;
  std::vector<std::uint64_t> s(T);
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t next = t + 1 < T ? chosen[t + 1].idx : boundary_idx;
    s[t] = next - chosen[t].idx;
  }

  Factorization cur;
  cur.f.reserve(boundary_idx);
  for (std::size_t j = 0; j < base; ++j) cur.f.emplace_back(primes[j], 1);
  Rat theta = chosen.front().theta;
  Rat sig_ratio = sigma_ratio_of_primes(primes.first(base));
  Rat phi_acc(0), chil_acc(0), chi_acc(0);

  std::vector<SparseEntry> entries;
  entries.reserve(count);
  std::vector<CertBlock> blocks(T);
  std::size_t t = 0;
  for (std::size_t j = base; j < boundary_idx; ++j) {
    if (j > base) {
      const std::uint64_t p = primes[j - 1];
      cur.f.emplace_back(p, 1);
      theta *= Rat(p, p - 1);
      sig_ratio *= Rat(p + 1, p);
    }
    while (t + 1 < T && j >= chosen[t + 1].idx) ++t;
    Rat w(1, static_cast<unsigned long>(s[t]));
    phi_acc += w;
    chil_acc += w * theta;
    chi_acc += w * sig_ratio;
    entries.push_back({cur, Int(), w});
    if (j == chosen[t].idx) {
      blocks[t].index = j;
      blocks[t].s = s[t];
      blocks[t].h = cur;
      blocks[t].theta = theta;
      blocks[t].phi = 8 * phi_acc;
      blocks[t].chi_lower = chil_acc / 2;
      blocks[t].chi = 8 * chi_acc;
    }
  }
  cur.f.emplace_back(primes[boundary_idx - 1], 1);

  Certificate cert;
  cert.m = cfg.m;
  cert.convention = Convention::Proof;
  cert.gauge = cfg.gauge;
  cert.blocks = std::move(blocks);
  cert.support_end = std::move(cur);
  cert.thinned = thinned;

  return BuildResult{ApproxFunction::sparse(cfg.m, std::move(entries)), std::move(cert)};
}

// ---------------------------------------------------------------------------
// certification (independent of the builder)
// ---------------------------------------------------------------------------

struct CertifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CertifyReport {
  std::vector<CertifyCheck> checks;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](auto& c) { return c.pass; });
  }
  const CertifyCheck* find(std::string_view name) const {
    for (auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline CertifyReport certify(const ApproxFunction& psi, const Certificate& cert) {
  CertifyReport rep;
  auto add = [&](std::string name, bool pass, std::string detail = {}) {
    rep.checks.push_back({std::move(name), pass, std::move(detail)});
    return rep.checks.back().pass;
  };

  // representation sanity; nothing else is checkable if this fails
  {
    bool ok = psi.kind == ApproxFunction::Kind::Sparse && psi.sparse_m == cert.m &&
              cert.m >= 1 && !cert.blocks.empty() && !psi.support.empty() &&
              cert.convention == Convention::Proof && !cert.support_end.is_one();
    if (!add("representation", ok,
             ok ? "" : "need sparse psi, matching m, proof normalization, nonempty blocks"))
      return rep;
  }

  const auto& sup = psi.support;
  const std::size_t count = sup.size();
  const std::size_t T = cert.blocks.size();

  // support = consecutive primorials, closed off by support_end
  bool shape_ok = true;
  std::string shape_msg;
  const std::uint64_t max_p = cert.support_end.f.empty() ? 0 : cert.support_end.f.back().first;
  std::vector<std::uint64_t> ps = sieve_primes(max_p);
  auto is_primorial_prefix = [&](const Factorization& h) {
    if (h.omega() > ps.size()) return false;
    for (std::size_t k = 0; k < h.omega(); ++k)
      if (h.f[k] != std::make_pair(ps[k], std::uint32_t{1})) return false;
    return true;
  };
  if (!is_primorial_prefix(sup.front().l)) {
    shape_ok = false;
    shape_msg = "first support point is not a primorial";
  }
  for (std::size_t j = 0; shape_ok && j + 1 < count; ++j) {
    if (sup[j + 1].l.omega() != sup[j].l.omega() + 1 || !is_primorial_prefix(sup[j + 1].l)) {
      shape_ok = false;
      shape_msg = "support points are not consecutive primorials";
    }
  }
  if (shape_ok && (cert.support_end.omega() != sup.back().l.omega() + 1 ||
                   !is_primorial_prefix(cert.support_end))) {
    shape_ok = false;
    shape_msg = "support_end does not extend the support by one prime";
  }
  if (!add("support_consecutive_primorials", shape_ok, shape_msg)) return rep;

  const std::size_t base = sup.front().l.omega();
  auto block_pos = [&](std::size_t t) { return cert.blocks[t].index - base; };

  // block skeleton: positions on the support, steps tile it, s nondecreasing
  {
    bool ok = cert.blocks[0].index == base;
    std::string msg = ok ? "" : "first block does not open the support";
    for (std::size_t t = 0; ok && t < T; ++t) {
      const auto& b = cert.blocks[t];
      std::size_t pos = b.index >= base ? b.index - base : count;
      std::size_t next_idx =
          t + 1 < T ? cert.blocks[t + 1].index : cert.support_end.omega();
      if (pos >= count || sup[pos].l != b.h) {
        ok = false;
        msg = "block " + std::to_string(t + 1) + " does not sit on its support point";
      } else if (b.s == 0 || next_idx != b.index + b.s) {
        ok = false;
        msg = "block " + std::to_string(t + 1) + " step does not reach the next block";
      } else if (t > 0 && b.s < cert.blocks[t - 1].s) {
        ok = false;
        msg = "step sizes decrease at block " + std::to_string(t + 1);
      }
    }
    if (!add("block_skeleton", ok, msg)) return rep;
  }

  // uniform weights 1/s within each block
  {
    bool ok = true;
    std::string msg;
    for (std::size_t t = 0; t < T && ok; ++t) {
      Rat w(1, static_cast<unsigned long>(cert.blocks[t].s));
      for (std::size_t j = block_pos(t); j < block_pos(t) + cert.blocks[t].s; ++j)
        if (sup[j].weighted != w) {
          ok = false;
          msg = "weights in block " + std::to_string(t + 1) + " are not 1/s";
          break;
        }
    }
    add("block_weights_uniform", ok, msg);
  }

  // unit mass per block (independent summation)
  {
    bool ok = true;
    std::string msg;
    for (std::size_t t = 0; t < T && ok; ++t) {
      Rat mass(0);
      for (std::size_t j = block_pos(t); j < block_pos(t) + cert.blocks[t].s; ++j)
        mass += sup[j].weighted;
      if (mass != 1) {
        ok = false;
        msg = "block " + std::to_string(t + 1) + " mass " + format_rational(mass);
      }
    }
    add("block_sums_unit", ok, msg);
  }

  // psi nonincreasing on the support, and below 1/2 everywhere on it
  {
    bool ok = true;
    for (std::size_t j = 0; ok && j + 1 < count; ++j)
      if (sup[j].weighted * Rat(sup[j + 1].lv) < sup[j + 1].weighted * Rat(sup[j].lv))
        ok = false;
    add("psi_nonincreasing_on_support", ok);
    bool half_ok = true;
    Rat two_m = rat_pow(Rat(2), static_cast<long>(cert.m));
    for (std::size_t j = 0; half_ok && j < count; ++j)
      if (sup[j].weighted * two_m >= Rat(sup[j].lv)) half_ok = false;
    add("psi_below_half", half_ok);
  }

  // exact theta and sigma/l along the support (recomputed from the primes)
  std::vector<Rat> theta(count), sigr(count);
  {
    std::span<const std::uint64_t> pp(ps.data(), base);
    theta[0] = totient_ratio_of_primes(pp);
    sigr[0] = sigma_ratio_of_primes(pp);
    for (std::size_t j = 1; j < count; ++j) {
      const std::uint64_t p = ps[base + j - 1];
      theta[j] = theta[j - 1] * Rat(p, p - 1);
      sigr[j] = sigr[j - 1] * Rat(p + 1, p);
    }
  }

  // prefix feasibility: (1/2) sum_{j <= T'} theta(h_j) >= F(8T'+8)
  {
    bool ok = true;
    std::string msg;
    Rat acc(0);
    for (std::size_t t = 0; t < T && ok; ++t) {
      acc += theta[block_pos(t)];
      if (!cert.gauge.ge(acc / 2, Rat(static_cast<unsigned long>(8 * (t + 1) + 8)))) {
        ok = false;
        msg = "prefix " + std::to_string(t + 1) + " falls below the gauge";
      }
    }
    add("prefix_feasibility", ok, msg);
  }

  // running sum functions and checkpoint verdicts
  {
    Rat phi_acc(0), chil_acc(0), chi_acc(0);
    bool dom_ok = true, lower_ok = true, head_ok = true, match_ok = true;
    std::string dom_msg, head_msg, match_msg;
    std::size_t t = 0;
    for (std::size_t j = 0; j < count; ++j) {
      phi_acc += sup[j].weighted;
      chil_acc += sup[j].weighted * theta[j];
      chi_acc += sup[j].weighted * sigr[j];
      if (t < T && j == block_pos(t)) {
        const auto& b = cert.blocks[t];
        Rat phi = 8 * phi_acc, chil = chil_acc / 2, chi = 8 * chi_acc;
        if (t >= 1 && dom_ok && !cert.gauge.ge(chil, phi)) {
          dom_ok = false;
          dom_msg = "chi_lower < F(Phi) at block " + std::to_string(t + 1);
        }
        if (t >= 1 && head_ok && !cert.gauge.ge(chi, phi)) {
          head_ok = false;
          head_msg = "chi < F(Phi) at block " + std::to_string(t + 1);
        }
        if (lower_ok && chi < chil) lower_ok = false;
        if (match_ok &&
            !(b.theta == theta[j] && b.phi == phi && b.chi_lower == chil && b.chi == chi)) {
          match_ok = false;
          match_msg = "recomputed checkpoint differs at block " + std::to_string(t + 1);
        }
        ++t;
      }
    }
    add("checkpoint_domination", dom_ok, dom_msg);
    add("chi_exceeds_gauge", head_ok, head_msg);
    add("chi_dominates_lower", lower_ok);
    add("checkpoints_match", match_ok, match_msg);
  }

  return rep;
}

// Khintchine partial sums at the given heights (divergence evidence for the
// built psi; exact rationals).
inline std::vector<Rat> divergence_trace(const ApproxFunction& psi, unsigned n, unsigned m,
                                         const std::vector<Int>& checkpoints) {
  std::vector<Rat> out;
  out.reserve(checkpoints.size());
  for (const Int& h : checkpoints) out.push_back(khintchine_partial_sum(psi, n, m, h));
  return out;
}

}  // namespace kgx
