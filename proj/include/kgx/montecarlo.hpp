#pragma once

// Monte Carlo layer and the finite-N experiments built on it:
//
//   mc_slab_measure / mc_pair_measure   indicator-MC with a boundary guard
//   count_solutions                     exact #{q : ||qX|| < Psi(q), |q| <= h}
//   expected_count_check                E[count'] vs the exact series S_N
//   qia_report                          second-moment decomposition of the
//                                       Borel-Cantelli lower-bound ratio
//   schmidt_residual                    per-sample residual rows on an h-grid
//
// Determinism contract: every estimate is a pure function of (seed, samples).
// Sampling is counter-based (kgx/rng.hpp) and accumulators are integers, so
// worker count never changes any output bit.

#include "kgx/approx.hpp"
#include "kgx/arith.hpp"
#include "kgx/intvec.hpp"
#include "kgx/measures.hpp"
#include "kgx/rng.hpp"
#include "kgx/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

namespace kgx {

struct MCConfig {
  std::uint64_t seed = 0;
  std::uint64_t samples = 100000;
  unsigned workers = 1;
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t resampled = 0;  // boundary-guard retries

  bool operator==(const MCEstimate&) const = default;
};

inline constexpr double kBoundaryGuard = 1e-12;
inline constexpr std::uint64_t kEnumerationCap = 300'000'000;

namespace detail {

// Deterministic chunked parallel-for: fn(chunk_index, lo, hi).
template <class Fn>
void parallel_chunks(std::uint64_t total, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || total < 2) {
    fn(0u, std::uint64_t{0}, total);
    return;
  }
  std::uint64_t w = std::min<std::uint64_t>(workers, total);
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (std::uint64_t c = 0; c < w; ++c) {
    std::uint64_t lo = total * c / w, hi = total * (c + 1) / w;
    pool.emplace_back([&fn, c, lo, hi] { fn(static_cast<unsigned>(c), lo, hi); });
  }
  for (auto& t : pool) t.join();
}

inline MCEstimate estimate_from_hits(std::uint64_t hits, std::uint64_t n, std::uint64_t resampled) {
  MCEstimate e;
  e.samples = n;
  e.resampled = resampled;
  if (n == 0) return e;
  double mean = static_cast<double>(hits) / static_cast<double>(n);
  e.mean = mean;
  if (n > 1) {
    double var = (static_cast<double>(hits) - static_cast<double>(n) * mean * mean) /
                 static_cast<double>(n - 1);
    e.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(n));
  }
  return e;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// indicator MC with resampling guard
// ---------------------------------------------------------------------------

enum class Trial { In, Out, Boundary };

// pred(x, dim) -> Trial; samples X ~ U([0,1]^dim).  Boundary trials are
// resampled from a per-sample retry substream (up to 64 times, then Out).
template <class Pred>
MCEstimate mc_indicator(unsigned dim, const MCConfig& cfg, Pred&& pred) {
  if (dim == 0 || dim > 64) throw domain_error("mc_indicator: bad dimension");
  if (cfg.samples == 0) throw domain_error("mc_indicator: samples must be >= 1");
  unsigned w = std::max(1u, cfg.workers);
  std::vector<std::uint64_t> hits(w, 0), resam(w, 0);
  detail::parallel_chunks(cfg.samples, w, [&](unsigned c, std::uint64_t lo, std::uint64_t hi) {
    double x[64];
    std::uint64_t h = 0, rs = 0;
    for (std::uint64_t i = lo; i < hi; ++i) {
      std::uint64_t base = substream_base(cfg.seed, i);
      for (unsigned r = 0; r < 64; ++r) {
        for (unsigned k = 0; k < dim; ++k)
          x[k] = u53(rng_word(base, std::uint64_t(r) * dim + k));
        Trial t = pred(x, dim);
        if (t == Trial::Boundary) {
          ++rs;
          continue;
        }
        if (t == Trial::In) ++h;
        break;
      }
    }
    hits[c] = h;
    resam[c] = rs;
  });
  std::uint64_t H = 0, R = 0;
  for (unsigned c = 0; c < w; ++c) {
    H += hits[c];
    R += resam[c];
  }
  return detail::estimate_from_hits(H, cfg.samples, R);
}

namespace detail {

// Slab trial on a flat [0,1]^{n*m} point (row-major n x m).
inline Trial slab_trial(const double* x, const SlabSpec& s, double delta) {
  unsigned n = s.q.n(), m = s.m;
  std::uint64_t g = 0;
  for (unsigned j = 0; j < m; ++j) {
    double y = 0.0;
    for (unsigned i = 0; i < n; ++i) y += static_cast<double>(s.q.q[i]) * x[std::size_t(i) * m + j];
    double r = std::nearbyint(y);
    double d = std::abs(y - r);
    if (std::abs(d - delta) < kBoundaryGuard) return Trial::Boundary;
    if (d >= delta) return Trial::Out;
    if (s.coprime) {
      long long p = -static_cast<long long>(r);
      std::uint64_t ap = p < 0 ? static_cast<std::uint64_t>(-(p + 1)) + 1 : static_cast<std::uint64_t>(p);
      g = std::gcd(g, ap);
    }
  }
  if (s.coprime && std::gcd(g, s.q.content()) != 1) return Trial::Out;
  return Trial::In;
}

}  // namespace detail

inline MCEstimate mc_slab_measure(const SlabSpec& s, const MCConfig& cfg) {
  s.validate();
  double delta = to_double(s.delta);
  unsigned dim = s.q.n() * s.m;
  return mc_indicator(dim, cfg, [&](const double* x, unsigned) {
    return detail::slab_trial(x, s, delta);
  });
}

// Joint measure of two slabs over the same X (shapes must match).
inline MCEstimate mc_pair_measure(const SlabSpec& a, const SlabSpec& b, const MCConfig& cfg) {
  a.validate();
  b.validate();
  if (a.q.n() != b.q.n() || a.m != b.m) throw domain_error("mc_pair_measure: shape mismatch");
  double da = to_double(a.delta), db = to_double(b.delta);
  unsigned dim = a.q.n() * a.m;
  return mc_indicator(dim, cfg, [&](const double* x, unsigned) {
    Trial ta = detail::slab_trial(x, a, da);
    if (ta == Trial::Boundary) return Trial::Boundary;
    Trial tb = detail::slab_trial(x, b, db);
    if (tb == Trial::Boundary) return Trial::Boundary;
    return (ta == Trial::In && tb == Trial::In) ? Trial::In : Trial::Out;
  });
}

// ---------------------------------------------------------------------------
// exact counting
// ---------------------------------------------------------------------------

namespace detail {

struct CountContext {
  unsigned n = 2, m = 1;
  std::uint64_t h = 0;
  bool plane = false;               // lattice restricted to (q1, q2, 0, ...)
  std::vector<double> delta;        // delta[l] for dense lifts (n >= 2)
  bool on_the_fly = false;          // n = 1: evaluate psi per norm
  const ApproxFunction* psi = nullptr;
  bool ztable = false;
  std::vector<std::pair<std::vector<long long>, double>> zent;
};

inline CountContext make_count_context(const MultiApprox& Psi, unsigned m, std::uint64_t h) {
  if (h < 1) throw domain_error("count_solutions: h must be >= 1");
  CountContext cx;
  cx.n = Psi.n;
  cx.m = m;
  cx.h = h;
  if (Psi.kind == MultiApprox::Kind::ZTable) {
    cx.ztable = true;
    for (auto& [q, v] : Psi.ztable) {
      IntVec iv{q};
      if (iv.sup_norm() > h || sgn(v) == 0) continue;
      if (!(v < Rat(1, 2)))
        throw domain_error("count_solutions: Psi >= 1/2 at q = (" + iv.str() + ")");
      cx.zent.emplace_back(q, to_double(v));
    }
    return cx;
  }
  cx.plane = Psi.kind == MultiApprox::Kind::PlaneLift;
  unsigned geom_n = cx.plane ? 2 : Psi.n;
  Psi.psi.require_below_half(h);
  if (geom_n == 1) {
    cx.on_the_fly = true;
    cx.psi = &Psi.psi;
    if (2 * h > kEnumerationCap) throw capacity_error("count_solutions: enumeration too large");
    return cx;
  }
  if (Psi.psi.kind == ApproxFunction::Kind::Sparse && geom_n != 2)
    throw capacity_error("count_solutions: sparse support only enumerable in plane geometry");
  double pts = std::pow(2.0 * static_cast<double>(h) + 1.0, static_cast<double>(geom_n));
  if (pts > static_cast<double>(kEnumerationCap))
    throw capacity_error("count_solutions: enumeration too large at h = " + std::to_string(h));
  cx.delta.assign(h + 1, 0.0);
  if (Psi.psi.kind == ApproxFunction::Kind::Sparse) {
    for (auto& e : Psi.psi.support) {
      if (e.lv > to_int(h)) break;
      cx.delta[to_u64(e.lv)] = Psi.psi.value_double(to_u64(e.lv));
    }
  } else if (Psi.psi.kind == ApproxFunction::Kind::Table) {
    for (auto& [l, v] : Psi.psi.table) {
      if (l > h) break;
      cx.delta[l] = Psi.psi.value_double(l);
    }
  } else {
    for (std::uint64_t l = 1; l <= h; ++l) cx.delta[l] = Psi.psi.value_double(l);
  }
  return cx;
}

// One lattice point: does ||qX|| < delta hold (optionally with primitive
// witness)?  X row-major n x m; q given as a small stack array.
inline bool point_hit(const double* X, unsigned n, unsigned m, const long long* q, unsigned qn,
                      double delta, bool coprime) {
  std::uint64_t g = 0;
  for (unsigned j = 0; j < m; ++j) {
    double y = 0.0;
    for (unsigned i = 0; i < qn; ++i) y += static_cast<double>(q[i]) * X[std::size_t(i) * m + j];
    double r = std::nearbyint(y);
    if (!(std::abs(y - r) < delta)) return false;
    if (coprime) {
      long long p = -static_cast<long long>(r);
      std::uint64_t ap = p < 0 ? static_cast<std::uint64_t>(-(p + 1)) + 1 : static_cast<std::uint64_t>(p);
      g = std::gcd(g, ap);
    }
  }
  if (coprime) {
    for (unsigned i = 0; i < qn; ++i) {
      long long v = q[i];
      std::uint64_t av = v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1 : static_cast<std::uint64_t>(v);
      g = std::gcd(g, av);
    }
    return g == 1;
  }
  return true;
}

// Accumulates hits per sup-norm into hist[1..h].
inline void count_into_histogram(const Matrix& X, const CountContext& cx, bool coprime,
                                 std::vector<long long>& hist) {
  hist.assign(cx.h + 1, 0);
  const double* Xp = X.a.data();
  unsigned m = cx.m;
  if (cx.ztable) {
    for (auto& [qv, dv] : cx.zent) {
      IntVec q{qv};
      if (point_hit(Xp, cx.n, m, qv.data(), static_cast<unsigned>(qv.size()), dv, coprime))
        hist[q.sup_norm()] += 1;
    }
    return;
  }
  if (cx.on_the_fly) {  // geometry n = 1
    for (std::uint64_t l = 1; l <= cx.h; ++l) {
      double d = cx.psi->value_double(l);
      if (d <= 0.0) continue;
      for (int s = 0; s < 2; ++s) {
        long long q0 = s ? -static_cast<long long>(l) : static_cast<long long>(l);
        if (point_hit(Xp, 1, m, &q0, 1, d, coprime)) hist[l] += 1;
      }
    }
    return;
  }
  unsigned geom_n = cx.plane ? 2 : cx.n;
  long long H = static_cast<long long>(cx.h);
  if (geom_n == 2) {
    long long q[2];
    for (long long a = -H; a <= H; ++a) {
      q[0] = a;
      long long aa = a < 0 ? -a : a;
      for (long long b = -H; b <= H; ++b) {
        if (a == 0 && b == 0) continue;
        long long bb = b < 0 ? -b : b;
        long long l = aa > bb ? aa : bb;
        double d = cx.delta[static_cast<std::uint64_t>(l)];
        if (d <= 0.0) continue;
        q[1] = b;
        if (point_hit(Xp, cx.plane ? cx.n : 2, m, q, 2, d, coprime)) hist[l] += 1;
      }
    }
    return;
  }
  if (geom_n == 3) {
    long long q[3];
    for (long long a = -H; a <= H; ++a) {
      long long aa = a < 0 ? -a : a;
      q[0] = a;
      for (long long b = -H; b <= H; ++b) {
        long long bb = b < 0 ? -b : b;
        long long lab = aa > bb ? aa : bb;
        q[1] = b;
        for (long long c = -H; c <= H; ++c) {
          if (a == 0 && b == 0 && c == 0) continue;
          long long cc = c < 0 ? -c : c;
          long long l = lab > cc ? lab : cc;
          double d = cx.delta[static_cast<std::uint64_t>(l)];
          if (d <= 0.0) continue;
          q[2] = c;
          if (point_hit(Xp, 3, m, q, 3, d, coprime)) hist[l] += 1;
        }
      }
    }
    return;
  }
  throw capacity_error("count_solutions: dense enumeration supports n <= 3");
}

}  // namespace detail

// Exact number of solutions q (0 < |q| <= h, Psi(q) > 0) of ||qX|| < Psi(q);
// coprime additionally requires the witness p to satisfy gcd(p, q) = 1.
inline long long count_solutions(const Matrix& X, const MultiApprox& Psi, unsigned m,
                                 std::uint64_t h, bool coprime) {
  if (X.n != Psi.n || X.m != m) throw domain_error("count_solutions: shape mismatch");
  auto cx = detail::make_count_context(Psi, m, h);
  std::vector<long long> hist;
  detail::count_into_histogram(X, cx, coprime, hist);
  long long total = 0;
  for (auto v : hist) total += v;
  return total;
}

// ---------------------------------------------------------------------------
// expected-count cross-check:  E[count'] = S_h
// ---------------------------------------------------------------------------

struct CountCheckReport {
  Rat exact;
  MCEstimate estimate;
  double sigmas = 0.0;
  bool pass = false;
};

inline CountCheckReport expected_count_check(const ApproxFunction& psi, unsigned n, unsigned m,
                                             std::uint64_t h, const MCConfig& cfg) {
  if (cfg.samples < 2) throw domain_error("expected_count_check: need >= 2 samples");
  CountCheckReport rep;
  rep.exact = sum_B_prime_measures(psi, n, m, h);
  MultiApprox Psi = MultiApprox::norm_lift(psi, n);
  auto cx = detail::make_count_context(Psi, m, h);
  unsigned dim = n * m;
  unsigned w = std::max(1u, cfg.workers);
  std::vector<unsigned __int128> sums(w, 0), sqsums(w, 0);
  detail::parallel_chunks(cfg.samples, w, [&](unsigned c, std::uint64_t lo, std::uint64_t hi) {
    Matrix X = Matrix::zero(n, m);
    std::vector<long long> hist;
    unsigned __int128 s = 0, s2 = 0;
    for (std::uint64_t i = lo; i < hi; ++i) {
      std::uint64_t base = substream_base(cfg.seed, i);
      for (unsigned k = 0; k < dim; ++k) X.a[k] = u53(rng_word(base, k));
      detail::count_into_histogram(X, cx, /*coprime=*/true, hist);
      long long cnt = 0;
      for (auto v : hist) cnt += v;
      s += static_cast<unsigned __int128>(cnt);
      s2 += static_cast<unsigned __int128>(cnt) * static_cast<unsigned __int128>(cnt);
    }
    sums[c] = s;
    sqsums[c] = s2;
  });
  unsigned __int128 S = 0, S2 = 0;
  for (unsigned c = 0; c < w; ++c) {
    S += sums[c];
    S2 += sqsums[c];
  }
  double ns = static_cast<double>(cfg.samples);
  double mean = static_cast<double>(S) / ns;
  double var = (static_cast<double>(S2) - ns * mean * mean) / (ns - 1.0);
  rep.estimate.mean = mean;
  rep.estimate.std_error = std::sqrt(std::max(0.0, var) / ns);
  rep.estimate.samples = cfg.samples;
  double diff = std::abs(mean - to_double(rep.exact));
  rep.sigmas = rep.estimate.std_error > 0 ? diff / rep.estimate.std_error
                                          : (diff == 0.0 ? 0.0 : HUGE_VAL);
  rep.pass = diff <= 4.0 * rep.estimate.std_error;
  return rep;
}

// ---------------------------------------------------------------------------
// quasi-independence (second moment) harness
// ---------------------------------------------------------------------------

struct ParallelClassAudit {
  std::uint64_t l = 0, k1 = 0, k2 = 0;
  Int mult;            // # ordered pairs in the class = 4 * primitive_count(n, l)
  Rat independence;    // |B'(k1 e)| * |B'(k2 e)|
  MCEstimate inter;    // MC estimate of |B'(k1, d1) cap B'(k2, d2)| on [0,1]^m
  double ratio = 0.0;  // inter.mean / (d1 d2)^m
};

struct QIAReport {
  unsigned n = 0, m = 0;
  std::uint64_t N = 0;
  std::uint64_t seed = 0, samples_per_class = 0;
  unsigned workers = 1;

  Rat S;                    // sum of |B'| over 0 < |q| <= N
  Rat diag;                 // 2S: contribution of q2 = +-q1
  Rat sum_sq;               // sum over q of |B'_q|^2
  Rat nonparallel_product;  // exact: independent (non-parallel) pair part
  Rat parallel_product;     // what independence would predict for parallel part
  double parallel_mc = 0.0;  // MC: actual parallel part
  double parallel_se = 0.0;
  std::uint64_t parallel_classes = 0, parallel_classes_sampled = 0;
  bool capped = false;
  double max_parallel_ratio = 0.0;
  std::vector<ParallelClassAudit> audits;  // small reporting subset

  double D() const { return to_double(diag) + to_double(nonparallel_product) + parallel_mc; }
  double ratio() const { return D() / to_double(S * S); }
  double bc_lower_bound() const { return to_double(S * S) / D(); }
};

inline QIAReport qia_report(const ApproxFunction& psi, unsigned n, unsigned m, std::uint64_t N,
                            const MCConfig& cfg, std::uint64_t class_cap = 32768,
                            std::size_t audit_limit = 16) {
  if (n < 1 || m < 1 || static_cast<std::uint64_t>(n) * m <= 1)
    throw domain_error("qia_report: requires nm > 1");
  if (N < 1 || N > 1000000) throw capacity_error("qia_report: N out of supported range");
  psi.require_below_half(N);
  if (!psi.exact_pow_available(m) || !psi.exact_pow_available(2 * m))
    throw domain_error("qia_report: psi^m must be exactly representable");

  QIAReport rep;
  rep.n = n;
  rep.m = m;
  rep.N = N;
  rep.seed = cfg.seed;
  rep.samples_per_class = cfg.samples;
  rep.workers = std::max(1u, cfg.workers);

  rep.S = sum_B_prime_measures(psi, n, m, N);
  Rat two_m = rat_pow(Rat(2), static_cast<long>(m));

  // exact per-height machinery
  auto spf = spf_table(static_cast<std::uint32_t>(N));
  std::vector<Rat> cd = coprime_density_table(m, static_cast<std::uint32_t>(N));
  std::vector<Int> pc = primitive_count_table(n, static_cast<std::uint32_t>(N));
  std::vector<Rat> psim(N + 1);  // psi(h)^m
  for (std::uint64_t h = 1; h <= N; ++h) psim[h] = psi.value_pow(h, m);

  // sum over q of |B'_q|^2 = sum_h (2psi)^{2m} sum_{d|h} cd(d,m)^2 pc(n, h/d)
  rep.sum_sq = Rat(0);
  for (std::uint64_t h = 1; h <= N; ++h) {
    if (sgn(psim[h]) == 0) continue;
    Rat inner(0);
    Factorization f = Factorization::from_spf(static_cast<std::uint32_t>(h), spf);
    f.for_each_divisor([&](const Factorization& d) {
      std::uint64_t dv = d.value_u64();
      inner += cd[dv] * cd[dv] * Rat(pc[to_u64(f.value() / to_int(dv))]);
    });
    rep.sum_sq += rat_pow(two_m * psim[h], 2) * inner;
  }
  rep.diag = 2 * rep.S;

  // Parallel classes (l, k1, k2): q1 = k1 e, q2 = +-k2 e over primitive e of
  // norm l; the intersection is symmetric in (k1, k2), so enumerate k1 < k2
  // and count both orders: multiplicity 4 * primitive_count(n, l).
  struct Cls {
    std::uint64_t l, k1, k2;
  };
  std::vector<Cls> classes;
  rep.parallel_product = Rat(0);
  for (std::uint64_t l = 1; 2 * l <= N; ++l) {
    if (sgn(pc[l]) == 0) continue;
    std::uint64_t K = N / l;
    for (std::uint64_t k1 = 1; k1 <= K; ++k1) {
      if (sgn(psim[k1 * l]) == 0) continue;
      for (std::uint64_t k2 = k1 + 1; k2 <= K; ++k2) {
        if (sgn(psim[k2 * l]) == 0) continue;
        classes.push_back({l, k1, k2});
        Rat prod = two_m * psim[k1 * l] * cd[k1] * two_m * psim[k2 * l] * cd[k2];
        rep.parallel_product += Rat(4 * pc[l]) * prod;
      }
    }
  }
  rep.parallel_classes = classes.size();
  rep.nonparallel_product = rep.S * rep.S - 2 * rep.sum_sq - rep.parallel_product;

  // deterministic stratified cap: per-norm strata, evenly spaced picks
  std::vector<std::size_t> picked;
  picked.reserve(classes.size());
  if (classes.size() <= class_cap) {
    for (std::size_t i = 0; i < classes.size(); ++i) picked.push_back(i);
  } else {
    rep.capped = true;
    std::size_t lo = 0;
    while (lo < classes.size()) {
      std::size_t hi = lo;
      while (hi < classes.size() && classes[hi].l == classes[lo].l) ++hi;
      std::size_t stratum = hi - lo;
      std::size_t want = std::max<std::size_t>(
          1, static_cast<std::size_t>(static_cast<double>(class_cap) * stratum /
                                      static_cast<double>(classes.size())));
      want = std::min(want, stratum);
      for (std::size_t t = 0; t < want; ++t)
        picked.push_back(lo + t * stratum / want);
      lo = hi;
    }
  }
  rep.parallel_classes_sampled = picked.size();

  // per-class MC on [0,1]^m via the torus reduction; stratum scaling keeps the
  // estimator exact-in-expectation relative to the independence weights
  struct ClsResult {
    double contrib = 0.0, se = 0.0, ratio = 0.0;
    Rat prod_sampled;  // independence value of sampled class (for scaling)
    std::uint64_t l = 0;
  };
  std::vector<ClsResult> results(picked.size());
  MCConfig class_cfg = cfg;
  class_cfg.workers = 1;
  detail::parallel_chunks(picked.size(), rep.workers, [&](unsigned, std::uint64_t lo, std::uint64_t hi) {
    for (std::uint64_t t = lo; t < hi; ++t) {
      const Cls& c = classes[picked[t]];
      // delta_i = psi(k_i l); the double value is the membership threshold
      double d1 = psi.value_double(c.k1 * c.l);
      double d2 = psi.value_double(c.k2 * c.l);
      MCConfig one = class_cfg;
      one.seed = mix64(cfg.seed ^ mix64(c.l * 0x9E3779B97F4A7C15ull ^
                                        mix64(c.k1 * 0xD1342543DE82EF95ull + c.k2)));
      std::uint64_t hits = 0, resam = 0;
      std::uint64_t base_stream = one.seed;
      for (std::uint64_t i = 0; i < one.samples; ++i) {
        std::uint64_t base = substream_base(base_stream, i);
        for (unsigned r = 0; r < 64; ++r) {
          bool in = true, boundary = false;
          std::uint64_t g1 = 0, g2 = 0;
          for (unsigned j = 0; j < m && (in || boundary); ++j) {
            double u = u53(rng_word(base, std::uint64_t(r) * m + j));
            double y1 = static_cast<double>(c.k1) * u, y2 = static_cast<double>(c.k2) * u;
            double r1 = std::nearbyint(y1), r2 = std::nearbyint(y2);
            double e1 = std::abs(y1 - r1), e2 = std::abs(y2 - r2);
            if (std::abs(e1 - d1) < kBoundaryGuard || std::abs(e2 - d2) < kBoundaryGuard) {
              boundary = true;
              break;
            }
            if (e1 >= d1 || e2 >= d2) {
              in = false;
              break;
            }
            long long p1 = -static_cast<long long>(r1), p2 = -static_cast<long long>(r2);
            g1 = std::gcd(g1, static_cast<std::uint64_t>(p1 < 0 ? -p1 : p1));
            g2 = std::gcd(g2, static_cast<std::uint64_t>(p2 < 0 ? -p2 : p2));
          }
          if (boundary) {
            ++resam;
            continue;
          }
          if (in && std::gcd(g1, c.k1) == 1 && std::gcd(g2, c.k2) == 1) ++hits;
          break;
        }
      }
      MCEstimate est = detail::estimate_from_hits(hits, one.samples, resam);
      ClsResult& out = results[t];
      out.l = c.l;
      double multd = 4.0 * to_double(Rat(pc[c.l]));
      out.contrib = multd * est.mean;
      out.se = multd * est.std_error;
      double denom = std::pow(d1 * d2, static_cast<double>(m));
      out.ratio = denom > 0 ? est.mean / denom : 0.0;
      Rat prod = two_m * psim[c.k1 * c.l] * cd[c.k1] * two_m * psim[c.k2 * c.l] * cd[c.k2];
      out.prod_sampled = Rat(4 * pc[c.l]) * prod;
    }
  });

  // aggregate (with per-stratum scaling when capped)
  double mc_total = 0.0, se2_total = 0.0, max_ratio = 0.0;
  if (!rep.capped) {
    for (auto& r : results) {
      mc_total += r.contrib;
      se2_total += r.se * r.se;
      max_ratio = std::max(max_ratio, r.ratio);
    }
  } else {
    // scale each sampled stratum by exact independence weights
    std::size_t lo = 0;
    // exact stratum weights over all classes
    std::vector<std::pair<std::uint64_t, Rat>> stratum_weight;  // (l, sum mult*prod)
    for (std::size_t i = 0; i < classes.size();) {
      std::size_t j = i;
      Rat wsum(0);
      while (j < classes.size() && classes[j].l == classes[i].l) {
        const Cls& c = classes[j];
        Rat prod = two_m * psim[c.k1 * c.l] * cd[c.k1] * two_m * psim[c.k2 * c.l] * cd[c.k2];
        wsum += Rat(4 * pc[c.l]) * prod;
        ++j;
      }
      stratum_weight.emplace_back(classes[i].l, wsum);
      i = j;
    }
    std::size_t sw = 0;
    while (lo < results.size()) {
      std::size_t hi = lo;
      while (hi < results.size() && results[hi].l == results[lo].l) ++hi;
      while (sw < stratum_weight.size() && stratum_weight[sw].first != results[lo].l) ++sw;
      Rat sampled_w(0);
      for (std::size_t t = lo; t < hi; ++t) sampled_w += results[t].prod_sampled;
      double scale = sgn(sampled_w) > 0 && sw < stratum_weight.size()
                         ? to_double(stratum_weight[sw].second) / to_double(sampled_w)
                         : 1.0;
      for (std::size_t t = lo; t < hi; ++t) {
        mc_total += scale * results[t].contrib;
        se2_total += scale * scale * results[t].se * results[t].se;
        max_ratio = std::max(max_ratio, results[t].ratio);
      }
      lo = hi;
    }
  }
  rep.parallel_mc = mc_total;
  rep.parallel_se = std::sqrt(se2_total);
  rep.max_parallel_ratio = max_ratio;

  for (std::size_t t = 0; t < picked.size() && rep.audits.size() < audit_limit; ++t) {
    const Cls& c = classes[picked[t]];
    ParallelClassAudit a;
    a.l = c.l;
    a.k1 = c.k1;
    a.k2 = c.k2;
    a.mult = 4 * pc[c.l];
    a.independence = results[t].prod_sampled / Rat(a.mult);
    a.independence.canonicalize();
    a.inter.mean = results[t].contrib / (4.0 * to_double(Rat(pc[c.l])));
    a.inter.std_error = results[t].se / (4.0 * to_double(Rat(pc[c.l])));
    a.inter.samples = cfg.samples;
    a.ratio = results[t].ratio;
    rep.audits.push_back(std::move(a));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Schmidt residual table
// ---------------------------------------------------------------------------

struct SchmidtRow {
  std::uint64_t sample_id = 0;
  std::uint64_t h = 0;
  long long count = 0;
  Rat phi, chi;
  double residual = 0.0;
  double normalized = 0.0;
  bool normalized_defined = false;  // requires chi > 1
};

struct SchmidtConfig {
  std::vector<std::uint64_t> grid;  // ascending heights
  double epsilon = 0.1;
  Convention convention = Convention::Theorem;
  bool coprime = false;  // count primitive-witness solutions instead
};

inline std::vector<SchmidtRow> schmidt_residual(const MultiApprox& Psi, unsigned m,
                                                const SchmidtConfig& sc, const MCConfig& cfg) {
  if (sc.grid.empty()) throw domain_error("schmidt_residual: empty grid");
  for (std::size_t i = 1; i < sc.grid.size(); ++i)
    if (sc.grid[i] <= sc.grid[i - 1]) throw domain_error("schmidt_residual: grid must ascend");
  if (cfg.samples == 0) throw domain_error("schmidt_residual: samples must be >= 1");
  std::uint64_t hmax = sc.grid.back();
  auto cx = detail::make_count_context(Psi, m, hmax);

  // exact series values at grid points (shared across samples)
  std::vector<Rat> phis, chis;
  phis.reserve(sc.grid.size());
  chis.reserve(sc.grid.size());
  for (std::uint64_t h : sc.grid) {
    phis.push_back(schmidt_main_term(Psi, m, to_int(h), sc.convention));
    chis.push_back(schmidt_divisor_term(Psi, m, to_int(h), sc.convention));
  }

  unsigned dim = Psi.n * m;
  std::vector<SchmidtRow> rows(cfg.samples * sc.grid.size());
  detail::parallel_chunks(cfg.samples, std::max(1u, cfg.workers),
                          [&](unsigned, std::uint64_t lo, std::uint64_t hi) {
    Matrix X = Matrix::zero(Psi.n, m);
    std::vector<long long> hist;
    for (std::uint64_t i = lo; i < hi; ++i) {
      std::uint64_t base = substream_base(cfg.seed, i);
      for (unsigned k = 0; k < dim; ++k) X.a[k] = u53(rng_word(base, k));
      detail::count_into_histogram(X, cx, sc.coprime, hist);
      long long running = 0;
      std::size_t gi = 0;
      for (std::uint64_t l = 1; l <= hmax && gi < sc.grid.size(); ++l) {
        running += hist[l];
        if (l == sc.grid[gi]) {
          SchmidtRow& r = rows[i * sc.grid.size() + gi];
          r.sample_id = i;
          r.h = l;
          r.count = running;
          r.phi = phis[gi];
          r.chi = chis[gi];
          double phid = to_double(r.phi), chid = to_double(r.chi);
          r.residual = static_cast<double>(running) - phid;
          if (chid > 1.0) {
            r.normalized_defined = true;
            r.normalized = r.residual /
                           (std::sqrt(chid) * std::pow(std::log(chid), 1.5 + sc.epsilon));
          }
          ++gi;
        }
      }
    }
  });
  return rows;
}

}  // namespace kgx
