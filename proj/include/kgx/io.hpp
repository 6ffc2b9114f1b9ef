#pragma once

// Serialization: ordered JSON (stable key order => byte-identical reruns) for
// the value types and reports, a CSV emitter for Schmidt residual rows, and a
// small FNV-1a digest for determinism checks.  Rationals travel as canonical
// "num/den" strings, factored integers as "2^3*5*7" strings, so nothing is
// lost to floating point on the way through a file.

#include "kgx/approx.hpp"
#include "kgx/counterexample.hpp"
#include "kgx/gauge.hpp"
#include "kgx/measures.hpp"
#include "kgx/montecarlo.hpp"
#include "kgx/series.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kgx {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// digest / formatting helpers
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string digest_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(bytes));
  return buf;
}

// Shortest round-trip double formatting (matches the JSON emitter).
inline std::string format_double(double v) {
  return Json(v).dump();
}

// ---------------------------------------------------------------------------
// value types
// ---------------------------------------------------------------------------

inline Json to_json(const SlabSpec& s) {
  return Json{{"q", s.q.str()},
              {"m", s.m},
              {"delta", format_rational(s.delta)},
              {"coprime", s.coprime}};
}

inline SlabSpec slab_from(const Json& j) {
  SlabSpec s;
  s.q = IntVec::parse(j.at("q").get<std::string>());
  s.m = j.at("m").get<unsigned>();
  s.delta = parse_rational(j.at("delta").get<std::string>());
  s.coprime = j.at("coprime").get<bool>();
  s.validate();
  return s;
}

inline Json to_json(const ApproxFunction& f) {
  Json j;
  switch (f.kind) {
    case ApproxFunction::Kind::Constant:
      j["kind"] = "constant";
      j["c"] = format_rational(f.c);
      break;
    case ApproxFunction::Kind::Power:
      j["kind"] = "power";
      j["c"] = format_rational(f.c);
      j["tau"] = format_rational(f.tau);
      break;
    case ApproxFunction::Kind::Table: {
      j["kind"] = "table";
      Json vals = Json::object();
      for (auto& [h, v] : f.table) vals[std::to_string(h)] = format_rational(v);
      j["values"] = std::move(vals);
      break;
    }
    case ApproxFunction::Kind::Sparse: {
      j["kind"] = "sparse";
      j["m"] = f.sparse_m;
      Json sup = Json::array();
      for (auto& e : f.support)
        sup.push_back(Json{{"l", e.l.str()}, {"lpsim", format_rational(e.weighted)}});
      j["support"] = std::move(sup);
      break;
    }
  }
  if (f.cap) j["cap"] = format_rational(*f.cap);
  return j;
}

inline ApproxFunction approx_from(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  ApproxFunction f;
  if (kind == "constant") {
    f = ApproxFunction::constant(parse_rational(j.at("c").get<std::string>()));
  } else if (kind == "power") {
    f = ApproxFunction::power(parse_rational(j.at("c").get<std::string>()),
                              parse_rational(j.at("tau").get<std::string>()));
  } else if (kind == "table") {
    std::map<std::uint64_t, Rat> t;
    for (auto& [k, v] : j.at("values").items())
      t[to_u64(parse_integer(k))] = parse_rational(v.get<std::string>());
    f = ApproxFunction::from_table(std::move(t));
  } else if (kind == "sparse") {
    std::vector<SparseEntry> entries;
    for (auto& e : j.at("support"))
      entries.push_back({Factorization::parse(e.at("l").get<std::string>()), Int(),
                         parse_rational(e.at("lpsim").get<std::string>())});
    f = ApproxFunction::sparse(j.at("m").get<unsigned>(), std::move(entries));
  } else {
    throw parse_error("unknown approximating-function kind: '" + kind + "'");
  }
  if (j.contains("cap")) f = truncate_min(f, parse_rational(j.at("cap").get<std::string>()));
  return f;
}

inline Json to_json(const MultiApprox& f) {
  Json j;
  switch (f.kind) {
    case MultiApprox::Kind::NormLift:
      j["kind"] = "norm_lift";
      break;
    case MultiApprox::Kind::PlaneLift:
      j["kind"] = "plane_lift";
      break;
    case MultiApprox::Kind::ZTable:
      j["kind"] = "z_table";
      break;
  }
  j["n"] = f.n;
  if (f.kind == MultiApprox::Kind::ZTable) {
    Json vals = Json::array();
    for (auto& [q, v] : f.ztable)
      vals.push_back(Json{{"q", IntVec{q}.str()}, {"value", format_rational(v)}});
    j["values"] = std::move(vals);
  } else {
    j["psi"] = to_json(f.psi);
  }
  return j;
}

inline MultiApprox multi_from(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  unsigned n = j.at("n").get<unsigned>();
  if (kind == "norm_lift") return MultiApprox::norm_lift(approx_from(j.at("psi")), n);
  if (kind == "plane_lift") return MultiApprox::plane_lift(approx_from(j.at("psi")), n);
  if (kind == "z_table") {
    std::map<std::vector<long long>, Rat> vals;
    for (auto& e : j.at("values"))
      vals[IntVec::parse(e.at("q").get<std::string>()).q] =
          parse_rational(e.at("value").get<std::string>());
    return MultiApprox::z_table(n, std::move(vals));
  }
  throw parse_error("unknown lift kind: '" + kind + "'");
}

inline Json to_json(const Gauge& g) {
  Json j{{"kind", g.name()}};
  if (g.kind == Gauge::Kind::Linear) {
    j["a"] = format_rational(g.a);
    j["b"] = format_rational(g.b);
  } else if (g.kind == Gauge::Kind::Exp) {
    j["a"] = format_rational(g.a);
  }
  return j;
}

inline Gauge gauge_from(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") return Gauge::identity();
  if (kind == "log") return Gauge::log();
  if (kind == "linear")
    return Gauge::linear(parse_rational(j.at("a").get<std::string>()),
                         parse_rational(j.at("b").get<std::string>()));
  if (kind == "exp") return Gauge::exp(parse_rational(j.at("a").get<std::string>()));
  throw parse_error("unknown gauge kind: '" + kind + "'");
}

// ---------------------------------------------------------------------------
// certificates
// ---------------------------------------------------------------------------

inline Json to_json(const CertBlock& b) {
  return Json{{"index", b.index},
              {"s", b.s},
              {"h", b.h.str()},
              {"theta", format_rational(b.theta)},
              {"phi", format_rational(b.phi)},
              {"chi_lower", format_rational(b.chi_lower)},
              {"chi", format_rational(b.chi)}};
}

inline CertBlock cert_block_from(const Json& j) {
  CertBlock b;
  b.index = j.at("index").get<std::size_t>();
  b.s = j.at("s").get<std::uint64_t>();
  b.h = Factorization::parse(j.at("h").get<std::string>());
  b.theta = parse_rational(j.at("theta").get<std::string>());
  b.phi = parse_rational(j.at("phi").get<std::string>());
  b.chi_lower = parse_rational(j.at("chi_lower").get<std::string>());
  b.chi = parse_rational(j.at("chi").get<std::string>());
  return b;
}

inline Json to_json(const Certificate& c) {
  Json blocks = Json::array();
  for (auto& b : c.blocks) blocks.push_back(to_json(b));
  return Json{{"m", c.m},
              {"convention", convention_name(c.convention)},
              {"gauge", to_json(c.gauge)},
              {"thinned", c.thinned},
              {"support_end", c.support_end.str()},
              {"blocks", std::move(blocks)}};
}

inline Certificate certificate_from(const Json& j) {
  Certificate c;
  c.m = j.at("m").get<unsigned>();
  c.convention = parse_convention(j.at("convention").get<std::string>());
  c.gauge = gauge_from(j.at("gauge"));
  c.thinned = j.at("thinned").get<bool>();
  c.support_end = Factorization::parse(j.at("support_end").get<std::string>());
  for (auto& b : j.at("blocks")) c.blocks.push_back(cert_block_from(b));
  return c;
}

inline Json to_json(const BuildResult& r) {
  return Json{{"psi", to_json(r.psi)}, {"certificate", to_json(r.cert)}};
}

inline BuildResult build_result_from(const Json& j) {
  return BuildResult{approx_from(j.at("psi")), certificate_from(j.at("certificate"))};
}

inline Json to_json(const InfeasibilityReport& r) {
  return Json{{"feasible", false},
              {"failed_block", r.failed_block},
              {"required", Json{{"lo", format_rational(r.required_lo)},
                                {"hi", format_rational(r.required_hi)}}},
              {"achieved", Json{{"lo", format_rational(r.achieved_lo)},
                                {"hi", format_rational(r.achieved_hi)}}},
              {"prime_budget", r.prime_budget},
              {"primes_available", r.primes_available},
              {"last_prime", r.last_prime}};
}

inline InfeasibilityReport infeasibility_from(const Json& j) {
  InfeasibilityReport r;
  r.failed_block = j.at("failed_block").get<std::size_t>();
  r.required_lo = parse_rational(j.at("required").at("lo").get<std::string>());
  r.required_hi = parse_rational(j.at("required").at("hi").get<std::string>());
  r.achieved_lo = parse_rational(j.at("achieved").at("lo").get<std::string>());
  r.achieved_hi = parse_rational(j.at("achieved").at("hi").get<std::string>());
  r.prime_budget = j.at("prime_budget").get<std::uint64_t>();
  r.primes_available = j.at("primes_available").get<std::size_t>();
  r.last_prime = j.at("last_prime").get<std::uint64_t>();
  return r;
}

inline Json to_json(const CertifyReport& r) {
  Json checks = Json::array();
  for (auto& c : r.checks) {
    Json e{{"name", c.name}, {"pass", c.pass}};
    if (!c.detail.empty()) e["detail"] = c.detail;
    checks.push_back(std::move(e));
  }
  return Json{{"all_pass", r.all_pass()}, {"checks", std::move(checks)}};
}

// ---------------------------------------------------------------------------
// estimates and reports
// ---------------------------------------------------------------------------

inline Json to_json(const MCEstimate& e) {
  return Json{{"mean", e.mean},
              {"std_error", e.std_error},
              {"samples", e.samples},
              {"resampled", e.resampled}};
}

inline Json to_json(const CountCheckReport& r) {
  return Json{{"exact", format_rational(r.exact)},
              {"estimate", to_json(r.estimate)},
              {"sigmas", r.sigmas},
              {"pass", r.pass}};
}

inline Json to_json(const ParallelClassAudit& a) {
  return Json{{"l", a.l},
              {"k1", a.k1},
              {"k2", a.k2},
              {"mult", a.mult.get_str()},
              {"independence", format_rational(a.independence)},
              {"intersection", to_json(a.inter)},
              {"ratio", a.ratio}};
}

inline Json to_json(const QIAReport& r) {
  Json audits = Json::array();
  for (auto& a : r.audits) audits.push_back(to_json(a));
  return Json{{"n", r.n},
              {"m", r.m},
              {"N", r.N},
              {"seed", r.seed},
              {"samples_per_class", r.samples_per_class},
              {"workers", r.workers},
              {"S", format_rational(r.S)},
              {"diag", format_rational(r.diag)},
              {"sum_sq", format_rational(r.sum_sq)},
              {"nonparallel_product", format_rational(r.nonparallel_product)},
              {"parallel_product", format_rational(r.parallel_product)},
              {"parallel_mc", r.parallel_mc},
              {"parallel_se", r.parallel_se},
              {"parallel_classes", r.parallel_classes},
              {"parallel_classes_sampled", r.parallel_classes_sampled},
              {"capped", r.capped},
              {"max_parallel_ratio", r.max_parallel_ratio},
              {"D", r.D()},
              {"ratio", r.ratio()},
              {"bc_lower_bound", r.bc_lower_bound()},
              {"audits", std::move(audits)}};
}

// ---------------------------------------------------------------------------
// Schmidt residual CSV
// ---------------------------------------------------------------------------

inline void write_schmidt_csv(std::ostream& os, const std::vector<SchmidtRow>& rows,
                              const std::vector<std::pair<std::string, std::string>>& meta) {
  for (auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  os << "sample_id,h,N_count,Phi,chi,residual,normalized_residual,normalized_defined\n";
  for (auto& r : rows) {
    os << r.sample_id << ',' << r.h << ',' << r.count << ',' << format_rational(r.phi) << ','
       << format_rational(r.chi) << ',' << format_double(r.residual) << ','
       << (r.normalized_defined ? format_double(r.normalized) : std::string("nan")) << ','
       << (r.normalized_defined ? 1 : 0) << "\n";
  }
}

struct SeriesRow {
  std::uint64_t h = 0;
  Rat phi, chi, partial;  // Phi(h), chi(h), khintchine partial sum
};

inline void write_series_csv(std::ostream& os, const std::vector<SeriesRow>& rows,
                             const std::vector<std::pair<std::string, std::string>>& meta) {
  for (auto& [k, v] : meta) os << "# " << k << "=" << v << "\n";
  os << "h,Phi,chi,partial_sum\n";
  for (auto& r : rows)
    os << r.h << ',' << format_rational(r.phi) << ',' << format_rational(r.chi) << ','
       << format_rational(r.partial) << "\n";
}

}  // namespace kgx
