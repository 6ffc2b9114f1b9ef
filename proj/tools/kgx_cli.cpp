// Command-line front end.  Subcommands mirror the library layers: exact slab
// measures, partial counting series, lattice-point counting checks, the
// quasi-independence second-moment report, Schmidt residual grids, and the
// certified counterexample builder.  All randomized subcommands are counter-
// based: the same seed/samples/workers triple reproduces output byte for byte.
//
// Exit codes: 0 ok, 2 malformed input, 3 domain/capacity violation,
// 4 infeasible counterexample request (report still written), 5 certificate
// rejected.

#include <CLI11.hpp>

#include "kgx/counterexample.hpp"
#include "kgx/gauge.hpp"
#include "kgx/io.hpp"
#include "kgx/measures.hpp"
#include "kgx/montecarlo.hpp"
#include "kgx/series.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace kgx;

ApproxFunction parse_psi_spec(const std::string& s) {
  if (!s.empty() && s[0] == '@') {
    std::ifstream in(s.substr(1));
    if (!in) throw parse_error("cannot open psi file: " + s.substr(1));
    Json j = Json::parse(in, nullptr, true);
    return approx_from(j);
  }
  auto colon = s.find(':');
  if (colon == std::string::npos) throw parse_error("psi spec needs kind:args, got '" + s + "'");
  std::string head = s.substr(0, colon), rest = s.substr(colon + 1);
  if (head == "const") return ApproxFunction::constant(parse_rational(rest));
  if (head == "power") {
    auto comma = rest.find(',');
    if (comma == std::string::npos) throw parse_error("power psi needs c,tau");
    return ApproxFunction::power(parse_rational(rest.substr(0, comma)),
                                 parse_rational(rest.substr(comma + 1)));
  }
  if (head == "table") {
    std::map<std::uint64_t, Rat> t;
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw parse_error("table psi entries are h=value");
      t[to_u64(parse_integer(item.substr(0, eq)))] = parse_rational(item.substr(eq + 1));
    }
    if (t.empty()) throw parse_error("table psi is empty");
    return ApproxFunction::from_table(std::move(t));
  }
  throw parse_error("unknown psi kind: '" + head + "'");
}

MultiApprox make_lift(const ApproxFunction& psi, unsigned n, const std::string& lift) {
  if (lift == "norm") return MultiApprox::norm_lift(psi, n);
  if (lift == "plane") return MultiApprox::plane_lift(psi, n);
  throw parse_error("lift must be norm or plane");
}

std::vector<std::uint64_t> parse_grid(const std::string& s) {
  std::vector<std::uint64_t> g;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) g.push_back(to_u64(parse_integer(item)));
  if (g.empty()) throw parse_error("empty grid");
  return g;
}

Matrix parse_matrix(const std::string& s, unsigned n, unsigned m) {
  Matrix X = Matrix::zero(n, m);
  std::stringstream rows(s);
  std::string row;
  unsigned i = 0;
  while (std::getline(rows, row, ';')) {
    if (i >= n) throw parse_error("matrix has too many rows");
    std::stringstream cols(row);
    std::string cell;
    unsigned j = 0;
    while (std::getline(cols, cell, ',')) {
      if (j >= m) throw parse_error("matrix row has too many entries");
      try {
        X.at(i, j) = std::stod(cell);
      } catch (const std::exception&) {
        throw parse_error("bad matrix entry: '" + cell + "'");
      }
      ++j;
    }
    if (j != m) throw parse_error("matrix row has too few entries");
    ++i;
  }
  if (i != n) throw parse_error("matrix has too few rows");
  return X;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw parse_error("cannot open output file: " + out_path);
  out << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  using namespace kgx;

  CLI::App app{
      "exact slab measures, counting series, quasi-independence reports and "
      "certified counterexample construction"};
  app.require_subcommand(1);
  // --h is a documented option (height cutoff); keep help on --help only
  app.set_help_flag("--help", "print help and exit");
  app.fallthrough();  // let global options (--out) appear after the subcommand
  auto subcommand = [&app](const char* name, const char* what) {
    auto* sc = app.add_subcommand(name, what);
    sc->set_help_flag("--help", "print help and exit");
    return sc;
  };

  std::string out_path;
  app.add_option("--out", out_path, "write output to this file instead of stdout")
      ->capture_default_str();

  // measure ------------------------------------------------------------------
  auto* c_measure = subcommand("measure", "exact slab measures and bounds");
  std::string me_q, me_delta, me_q2, me_delta2, me_C = "1";
  unsigned me_m = 1;
  bool me_coprime = false, me_bounds = false, me_mc = false;
  std::uint64_t me_samples = 100000, me_seed = 0;
  unsigned me_workers = 1;
  c_measure->add_option("--q", me_q, "integer vector, e.g. 1,-2,3")->required();
  c_measure->add_option("--m", me_m, "matrix columns");
  c_measure->add_option("--delta", me_delta, "half-width in (0, 1/2)")->required();
  c_measure->add_flag("--coprime", me_coprime, "primitive-witness slab");
  c_measure->add_flag("--bounds", me_bounds, "also emit certified bounds");
  c_measure->add_flag("--mc", me_mc, "also emit a Monte Carlo estimate");
  c_measure->add_option("--samples", me_samples);
  c_measure->add_option("--seed", me_seed);
  c_measure->add_option("--workers", me_workers);
  c_measure->add_option("--q2", me_q2, "second slab direction (pair mode)");
  c_measure->add_option("--delta2", me_delta2, "second slab half-width");
  c_measure->add_option("--C", me_C, "constant for the parallel-pair upper bound");

  // series -------------------------------------------------------------------
  auto* c_series = subcommand("series", "partial sums of the counting series");
  std::string se_psi, se_grid, se_lift = "plane", se_conv = "theorem";
  unsigned se_n = 2, se_m = 1;
  std::string se_N;
  c_series->add_option("--psi", se_psi, "const:c | power:c,tau | table:h=v,... | @file")
      ->required();
  c_series->add_option("--n", se_n);
  c_series->add_option("--m", se_m);
  c_series->add_option("--N", se_N, "height cutoff");
  c_series->add_option("--grid", se_grid, "CSV mode: rows (h, Phi, chi, partial_sum)");
  c_series->add_option("--lift", se_lift, "plane | norm (grid mode)");
  c_series->add_option("--convention", se_conv, "theorem | proof (grid mode)");

  // count --------------------------------------------------------------------
  auto* c_count = subcommand("count", "lattice-point counts vs expectation");
  std::string co_psi, co_x, co_lift = "norm";
  unsigned co_n = 2, co_m = 1, co_workers = 1;
  std::uint64_t co_h = 10, co_samples = 100000, co_seed = 0;
  bool co_coprime = false;
  c_count->add_option("--psi", co_psi)->required();
  c_count->add_option("--n", co_n);
  c_count->add_option("--m", co_m);
  c_count->add_option("--h", co_h, "height cutoff")->required();
  c_count->add_option("--x", co_x, "explicit point rows ; cols , (count this X only)");
  c_count->add_option("--lift", co_lift, "norm | plane");
  c_count->add_flag("--coprime", co_coprime, "count primitive-witness solutions");
  c_count->add_option("--samples", co_samples);
  c_count->add_option("--seed", co_seed);
  c_count->add_option("--workers", co_workers);

  // qia ----------------------------------------------------------------------
  auto* c_qia = subcommand("qia", "quasi-independence second-moment report");
  std::string qi_psi;
  unsigned qi_n = 2, qi_m = 1, qi_workers = 1;
  std::uint64_t qi_N = 100, qi_samples = 100000, qi_seed = 0, qi_cap = 32768;
  std::size_t qi_audits = 16;
  c_qia->add_option("--psi", qi_psi)->required();
  c_qia->add_option("--n", qi_n);
  c_qia->add_option("--m", qi_m);
  c_qia->add_option("--N", qi_N, "height cutoff")->required();
  c_qia->add_option("--samples", qi_samples, "MC samples per parallel class");
  c_qia->add_option("--seed", qi_seed);
  c_qia->add_option("--workers", qi_workers);
  c_qia->add_option("--class-cap", qi_cap, "max parallel classes sampled");
  c_qia->add_option("--audits", qi_audits, "parallel classes reported in detail");

  // schmidt ------------------------------------------------------------------
  auto* c_schmidt = subcommand("schmidt", "residual rows on a height grid (CSV)");
  std::string sc_psi, sc_grid, sc_lift = "plane", sc_conv = "theorem";
  unsigned sc_n = 2, sc_m = 1, sc_workers = 1;
  std::uint64_t sc_samples = 100, sc_seed = 0;
  double sc_eps = 0.1;
  bool sc_coprime = false;
  c_schmidt->add_option("--psi", sc_psi)->required();
  c_schmidt->add_option("--n", sc_n);
  c_schmidt->add_option("--m", sc_m);
  c_schmidt->add_option("--grid", sc_grid, "ascending heights, e.g. 16,32,64")->required();
  c_schmidt->add_option("--lift", sc_lift, "plane | norm");
  c_schmidt->add_option("--convention", sc_conv, "theorem | proof");
  c_schmidt->add_option("--epsilon", sc_eps, "log exponent margin in the normalizer");
  c_schmidt->add_flag("--coprime", sc_coprime);
  c_schmidt->add_option("--samples", sc_samples, "independent sample points");
  c_schmidt->add_option("--seed", sc_seed);
  c_schmidt->add_option("--workers", sc_workers);

  // counterexample -----------------------------------------------------------
  auto* c_cx = subcommand("counterexample", "build a certified gauge-dominating psi");
  std::string cx_gauge = "log";
  unsigned cx_m = 1;
  std::size_t cx_blocks = 3;
  std::uint64_t cx_budget = 1'000'000;
  std::size_t cx_supcap = 20'000;
  std::uint64_t cx_workcap = 60'000'000;
  c_cx->add_option("--gauge", cx_gauge, "identity | linear:a,b | log | exp:a");
  c_cx->add_option("--m", cx_m);
  c_cx->add_option("--blocks", cx_blocks, "number of unit-mass blocks");
  c_cx->add_option("--budget", cx_budget, "prime budget (sieve limit)");
  c_cx->add_option("--support-cap", cx_supcap);
  c_cx->add_option("--work-cap", cx_workcap);

  // certify ------------------------------------------------------------------
  auto* c_certify = subcommand("certify", "re-validate a saved build result");
  std::string ce_in;
  c_certify->add_option("--in", ce_in, "build-result JSON file")->required();

  // selftest -----------------------------------------------------------------
  auto* c_selftest = subcommand("selftest", "quick exact-identity smoke check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(c_measure)) {
      SlabSpec s{IntVec::parse(me_q), me_m, parse_rational(me_delta), me_coprime};
      Json j{{"spec", to_json(s)}};
      if (me_q2.empty()) {
        j["measure"] = format_rational(measure_exact(s));
        if (me_bounds) {
          auto [lo, hi] = measure_bounds(s);
          j["bounds"] = Json{{"lo", format_rational(lo)}, {"hi", format_rational(hi)}};
        }
        if (me_mc) {
          MCConfig cfg{me_seed, me_samples, me_workers};
          j["mc"] = to_json(mc_slab_measure(s, cfg));
        }
      } else {
        SlabSpec s2{IntVec::parse(me_q2), me_m,
                    parse_rational(me_delta2.empty() ? me_delta : me_delta2), me_coprime};
        j["spec2"] = to_json(s2);
        if (!me_coprime) {
          j["intersection"] = format_rational(intersection_measure_nonparallel(s, s2));
        } else {
          j["intersection_upper_bound"] =
              format_rational(intersection_upper_bound(s, s2, parse_rational(me_C)));
        }
        if (me_mc) {
          MCConfig cfg{me_seed, me_samples, me_workers};
          j["mc"] = to_json(mc_pair_measure(s, s2, cfg));
        }
      }
      emit(dump(j), out_path);
      return 0;
    }

    if (app.got_subcommand(c_series)) {
      ApproxFunction psi = parse_psi_spec(se_psi);
      if (!se_grid.empty()) {
        MultiApprox Psi = make_lift(psi, se_n, se_lift);
        Convention conv = parse_convention(se_conv);
        std::vector<SeriesRow> rows;
        for (std::uint64_t h : parse_grid(se_grid)) {
          Int hh = to_int(h);
          rows.push_back({h, schmidt_main_term(Psi, se_m, hh, conv),
                          schmidt_divisor_term(Psi, se_m, hh, conv),
                          khintchine_partial_sum(psi, se_n, se_m, hh)});
        }
        std::ostringstream os;
        write_series_csv(os, rows,
                         {{"psi", to_json(psi).dump()},
                          {"lift", se_lift},
                          {"n", std::to_string(se_n)},
                          {"m", std::to_string(se_m)},
                          {"convention", convention_name(conv)}});
        emit(os.str(), out_path);
        return 0;
      }
      if (se_N.empty()) throw parse_error("series needs --N or --grid");
      Int N = parse_integer(se_N);
      Json j{{"psi", to_json(psi)},
             {"n", se_n},
             {"m", se_m},
             {"N", N.get_str()},
             {"khintchine", format_rational(khintchine_partial_sum(psi, se_n, se_m, N))}};
      if (se_n * se_m > 1)
        j["sum_b_prime"] = format_rational(sum_B_prime_measures(psi, se_n, se_m, to_u64(N)));
      emit(dump(j), out_path);
      return 0;
    }

    if (app.got_subcommand(c_count)) {
      ApproxFunction psi = parse_psi_spec(co_psi);
      if (!co_x.empty()) {
        MultiApprox Psi = make_lift(psi, co_n, co_lift);
        Matrix X = parse_matrix(co_x, co_n, co_m);
        long long cnt = count_solutions(X, Psi, co_m, co_h, co_coprime);
        emit(dump(Json{{"h", co_h}, {"coprime", co_coprime}, {"count", cnt}}), out_path);
        return 0;
      }
      MCConfig cfg{co_seed, co_samples, co_workers};
      CountCheckReport rep = expected_count_check(psi, co_n, co_m, co_h, cfg);
      Json j = to_json(rep);
      j["n"] = co_n;
      j["m"] = co_m;
      j["h"] = co_h;
      j["seed"] = co_seed;
      j["samples"] = co_samples;
      j["workers"] = co_workers;
      emit(dump(j), out_path);
      return 0;
    }

    if (app.got_subcommand(c_qia)) {
      ApproxFunction psi = parse_psi_spec(qi_psi);
      MCConfig cfg{qi_seed, qi_samples, qi_workers};
      QIAReport rep = qia_report(psi, qi_n, qi_m, qi_N, cfg, qi_cap, qi_audits);
      emit(dump(to_json(rep)), out_path);
      return 0;
    }

    if (app.got_subcommand(c_schmidt)) {
      ApproxFunction psi = parse_psi_spec(sc_psi);
      MultiApprox Psi = make_lift(psi, sc_n, sc_lift);
      SchmidtConfig sc;
      sc.grid = parse_grid(sc_grid);
      sc.epsilon = sc_eps;
      sc.convention = parse_convention(sc_conv);
      sc.coprime = sc_coprime;
      MCConfig cfg{sc_seed, sc_samples, sc_workers};
      auto rows = schmidt_residual(Psi, sc_m, sc, cfg);
      std::ostringstream os;
      write_schmidt_csv(os, rows,
                        {{"psi", to_json(psi).dump()},
                         {"lift", sc_lift},
                         {"n", std::to_string(sc_n)},
                         {"m", std::to_string(sc_m)},
                         {"convention", convention_name(sc.convention)},
                         {"epsilon", format_double(sc_eps)},
                         {"coprime", sc_coprime ? "1" : "0"},
                         {"samples", std::to_string(sc_samples)},
                         {"seed", std::to_string(sc_seed)},
                         {"workers", std::to_string(sc_workers)}});
      emit(os.str(), out_path);
      return 0;
    }

    if (app.got_subcommand(c_cx)) {
      BuildConfig cfg;
      cfg.gauge = parse_gauge(cx_gauge);
      cfg.m = cx_m;
      cfg.blocks = cx_blocks;
      cfg.prime_budget = cx_budget;
      cfg.support_cap = cx_supcap;
      cfg.work_cap = cx_workcap;
      BuildOutcome outcome = build_psi(cfg);
      if (auto* rep = std::get_if<InfeasibilityReport>(&outcome)) {
        emit(dump(to_json(*rep)), out_path);
        return 4;
      }
      auto& res = std::get<BuildResult>(outcome);
      CertifyReport cr = certify(res.psi, res.cert);
      std::vector<Int> cps;
      for (auto& b : res.cert.blocks) cps.push_back(b.h.value());
      Json div = Json::array();
      auto trace = divergence_trace(res.psi, 2, res.cert.m, cps);
      for (auto& v : trace) div.push_back(format_rational(v));
      Json j{{"feasible", true},
             {"psi", to_json(res.psi)},
             {"certificate", to_json(res.cert)},
             {"certify", to_json(cr)},
             {"divergence_trace", std::move(div)}};
      emit(dump(j), out_path);
      return cr.all_pass() ? 0 : 5;
    }

    if (app.got_subcommand(c_certify)) {
      std::ifstream in(ce_in);
      if (!in) throw parse_error("cannot open build-result file: " + ce_in);
      Json j = Json::parse(in, nullptr, true);
      BuildResult res = build_result_from(j);
      CertifyReport cr = certify(res.psi, res.cert);
      emit(dump(to_json(cr)), out_path);
      return cr.all_pass() ? 0 : 5;
    }

    if (app.got_subcommand(c_selftest)) {
      bool ok = true;
      ok &= measure_exact(SlabSpec{IntVec::parse("1,2"), 1, Rat(1, 10), false}) == Rat(1, 5);
      ok &= measure_exact(SlabSpec{IntVec::parse("2,2"), 1, Rat(1, 10), true}) == Rat(1, 10);
      ok &= sum_B_prime_measures(ApproxFunction::from_table({{1, Rat(1, 10)}}), 2, 1, 1) ==
            Rat(8, 5);
      ok &= divisor_sigma(Factorization::of(6)) == 12;
      ok &= totient_ratio(Factorization::of(6)) == Rat(3);
      std::printf("%s\n", ok ? "selftest ok" : "selftest FAILED");
      return ok ? 0 : 1;
    }
  } catch (const parse_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const capacity_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
