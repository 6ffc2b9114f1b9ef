#include <catch2/catch_amalgamated.hpp>

#include "kgx/counterexample.hpp"
#include "kgx/io.hpp"
#include "kgx/measures.hpp"
#include "kgx/montecarlo.hpp"
#include "kgx/series.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

using namespace kgx;

namespace {

// ---------------------------------------------------------------------------
// subprocess plumbing for the CLI binary
// ---------------------------------------------------------------------------

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string("\"") + KGX_CLI_PATH + "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult r;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  int rc = pclose(pipe);
  REQUIRE(WIFEXITED(rc));
  r.status = WEXITSTATUS(rc);
  return r;
}

std::string tmp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("kgx_cli_test_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> rows;
  std::stringstream ss(csv);
  std::string line;
  bool seen_header = false;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      seen_header = true;  // column header
      continue;
    }
    rows.push_back(line);
  }
  return rows;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// JSON round trips
// ---------------------------------------------------------------------------

TEST_CASE("slab spec json round trip") {
  SlabSpec s{IntVec::parse("3,-4,5"), 2, Rat(1, 7), true};
  Json j = to_json(s);
  CHECK(j.at("q") == "3,-4,5");
  CHECK(j.at("m") == 2);
  CHECK(j.at("delta") == "1/7");
  CHECK(j.at("coprime") == true);

  SlabSpec back = slab_from(j);
  CHECK(back.q == s.q);
  CHECK(back.m == s.m);
  CHECK(back.delta == s.delta);
  CHECK(back.coprime == s.coprime);

  // slab_from re-validates the payload
  Json bad = j;
  bad["delta"] = "3/5";
  CHECK_THROWS_AS(slab_from(bad), domain_error);
  bad = j;
  bad["q"] = "0,0,0";
  CHECK_THROWS_AS(slab_from(bad), domain_error);
}

TEST_CASE("approximating function json round trip") {
  SECTION("constant") {
    ApproxFunction f = ApproxFunction::constant(Rat(1, 10));
    Json j = to_json(f);
    CHECK(j.at("kind") == "constant");
    CHECK(j.at("c") == "1/10");
    CHECK(!j.contains("cap"));
    CHECK(approx_from(j) == f);
  }
  SECTION("power with binding cap") {
    ApproxFunction f = truncate_min(ApproxFunction::power(Rat(3), Rat(1)), Rat(1, 4));
    REQUIRE(f.cap.has_value());
    Json j = to_json(f);
    CHECK(j.at("kind") == "power");
    CHECK(j.at("c") == "3");
    CHECK(j.at("tau") == "1");
    CHECK(j.at("cap") == "1/4");
    CHECK(approx_from(j) == f);
  }
  SECTION("table") {
    ApproxFunction f = ApproxFunction::from_table({{1, Rat(1, 4)}, {5, Rat(1, 8)}});
    Json j = to_json(f);
    CHECK(j.at("kind") == "table");
    CHECK(j.at("values").at("1") == "1/4");
    CHECK(j.at("values").at("5") == "1/8");
    CHECK(approx_from(j) == f);
  }
  SECTION("sparse keeps weighted values exact") {
    std::vector<SparseEntry> entries;
    entries.push_back({Factorization::of(2), Int(), Rat(1, 2)});
    entries.push_back({Factorization::of(6), Int(), Rat(1, 2)});
    ApproxFunction f = ApproxFunction::sparse(1, std::move(entries));
    Json j = to_json(f);
    CHECK(j.at("kind") == "sparse");
    CHECK(j.at("m") == 1);
    CHECK(j.at("support")[0].at("l") == "2");
    CHECK(j.at("support")[0].at("lpsim") == "1/2");
    CHECK(j.at("support")[1].at("l") == "2*3");
    ApproxFunction back = approx_from(j);
    CHECK(back == f);
    CHECK(back.support[1].lv == 6);  // cached value rebuilt from the factorization
  }
  SECTION("unknown kind is malformed input") {
    CHECK_THROWS_AS(approx_from(Json{{"kind", "banana"}}), parse_error);
  }
}

TEST_CASE("lift json round trip") {
  ApproxFunction psi = ApproxFunction::power(Rat(1, 4), Rat(1));

  MultiApprox norm = MultiApprox::norm_lift(psi, 3);
  Json jn = to_json(norm);
  CHECK(jn.at("kind") == "norm_lift");
  CHECK(jn.at("n") == 3);
  MultiApprox bn = multi_from(jn);
  CHECK(bn.kind == MultiApprox::Kind::NormLift);
  CHECK(bn.n == 3u);
  CHECK(bn.psi == psi);

  MultiApprox plane = MultiApprox::plane_lift(psi, 4);
  Json jp = to_json(plane);
  CHECK(jp.at("kind") == "plane_lift");
  MultiApprox bp = multi_from(jp);
  CHECK(bp.kind == MultiApprox::Kind::PlaneLift);
  CHECK(bp.n == 4u);
  CHECK(bp.psi == psi);

  MultiApprox zt = MultiApprox::z_table(2, {{{1, 0}, Rat(1, 4)}, {{2, 2}, Rat(1, 8)}});
  Json jz = to_json(zt);
  CHECK(jz.at("kind") == "z_table");
  CHECK(jz.at("values")[0].at("q") == "1,0");
  CHECK(jz.at("values")[0].at("value") == "1/4");
  MultiApprox bz = multi_from(jz);
  CHECK(bz.kind == MultiApprox::Kind::ZTable);
  CHECK(bz.ztable == zt.ztable);

  CHECK_THROWS_AS(multi_from(Json{{"kind", "diag_lift"}, {"n", 2}}), parse_error);
}

TEST_CASE("gauge json round trip") {
  for (const Gauge& g : {Gauge::identity(), Gauge::linear(Rat(1, 4), Rat(3)), Gauge::log(),
                         Gauge::exp(Rat(2))}) {
    CHECK(gauge_from(to_json(g)) == g);
  }
  Json j = to_json(Gauge::linear(Rat(1, 4), Rat(3)));
  CHECK(j.at("kind") == "linear");
  CHECK(j.at("a") == "1/4");
  CHECK(j.at("b") == "3");
  CHECK_THROWS_AS(gauge_from(Json{{"kind", "quadratic"}}), parse_error);
}

TEST_CASE("build result json round trip re-certifies") {
  BuildConfig cfg;
  cfg.gauge = Gauge::log();
  cfg.blocks = 2;
  cfg.prime_budget = 1000;
  BuildOutcome outcome = build_psi(cfg);
  REQUIRE(std::holds_alternative<BuildResult>(outcome));
  const auto& res = std::get<BuildResult>(outcome);

  Json j = to_json(res);
  BuildResult back = build_result_from(j);
  CHECK(back.psi == res.psi);
  CHECK(back.cert == res.cert);
  CHECK(certify(back.psi, back.cert).all_pass());

  // through text and back: stable dump, equal parse
  Json j2 = Json::parse(j.dump(2));
  CHECK(j2 == j);
  CHECK(j2.dump(2) == j.dump(2));
}

TEST_CASE("infeasibility report json round trip") {
  InfeasibilityReport r;
  r.failed_block = 1;
  r.required_lo = Rat(to_int(157925920365361ull));
  r.required_hi = Rat(to_int(157925920365362ull));
  r.achieved_lo = Rat(99, 7);
  r.achieved_hi = Rat(99, 7);
  r.prime_budget = 100000;
  r.primes_available = 9592;
  r.last_prime = 99991;

  Json j = to_json(r);
  CHECK(j.at("feasible") == false);
  InfeasibilityReport back = infeasibility_from(j);
  CHECK(back.failed_block == r.failed_block);
  CHECK(back.required_lo == r.required_lo);
  CHECK(back.required_hi == r.required_hi);
  CHECK(back.achieved_lo == r.achieved_lo);
  CHECK(back.achieved_hi == r.achieved_hi);
  CHECK(back.prime_budget == r.prime_budget);
  CHECK(back.primes_available == r.primes_available);
  CHECK(back.last_prime == r.last_prime);
}

// ---------------------------------------------------------------------------
// digest and CSV emitters
// ---------------------------------------------------------------------------

TEST_CASE("fnv1a64 matches reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  CHECK(digest_hex("foobar") == "85944171f73967e8");
  CHECK(digest_hex("") == "cbf29ce484222325");
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1.0");
  CHECK(format_double(-0.25) == "-0.25");
  for (double v : {1.0 / 3.0, 2e-7, 123456.789, 0.30000000000000004}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("schmidt csv golden output") {
  std::vector<SchmidtRow> rows;
  rows.push_back({0, 4, 7, Rat(5, 2), Rat(7, 2), 1.5, 0.25, true});
  rows.push_back({1, 8, 2, Rat(1), Rat(1, 2), -0.5, 0.0, false});
  std::ostringstream os;
  write_schmidt_csv(os, rows, {{"alpha", "1"}, {"beta", "x"}});
  CHECK(os.str() ==
        "# alpha=1\n"
        "# beta=x\n"
        "sample_id,h,N_count,Phi,chi,residual,normalized_residual,normalized_defined\n"
        "0,4,7,5/2,7/2,1.5,0.25,1\n"
        "1,8,2,1,1/2,-0.5,nan,0\n");
}

TEST_CASE("series csv golden output") {
  std::vector<SeriesRow> rows;
  rows.push_back({1, Rat(4), Rat(4), Rat(1, 4)});
  rows.push_back({2, Rat(9, 2), Rat(5), Rat(1, 2)});
  std::ostringstream os;
  write_series_csv(os, rows, {{"k", "v"}});
  CHECK(os.str() ==
        "# k=v\n"
        "h,Phi,chi,partial_sum\n"
        "1,4,4,1/4\n"
        "2,9/2,5,1/2\n");
}

// ---------------------------------------------------------------------------
// CLI subprocess checks
// ---------------------------------------------------------------------------

TEST_CASE("cli selftest passes") {
  CliResult r = run_cli("selftest");
  CHECK(r.status == 0);
  CHECK(r.out == "selftest ok\n");
}

TEST_CASE("cli measure modes and exit codes") {
  CliResult r = run_cli("measure --q 1,2 --delta 1/10");
  REQUIRE(r.status == 0);
  Json j = Json::parse(r.out);
  CHECK(j.at("measure") == "1/5");
  CHECK(j.at("spec").at("q") == "1,2");

  r = run_cli("measure --q 2,2 --delta 1/10 --coprime --bounds");
  REQUIRE(r.status == 0);
  j = Json::parse(r.out);
  CHECK(j.at("measure") == "1/10");
  CHECK(j.at("bounds").at("lo") == "1/10");
  CHECK(j.at("bounds").at("hi") == "1/10");

  r = run_cli("measure --q 1,2 --q2 2,1 --delta 1/10");
  REQUIRE(r.status == 0);
  j = Json::parse(r.out);
  CHECK(j.at("intersection") == "1/25");

  r = run_cli("measure --q 1,2 --q2 2,4 --delta 1/10 --delta2 1/5 --coprime --C 3");
  REQUIRE(r.status == 0);
  j = Json::parse(r.out);
  CHECK(j.at("intersection_upper_bound") == "3/50");

  CHECK(run_cli("measure --delta 1/10").status == 2);          // missing required --q
  CHECK(run_cli("measure --q 1,2 --delta 1/0").status == 2);   // malformed rational
  CHECK(run_cli("measure --q 1,2 --delta 3/5").status == 3);   // delta out of range
  CHECK(run_cli("measure --q 0,0 --delta 1/10").status == 3);  // zero direction
  CHECK(run_cli("frobnicate").status == 2);                    // unknown subcommand
}

TEST_CASE("cli series json and csv modes") {
  CliResult r = run_cli("series --psi power:1/4,1 --n 2 --m 1 --N 100");
  REQUIRE(r.status == 0);
  Json j = Json::parse(r.out);
  CHECK(j.at("khintchine") == "25");
  CHECK(j.contains("sum_b_prime"));

  // grid mode must agree byte for byte with the library emitter
  r = run_cli("series --psi table:1=1/4 --n 2 --m 1 --grid 1,2");
  REQUIRE(r.status == 0);
  ApproxFunction psi = ApproxFunction::from_table({{1, Rat(1, 4)}});
  MultiApprox Psi = MultiApprox::plane_lift(psi, 2);
  std::vector<SeriesRow> rows;
  for (std::uint64_t h : {1, 2}) {
    rows.push_back({h, schmidt_main_term(Psi, 1, to_int(h), Convention::Theorem),
                    schmidt_divisor_term(Psi, 1, to_int(h), Convention::Theorem),
                    khintchine_partial_sum(psi, 2, 1, to_int(h))});
  }
  std::ostringstream os;
  write_series_csv(os, rows,
                   {{"psi", to_json(psi).dump()},
                    {"lift", "plane"},
                    {"n", "2"},
                    {"m", "1"},
                    {"convention", "theorem"}});
  CHECK(r.out == os.str());

  CHECK(run_cli("series --psi power:1/4 --N 10").status == 2);  // power needs c,tau
  CHECK(run_cli("series --psi const:1/4").status == 2);         // needs --N or --grid
}

TEST_CASE("cli count agrees with the library") {
  Matrix X = Matrix::zero(2, 1);
  X.at(0, 0) = 0.125;
  X.at(1, 0) = 0.375;
  MultiApprox Psi = MultiApprox::norm_lift(ApproxFunction::constant(Rat(1, 4)), 2);
  long long want = count_solutions(X, Psi, 1, 3, false);

  CliResult r = run_cli("count --psi const:1/4 --n 2 --m 1 --h 3 --x '0.125;0.375'");
  REQUIRE(r.status == 0);
  Json j = Json::parse(r.out);
  CHECK(j.at("count").get<long long>() == want);

  r = run_cli("count --psi table:1=1/10 --n 2 --m 1 --h 1 --samples 20000");
  REQUIRE(r.status == 0);
  j = Json::parse(r.out);
  CHECK(j.at("exact") == "8/5");
  CHECK(j.at("pass") == true);
}

TEST_CASE("cli qia output is worker invariant") {
  const std::string base = "qia --psi table:1=1/10,2=1/20 --n 2 --m 1 --N 30 --samples 2000";
  CliResult one = run_cli(base + " --workers 1");
  CliResult four = run_cli(base + " --workers 4");
  REQUIRE(one.status == 0);
  REQUIRE(four.status == 0);
  Json j = Json::parse(one.out);
  Json j4 = Json::parse(four.out);
  CHECK(j.at("workers") == 1);  // echoes the requested configuration
  CHECK(j4.at("workers") == 4);
  j4["workers"] = 1;            // everything but the echo must match exactly
  CHECK(j.dump(2) == j4.dump(2));
  CHECK(j.at("parallel_classes").get<std::uint64_t>() > 0);

  CHECK(run_cli("qia --psi power:1/4,1/2 --n 2 --m 1 --N 10").status == 3);  // inexact psi^m
}

TEST_CASE("cli schmidt csv is worker invariant with exact columns") {
  const std::string base =
      "schmidt --psi power:1/4,1 --n 2 --m 1 --grid 4,16 --samples 10 --seed 7";
  CliResult one = run_cli(base + " --workers 1");
  CliResult four = run_cli(base + " --workers 4");
  REQUIRE(one.status == 0);
  REQUIRE(four.status == 0);
  SECTION("worker count changes only the metadata line") {
    auto strip = [](const std::string& text) {
      std::string kept;
      std::stringstream ss(text);
      std::string line;
      while (std::getline(ss, line))
        if (line.rfind("# workers=", 0) != 0) kept += line + "\n";
      return kept;
    };
    CHECK(strip(one.out) == strip(four.out));
  }
  SECTION("Phi and chi columns are bit-for-bit the exact rationals") {
    MultiApprox Psi = MultiApprox::plane_lift(ApproxFunction::power(Rat(1, 4), Rat(1)), 2);
    auto rows = data_lines(one.out);
    REQUIRE(rows.size() == 20);  // 10 samples x 2 heights
    for (const auto& line : rows) {
      auto f = split_csv(line);
      REQUIRE(f.size() == 8);
      Int h = parse_integer(f[1]);
      CHECK(f[3] == format_rational(schmidt_main_term(Psi, 1, h, Convention::Theorem)));
      CHECK(f[4] == format_rational(schmidt_divisor_term(Psi, 1, h, Convention::Theorem)));
    }
  }
}

TEST_CASE("cli counterexample build, certify round trip, and rejection") {
  std::string cx_path = tmp_file("cx.json");
  CliResult r = run_cli("counterexample --gauge log --blocks 3 --budget 1000 --out " + cx_path);
  REQUIRE(r.status == 0);
  Json full = Json::parse(read_file(cx_path));
  CHECK(full.at("feasible") == true);
  CHECK(full.at("certify").at("all_pass") == true);
  CHECK(full.at("divergence_trace").size() == 3);

  // saved build result re-certifies cleanly
  Json br{{"psi", full.at("psi")}, {"certificate", full.at("certificate")}};
  std::string br_path = tmp_file("br.json");
  write_file(br_path, br.dump(2) + "\n");
  CliResult rc = run_cli("certify --in " + br_path);
  REQUIRE(rc.status == 0);
  Json cr = Json::parse(rc.out);
  CHECK(cr.at("all_pass") == true);

  // a tampered checkpoint is rejected with the dedicated exit code
  Json bad = br;
  bad["certificate"]["blocks"][2]["chi"] = "9999";
  std::string bad_path = tmp_file("bad.json");
  write_file(bad_path, bad.dump(2) + "\n");
  CliResult rb = run_cli("certify --in " + bad_path);
  CHECK(rb.status == 5);
  Json crb = Json::parse(rb.out);
  CHECK(crb.at("all_pass") == false);

  // malformed input file
  std::string junk_path = tmp_file("junk.json");
  write_file(junk_path, "not json\n");
  CHECK(run_cli("certify --in " + junk_path).status == 2);
  CHECK(run_cli("certify --in " + tmp_file("missing.json")).status == 2);

  CHECK(run_cli("counterexample --gauge banana").status == 2);
}

TEST_CASE("cli counterexample infeasibility reporting") {
  std::string path = tmp_file("infeasible.json");
  CliResult r =
      run_cli("counterexample --gauge exp:2 --blocks 1 --budget 100000 --out " + path);
  CHECK(r.status == 4);
  Json j = Json::parse(read_file(path));
  CHECK(j.at("feasible") == false);
  CHECK(j.at("failed_block") == 1);
  CHECK(j.at("primes_available") == 9592);
  CHECK(j.at("last_prime") == 99991);
  InfeasibilityReport rep = infeasibility_from(j);
  CHECK(rep.required_lo < rep.required_hi);
  CHECK(rep.achieved_hi < rep.required_lo);
}

TEST_CASE("cli psi file input") {
  ApproxFunction psi = ApproxFunction::from_table({{1, Rat(1, 10)}});
  std::string path = tmp_file("psi.json");
  write_file(path, to_json(psi).dump(2) + "\n");
  CliResult r = run_cli("series --psi @" + path + " --n 2 --m 1 --N 1");
  REQUIRE(r.status == 0);
  Json j = Json::parse(r.out);
  CHECK(j.at("khintchine") == "1/10");
  CHECK(j.at("sum_b_prime") == "8/5");

  CHECK(run_cli("series --psi @/nonexistent/psi.json --N 1").status == 2);
}
