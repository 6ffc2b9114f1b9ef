#include <catch2/catch_amalgamated.hpp>

#include "kgx/counterexample.hpp"
#include "kgx/gauge.hpp"

#include <string>
#include <variant>
#include <vector>

using namespace kgx;

TEST_CASE("gauge construction and parsing") {
  CHECK(Gauge::identity().is_rational());
  CHECK(Gauge::linear(Rat(1, 4), Rat(0)).is_rational());
  CHECK(!Gauge::log().is_rational());
  CHECK(!Gauge::exp(Rat(2)).is_rational());
  CHECK_THROWS_AS(Gauge::linear(Rat(0), Rat(1)), domain_error);
  CHECK_THROWS_AS(Gauge::linear(Rat(-1), Rat(1)), domain_error);
  CHECK_THROWS_AS(Gauge::exp(Rat(0)), domain_error);

  CHECK(parse_gauge("identity") == Gauge::identity());
  CHECK(parse_gauge("log") == Gauge::log());
  CHECK(parse_gauge("linear:1/4,0") == Gauge::linear(Rat(1, 4), Rat(0)));
  CHECK(parse_gauge("exp:2") == Gauge::exp(Rat(2)));
  CHECK_THROWS_AS(parse_gauge("identity:3"), parse_error);
  CHECK_THROWS_AS(parse_gauge("linear:1"), parse_error);
  CHECK_THROWS_AS(parse_gauge("linear:0,1"), domain_error);
  CHECK_THROWS_AS(parse_gauge("exp"), parse_error);
  CHECK_THROWS_AS(parse_gauge("banana"), parse_error);
}

TEST_CASE("rational gauges evaluate and compare exactly") {
  auto lin = Gauge::linear(Rat(1, 4), Rat(3));
  CHECK(lin.eval_exact(Rat(8)) == Rat(5));
  CHECK(lin.ge(Rat(5), Rat(8)));
  CHECK(lin.ge(Rat(5) + Rat(1, 1000000), Rat(8)));
  CHECK(!lin.ge(Rat(5) - Rat(1, 1000000), Rat(8)));
  auto [lo, hi] = lin.bracket(Rat(8));
  CHECK(lo == Rat(5));
  CHECK(hi == Rat(5));
  CHECK(Gauge::identity().ge(Rat(7, 2), Rat(7, 2)));
  CHECK_THROWS_AS(Gauge::log().eval_exact(Rat(1)), domain_error);
  CHECK_THROWS_AS(Gauge::identity().bracket(Rat(-1)), domain_error);
}

TEST_CASE("log gauge brackets enclose frozen reference digits") {
  // ln 17 = 2.833213344056216080...
  auto g = Gauge::log();
  auto [lo, hi] = g.bracket(Rat(16));
  Rat d_lo = parse_rational("2833213344056216080/1000000000000000000");
  Rat d_hi = parse_rational("2833213344056216081/1000000000000000000");
  CHECK(lo <= hi);
  CHECK(d_lo < lo);
  CHECK(hi < d_hi);
  CHECK(g.ge(d_hi, Rat(16)));
  CHECK(!g.ge(d_lo, Rat(16)));
  // higher working precision can only tighten the enclosure
  auto [lo64, hi64] = g.bracket(Rat(16), 64);
  auto [lo256, hi256] = g.bracket(Rat(16), 256);
  CHECK(lo64 <= lo256);
  CHECK(hi256 <= hi64);
  // ln 1 = 0 exactly
  auto [zlo, zhi] = g.bracket(Rat(0));
  CHECK(zlo == Rat(0));
  CHECK(zhi == Rat(0));
}

TEST_CASE("exp gauge brackets enclose frozen reference digits") {
  // e^32 = 78962960182680.69516...
  auto g = Gauge::exp(Rat(2));
  auto [lo, hi] = g.bracket(Rat(16));
  CHECK(parse_rational("789629601826806951/10000") < lo);
  CHECK(hi < parse_rational("789629601826806952/10000"));
  // e^0 = 1 exactly
  auto [zlo, zhi] = g.bracket(Rat(0));
  CHECK(zlo == Rat(1));
  CHECK(zhi == Rat(1));
}

TEST_CASE("transcendental comparisons refine until separated") {
  // e^2 = 7.389056098930650227230427...; the probes differ from it by less
  // than 6e-22, far below the first-pass bracket width
  auto g = Gauge::exp(Rat(1));
  CHECK(g.ge(parse_rational("7389056098930650227231/1000000000000000000000"), Rat(2)));
  CHECK(!g.ge(parse_rational("7389056098930650227230/1000000000000000000000"), Rat(2)));
}

namespace {

BuildResult expect_feasible(const BuildConfig& cfg) {
  auto outcome = build_psi(cfg);
  REQUIRE(std::holds_alternative<BuildResult>(outcome));
  return std::get<BuildResult>(std::move(outcome));
}

std::vector<std::uint64_t> block_last_primes(const Certificate& c) {
  std::vector<std::uint64_t> v;
  for (auto& b : c.blocks) v.push_back(b.h.f.back().first);
  return v;
}

}  // namespace

TEST_CASE("log gauge build: five blocks on consecutive primorials") {
  BuildConfig cfg;
  cfg.gauge = Gauge::log();
  cfg.blocks = 5;
  cfg.prime_budget = 1000;
  auto r = expect_feasible(cfg);

  CHECK(block_last_primes(r.cert) == std::vector<std::uint64_t>{19, 23, 29, 31, 37});
  CHECK(r.cert.blocks[0].index == 8);
  for (auto& b : r.cert.blocks) CHECK(b.s == 1);
  CHECK(r.psi.support.size() == 5);
  CHECK(!r.cert.thinned);
  CHECK(r.cert.support_end == primorial_upto(41));
  CHECK(r.cert.convention == Convention::Proof);

  // frozen exact checkpoint values at the first block
  CHECK(r.cert.blocks[0].h == primorial_upto(19));
  CHECK(r.cert.blocks[0].theta == parse_rational("323323/55296"));
  CHECK(r.cert.blocks[0].phi == Rat(8));
  CHECK(r.cert.blocks[0].chi_lower == parse_rational("323323/110592"));
  CHECK(r.cert.blocks[0].chi == parse_rational("1327104/46189"));

  // greedy minimality: the previous primorial misses the opening threshold
  Rat prev = r.cert.blocks[0].theta * Rat(18, 19);
  CHECK(!cfg.gauge.ge(prev / 2, Rat(16)));
  CHECK(cfg.gauge.ge(r.cert.blocks[0].theta / 2, Rat(16)));

  auto rep = certify(r.psi, r.cert);
  CHECK(rep.all_pass());
  CHECK(rep.checks.size() == 12);

  std::vector<Int> heights;
  for (auto& b : r.cert.blocks) heights.push_back(b.h.value());
  auto trace = divergence_trace(r.psi, 2, 1, heights);
  CHECK(trace == std::vector<Rat>{Rat(1), Rat(2), Rat(3), Rat(4), Rat(5)});
}

TEST_CASE("builder output is deterministic") {
  BuildConfig cfg;
  cfg.gauge = Gauge::log();
  cfg.blocks = 3;
  cfg.prime_budget = 500;
  auto a = expect_feasible(cfg);
  auto b = expect_feasible(cfg);
  CHECK(a.cert == b.cert);
  CHECK(a.psi == b.psi);
}

TEST_CASE("linear gauge build: three blocks") {
  BuildConfig cfg;
  cfg.gauge = Gauge::linear(Rat(1, 4), Rat(0));
  cfg.blocks = 3;
  cfg.prime_budget = 1000;
  auto r = expect_feasible(cfg);
  CHECK(block_last_primes(r.cert) == std::vector<std::uint64_t>{79, 83, 89});
  for (auto& b : r.cert.blocks) CHECK(b.s == 1);
  // opening block: theta/2 >= F(16) = 4 exactly, previous primorial fails
  CHECK(r.cert.blocks[0].theta >= Rat(8));
  CHECK(r.cert.blocks[0].theta * Rat(78, 79) < Rat(8));
  auto rep = certify(r.psi, r.cert);
  CHECK(rep.all_pass());
}

TEST_CASE("exp gauge build: one block lands in a narrow decision band") {
  BuildConfig cfg;
  cfg.gauge = Gauge::exp(Rat(1, 8));
  cfg.blocks = 1;
  cfg.prime_budget = 4000;
  auto r = expect_feasible(cfg);
  REQUIRE(r.cert.blocks.size() == 1);
  const auto& b = r.cert.blocks[0];
  CHECK(b.h.omega() == 546);
  CHECK(b.h.f.back().first == 3931);
  CHECK(b.s == 1);
  // theta/2 >= e^2 but barely: the previous primorial falls below
  CHECK(cfg.gauge.ge(b.theta / 2, Rat(16)));
  CHECK(!cfg.gauge.ge(b.theta * Rat(3930, 3931) / 2, Rat(16)));
  auto rep = certify(r.psi, r.cert);
  CHECK(rep.all_pass());
}

TEST_CASE("exp gauge at rate 2 is infeasible and reports certified requirements") {
  BuildConfig cfg;
  cfg.gauge = Gauge::exp(Rat(2));
  cfg.blocks = 1;
  cfg.prime_budget = 100000;
  auto outcome = build_psi(cfg);
  REQUIRE(std::holds_alternative<InfeasibilityReport>(outcome));
  auto rep = std::get<InfeasibilityReport>(outcome);
  CHECK(rep.failed_block == 1);
  // required theta = 2 e^32 = 157925920365361.39...
  CHECK(rep.required_lo > Rat(Int("157925920365361")));
  CHECK(rep.required_hi < Rat(Int("157925920365362")));
  CHECK(rep.required_lo <= rep.required_hi);
  // the whole budget was exhausted; theta there is known exactly
  CHECK(rep.prime_budget == 100000);
  CHECK(rep.primes_available == 9592);
  CHECK(rep.last_prime == 99991);
  CHECK(rep.achieved_lo == rep.achieved_hi);
  CHECK(rep.achieved_hi < rep.required_lo);
  CHECK(rep.achieved_lo > Rat(1));
}

TEST_CASE("builder guards and capacity limits") {
  BuildConfig cfg;
  cfg.gauge = Gauge::linear(Rat(1, 4), Rat(0));
  cfg.blocks = 3;
  cfg.prime_budget = 1000;

  BuildConfig bad = cfg;
  bad.m = 0;
  CHECK_THROWS_AS(build_psi(bad), domain_error);
  bad = cfg;
  bad.blocks = 0;
  CHECK_THROWS_AS(build_psi(bad), domain_error);

  BuildConfig tight = cfg;
  tight.support_cap = 2;  // support needs 3 points
  CHECK_THROWS_AS(build_psi(tight), capacity_error);
  tight = cfg;
  tight.work_cap = 10;  // 3 points x boundary index 25
  CHECK_THROWS_AS(build_psi(tight), capacity_error);
  tight = cfg;
  tight.prime_budget = 90;  // the boundary primorial needs the prime 97
  CHECK_THROWS_AS(build_psi(tight), capacity_error);
}

namespace {

bool check_passes(const CertifyReport& r, std::string_view name) {
  const auto* c = r.find(name);
  REQUIRE(c != nullptr);
  return c->pass;
}

}  // namespace

TEST_CASE("certify rejects each kind of tampering through the matching verdict") {
  BuildConfig cfg;
  cfg.gauge = Gauge::linear(Rat(1, 4), Rat(0));
  cfg.blocks = 3;
  cfg.prime_budget = 1000;
  auto base = expect_feasible(cfg);
  REQUIRE(certify(base.psi, base.cert).all_pass());

  SECTION("wrong normalization convention") {
    auto cert = base.cert;
    cert.convention = Convention::Theorem;
    auto rep = certify(base.psi, cert);
    REQUIRE(rep.checks.size() == 1);
    CHECK(!check_passes(rep, "representation"));
  }

  SECTION("truncated support") {
    auto psi = base.psi;
    psi.support.pop_back();
    auto rep = certify(psi, base.cert);
    CHECK(!check_passes(rep, "support_consecutive_primorials"));
    CHECK(rep.find("block_skeleton") == nullptr);  // later verdicts unreachable
  }

  SECTION("support point is not a primorial") {
    auto psi = base.psi;
    psi.support[0].l.f[0].second = 2;
    auto rep = certify(psi, base.cert);
    CHECK(!check_passes(rep, "support_consecutive_primorials"));
  }

  SECTION("support end does not close the support") {
    auto cert = base.cert;
    cert.support_end = primorial_upto(101);
    auto rep = certify(base.psi, cert);
    CHECK(!check_passes(rep, "support_consecutive_primorials"));
  }

  SECTION("inconsistent step size") {
    auto cert = base.cert;
    cert.blocks[1].s = 2;
    auto rep = certify(base.psi, cert);
    CHECK(!check_passes(rep, "block_skeleton"));
    CHECK(rep.find("block_weights_uniform") == nullptr);
  }

  SECTION("tampered weight fails weights, mass and checkpoint recomputation") {
    auto psi = base.psi;
    psi.support[1].weighted *= Rat(3, 2);
    auto rep = certify(psi, base.cert);
    CHECK(check_passes(rep, "representation"));
    CHECK(check_passes(rep, "block_skeleton"));
    CHECK(!check_passes(rep, "block_weights_uniform"));
    CHECK(!check_passes(rep, "block_sums_unit"));
    CHECK(!check_passes(rep, "checkpoints_match"));
    CHECK(check_passes(rep, "prefix_feasibility"));  // independent of weights
  }

  SECTION("psi pushed to 1/2 fails the height bound") {
    auto psi = base.psi;
    psi.support[0].weighted = Rat(psi.support[0].lv) / 2;
    auto rep = certify(psi, base.cert);
    CHECK(!check_passes(rep, "psi_below_half"));
    CHECK(check_passes(rep, "psi_nonincreasing_on_support"));
  }

  SECTION("forged chi checkpoint only fails recomputation") {
    auto cert = base.cert;
    cert.blocks[2].chi += 1;
    auto rep = certify(base.psi, cert);
    for (auto& c : rep.checks) {
      if (c.name == "checkpoints_match")
        CHECK(!c.pass);
      else
        CHECK(c.pass);
    }
  }

  SECTION("forged theta checkpoint only fails recomputation") {
    auto cert = base.cert;
    cert.blocks[0].theta += 1;
    auto rep = certify(base.psi, cert);
    for (auto& c : rep.checks) {
      if (c.name == "checkpoints_match")
        CHECK(!c.pass);
      else
        CHECK(c.pass);
    }
  }

  SECTION("increasing psi on the support is caught") {
    auto psi = base.psi;
    psi.support[1].weighted = Rat(90);  // psi(l2) = 90/l2 > 1/l1 = psi(l1)
    auto rep = certify(psi, base.cert);
    CHECK(!check_passes(rep, "psi_nonincreasing_on_support"));
  }
}

TEST_CASE("identity gauge build at full scale", "[heavy]") {
  BuildConfig cfg;
  cfg.gauge = Gauge::identity();
  cfg.blocks = 2;
  cfg.prime_budget = 66'000'000;
  auto r = expect_feasible(cfg);

  REQUIRE(r.cert.blocks.size() == 2);
  const auto& b0 = r.cert.blocks[0];
  // opening block: theta/2 >= F(16) = 16, and greedily minimal
  CHECK(b0.theta >= Rat(32));
  std::uint64_t p = b0.h.f.back().first;
  CHECK(b0.theta * Rat(to_int(p - 1), to_int(p)) < Rat(32));
  CHECK(b0.s == 1);
  CHECK(r.cert.blocks[1].s == 1);
  CHECK(r.psi.support.size() == 2);
  CHECK(!r.cert.thinned);

  auto rep = certify(r.psi, r.cert);
  CHECK(rep.all_pass());

  std::vector<Int> heights{r.cert.blocks[0].h.value(), r.cert.blocks[1].h.value()};
  auto trace = divergence_trace(r.psi, 2, 1, heights);
  CHECK(trace == std::vector<Rat>{Rat(1), Rat(2)});
}
