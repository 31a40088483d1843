#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "dynauction/multi_bidder.hpp"
#include "dynauction/rng.hpp"
#include "dynauction/single_buyer.hpp"
#include "dynauction/verify.hpp"

using namespace dynauction;

namespace {

const double kReimb = 1.0 + 2.0 * std::numbers::e;

ValueProfile constant(std::size_t rounds, double level) {
  return ValueProfile(std::vector<double>(rounds, level));
}

// Plain enumeration of every schedule, no memoization.
double naive_best_schedule(const ValueProfile& p, const PayToPlayConfig& cfg, double step) {
  double best = -1e300;
  std::function<void(std::size_t, long, double)> go = [&](std::size_t t, long units, double welfare) {
    const double paid = static_cast<double>(units) * step;
    if (t == p.rounds()) {
      const bool reimbursed = paid >= cfg.x_opt * cfg.v_bound - 1e-9;
      best = std::max(best, welfare - paid + (reimbursed ? cfg.reimbursement : 0.0));
      return;
    }
    const double gained = cfg.rho.at(paid / cfg.v_bound) * p[t];
    for (long c = 0; static_cast<double>(c) * step <= gained + 1e-9; ++c) go(t + 1, units + c, welfare + gained);
  };
  go(0, 0, 0.0);
  return best;
}

std::vector<ValueProfile> quarter_grid_profiles(std::size_t rounds) {
  std::vector<ValueProfile> out;
  std::vector<int> d(rounds, 0);
  for (;;) {
    std::vector<double> v(rounds);
    for (std::size_t t = 0; t < rounds; ++t) v[t] = d[t] * 0.25;
    out.emplace_back(v);
    std::size_t pos = 0;
    while (pos < rounds && ++d[pos] == 5) d[pos++] = 0;
    if (pos == rounds) break;
  }
  return out;
}

}  // namespace

TEST_CASE("audit passes mechanism transcripts") {
  const auto p = constant(50, 1.0);
  const auto cfg = PayToPlayConfig::make(RateFunction::canonical(), 50.0);
  const auto tr = run_pay_to_play(p, cfg, BuyerStrategy::front_load_stop());
  const auto rep = audit_transcript(tr, TypeProfile({p}));
  CHECK(rep.ok());
  CHECK(rep.max_liability_violation == 0.0);
  CHECK(rep.notes.empty());
}

TEST_CASE("audit reports a hand-built liability violation") {
  const TypeProfile p({ValueProfile({1.0, 1.0})});
  Transcript tr = blank_transcript("hand", 0, 1, 2);
  tr.rounds[0].allocations = {0.5};
  tr.rounds[0].payments = {0.6};
  tr.ledger_revenue = 0.6;
  const auto rep = audit_transcript(tr, p);
  CHECK_FALSE(rep.liability_ok);
  CHECK(rep.feasibility_ok);
  CHECK(rep.accounting_ok);
  CHECK(rep.max_liability_violation == doctest::Approx(0.1).epsilon(1e-12));
  REQUIRE(rep.notes.size() == 1);
  CHECK(rep.notes[0].round == 1);
  CHECK(rep.notes[0].kind == "liability");
}

TEST_CASE("audit catches feasibility and accounting faults") {
  const TypeProfile p({constant(3, 1.0), constant(3, 1.0)});
  SUBCASE("over-allocation") {
    Transcript tr = blank_transcript("hand", 0, 2, 3);
    tr.rounds[1].allocations = {0.7, 0.4};
    CHECK_FALSE(audit_transcript(tr, p).feasibility_ok);
  }
  SUBCASE("ledger disagrees with the rounds") {
    Transcript tr = blank_transcript("hand", 0, 2, 3);
    tr.rounds[0].allocations = {0.5, 0.5};
    tr.rounds[0].payments = {0.2, 0.1};
    tr.ledger_revenue = 0.4;
    CHECK_FALSE(audit_transcript(tr, p).accounting_ok);
    tr.ledger_revenue = 0.3;
    CHECK(audit_transcript(tr, p).ok());
  }
  SUBCASE("service after elimination") {
    Transcript tr = blank_transcript("hand", 0, 2, 3);
    tr.rounds[0].eliminated_this_round = {true, false};
    tr.rounds[2].allocations = {0.1, 0.0};
    CHECK_FALSE(audit_transcript(tr, p).feasibility_ok);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(audit_transcript(blank_transcript("hand", 0, 2, 4), p), InvalidInput);
    CHECK_THROWS_AS(audit_transcript(blank_transcript("hand", 0, 1, 3), p), InvalidInput);
  }
}

TEST_CASE("audit recomputes the first-price refund identity") {
  const TypeProfile p({constant(200, 1.0), constant(200, 0.9)});
  std::vector<BidSchedule> s = {prescribed_bids(p[0]), prescribed_bids(p[1])};
  const auto tr = run_k_fpa(p, 100.0, s);
  REQUIRE(tr.cap_hit_round);
  CHECK(audit_transcript(tr, p).ok());

  Transcript bad = tr;
  bad.reimbursements[0] += 0.5;
  bad.ledger_revenue -= 0.5;  // keep the plain ledger identity intact
  const auto rep = audit_transcript(bad, p);
  CHECK_FALSE(rep.accounting_ok);

  Transcript moved = tr;
  moved.rounds.back().state[0] += 1.0;
  CHECK_FALSE(audit_transcript(moved, p).accounting_ok);
}

TEST_CASE("deviation search examples") {
  SUBCASE("constant 0.5, T = 4") {
    const auto p = constant(4, 0.5);
    const auto cfg = PayToPlayConfig::make(RateFunction::canonical(), std::max(p.total(), 1.0));
    const auto res = deviation_search(DeviationMechanism::pay_to_play(cfg), p, 0.25);
    CHECK(res.misreports_checked == 626);
    CHECK(res.best_gain <= cfg.reimbursement + 1e-6);
    CHECK(res.best_defection_round >= 1);
    CHECK(res.best_misreport.size() == 4);
  }
  SUBCASE("zero profile") {
    const auto p = constant(4, 0.0);
    const auto cfg = PayToPlayConfig::make(RateFunction::canonical(), 1.0);
    const auto res = deviation_search(DeviationMechanism::pay_to_play(cfg), p, 0.25);
    CHECK(res.best_gain == 0.0);
    CHECK(res.truthful_utility == 0.0);
  }
  SUBCASE("two bidders against a truthful opponent") {
    const auto p = ValueProfile({1.0, 0.0, 0.75, 1.0});
    const TypeProfile other({ValueProfile({0.0, 1.0, 0.5, 0.75})});
    const auto res = deviation_search(DeviationMechanism::two_bidder(), p, 0.25, other);
    CHECK(res.best_gain <= kReimb / 2.0 + 1e-6);
    CHECK_THROWS_AS(deviation_search(DeviationMechanism::two_bidder(), p, 0.25), InvalidInput);
  }
  SUBCASE("split-k against three opponents") {
    const auto p = ValueProfile({1.0, 1.0, 0.5});
    const TypeProfile others({constant(3, 1.0), constant(3, 0.5), constant(3, 0.25)});
    const auto res = deviation_search(DeviationMechanism::split_k(), p, 0.5, others);
    CHECK(res.best_gain <= kReimb / 4.0 + 1e-6);
  }
  SUBCASE("budget refusal names the bound") {
    const auto cfg = PayToPlayConfig::make(RateFunction::canonical(), 8.0);
    try {
      deviation_search(DeviationMechanism::pay_to_play(cfg), constant(8, 1.0), 0.01);
      FAIL("expected a budget refusal");
    } catch (const BudgetExceeded& e) {
      CHECK(std::string(e.what()).find("1.08286e+16") != std::string::npos);
    }
    CHECK_THROWS_AS(deviation_search(DeviationMechanism::pay_to_play(cfg), constant(9, 1.0), 0.5), InvalidInput);
    CHECK_THROWS_AS(deviation_search(DeviationMechanism::pay_to_play(cfg), constant(4, 1.0), 0.3), InvalidInput);
  }
}

TEST_CASE("deviation payoff adds the withheld payment at the defection round") {
  // Misreport 1 everywhere on a constant-1 profile and defect at tau: the
  // payoff is the utility through tau - 1 plus the round-tau value.
  const auto p = constant(3, 1.0);
  const auto cfg = PayToPlayConfig::make(RateFunction::canonical(), 3.0);
  const auto run = run_pay_to_play_slice(p.values(), cfg, 1.0, BuyerStrategy::front_load_stop());
  const auto res = deviation_search(DeviationMechanism::pay_to_play(cfg), p, 1.0);
  double best = -1e300;
  double prefix = 0.0;
  for (std::size_t tau = 0; tau < 3; ++tau) {
    best = std::max(best, prefix + run.allocations[tau]);
    prefix += run.allocations[tau] - run.payments[tau];
  }
  const double truthful = prefix + run.reimbursement;
  CHECK(res.truthful_utility == doctest::Approx(truthful));
  CHECK(res.best_gain >= best - truthful - 1e-12);
}

TEST_CASE("pay-to-play is truthful up to the reimbursement on a T = 3 corpus") {
  for (const auto& p : quarter_grid_profiles(3)) {
    const auto cfg = PayToPlayConfig::make(RateFunction::canonical(), std::max(p.total(), 1.0));
    const auto res = deviation_search(DeviationMechanism::pay_to_play(cfg), p, 0.25);
    REQUIRE(res.best_gain <= cfg.reimbursement + 1e-6);
  }
}

TEST_CASE("schedule dominance examples") {
  const auto rho = RateFunction::canonical();
  SUBCASE("constant 1, T = 4, step 0.1") {
    const auto cfg = PayToPlayConfig::make(rho, 4.0);
    const auto res = schedule_dominance_check(constant(4, 1.0), cfg, 0.1);
    CHECK(res.front_load_optimal);
    CHECK(res.gap <= cfg.reimbursement + 1e-6);
  }
  SUBCASE("single round") {
    const auto cfg = PayToPlayConfig::make(rho, 1.0);
    CHECK(schedule_dominance_check(constant(1, 0.7), cfg, 0.05).front_load_optimal);
  }
  SUBCASE("back-loaded") {
    const auto cfg = PayToPlayConfig::make(rho, 2.0);
    CHECK(schedule_dominance_check(ValueProfile({0, 0, 1, 1}), cfg, 0.05).front_load_optimal);
  }
  SUBCASE("refusals") {
    const auto cfg = PayToPlayConfig::make(rho, 7.0);
    CHECK_THROWS_AS(schedule_dominance_check(constant(7, 1.0), cfg, 0.1), InvalidInput);
    CHECK_THROWS_AS(schedule_dominance_check(constant(6, 1.0), cfg, 0.05, 1e-6, 10), BudgetExceeded);
  }
}

TEST_CASE("memoized schedule search matches plain enumeration") {
  const auto rho = RateFunction::canonical();
  Rng rng(8);
  for (int n = 0; n < 40; ++n) {
    std::vector<double> v(3);
    for (auto& x : v) x = static_cast<double>(rng.next() % 5) / 4.0;
    const ValueProfile p(v);
    const auto cfg = PayToPlayConfig::make(rho, std::max(p.total(), 1.0));
    const auto res = schedule_dominance_check(p, cfg, 0.1);
    REQUIRE(res.best_schedule_utility == doctest::Approx(naive_best_schedule(p, cfg, 0.1)).epsilon(1e-12));
    REQUIRE(res.front_load_optimal);
  }
}

TEST_CASE("front-loading dominates on sampled T = 6 quarter-grid profiles") {
  const auto rho = RateFunction::canonical();
  Rng rng(6);
  for (int n = 0; n < 150; ++n) {
    std::vector<double> v(6);
    for (auto& x : v) x = static_cast<double>(rng.next() % 5) / 4.0;
    const ValueProfile p(v);
    const auto cfg = PayToPlayConfig::make(rho, std::max(p.total(), 1.0));
    const auto res = schedule_dominance_check(p, cfg, 0.05);
    REQUIRE(res.gap <= cfg.reimbursement + 1e-6);
    REQUIRE(res.front_load_optimal);
  }
}

TEST_CASE("lean pair replay agrees with the full first-price mechanism") {
  Rng rng(123);
  for (int n = 0; n < 500; ++n) {
    const std::size_t rounds = 1 + rng.next() % 10;
    std::vector<double> a(rounds);
    std::vector<double> b(rounds);
    std::vector<double> ba(rounds);
    std::vector<double> bb(rounds);
    for (std::size_t t = 0; t < rounds; ++t) {
      a[t] = static_cast<double>(rng.next() % 5) / 4.0;
      b[t] = static_cast<double>(rng.next() % 5) / 4.0;
      ba[t] = static_cast<double>(rng.next() % 5) / 4.0 * a[t] / 2.0;
      bb[t] = static_cast<double>(rng.next() % 5) / 4.0 * b[t] / 2.0;
      if (rng.coin(0.2)) bb[t] = ba[t] <= b[t] / 2.0 ? ba[t] : bb[t];  // ties
    }
    const TypeProfile p({ValueProfile(a), ValueProfile(b)});
    const double v_star = 0.5 + rng.uniform() * 10.0;
    std::vector<BidSchedule> s = {prescribed_bids(p[0]), prescribed_bids(p[1])};
    s[0].bids = ba;
    s[1].bids = bb;
    const auto tr = run_k_fpa(p, v_star, s, 2.0);
    REQUIRE_FALSE(tr.eliminated[0]);
    REQUIRE_FALSE(tr.eliminated[1]);
    const double full = make_outcome(tr, p).per_bidder_utility[0] - 2.0;
    REQUIRE(fpa_pair_utility(p[0], p[1], v_star, ba, bb) == doctest::Approx(full).epsilon(1e-12));
  }
}

TEST_CASE("raising early bids to v/2 is weakly dominant on a small grid") {
  const auto top = constant(4, 1.0);
  const auto opp = constant(4, 1.0);
  const auto rep = early_bid_dominance_check(top, opp, top.total(), 0.25, 0.5);
  CHECK(rep.comparisons > 0);
  CHECK(rep.violations == 0);
  CHECK(rep.worst_shortfall == 0.0);
  CHECK(rep.strict_everywhere);
  CHECK(rep.zero_opponent_strict_share > 0.0);
  CHECK_THROWS_AS(early_bid_dominance_check(top, opp, 4.0, 0.25, 0.75), InvalidInput);
}
