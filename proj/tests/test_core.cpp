#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "dynauction/core.hpp"
#include "dynauction/rng.hpp"

using namespace dynauction;

namespace {

TypeProfile random_type_profile(Rng& rng, std::size_t k, std::size_t rounds) {
  std::vector<ValueProfile> rows;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> v(rounds);
    // Quarter-grid values so ties show up often.
    for (auto& x : v) x = rng.coin(0.5) ? static_cast<double>(rng.next() % 5) / 4.0 : rng.uniform();
    rows.emplace_back(std::move(v));
  }
  return TypeProfile(std::move(rows));
}

double stb_oracle(const TypeProfile& p) {
  auto totals = p.totals();
  std::sort(totals.begin(), totals.end());
  return totals[totals.size() - 2];
}

double spa_oracle(const TypeProfile& p) {
  double sum = 0.0;
  for (std::size_t t = 0; t < p.rounds(); ++t) {
    std::vector<double> col;
    for (std::size_t i = 0; i < p.bidders(); ++i) col.push_back(p[i][t]);
    std::sort(col.begin(), col.end());
    sum += col[col.size() - 2];
  }
  return sum;
}

TypeProfile rows_with_totals(const std::vector<double>& totals) {
  std::vector<ValueProfile> rows;
  for (double v : totals) {
    std::vector<double> r(10, 0.0);
    double left = v;
    for (auto& x : r) {
      x = std::min(left, 1.0);
      left -= x;
    }
    rows.emplace_back(r);
  }
  return TypeProfile(std::move(rows));
}

}  // namespace

TEST_CASE("value profile rejects values outside the unit interval") {
  CHECK_THROWS_AS(ValueProfile({0.5, 1.5}), InvalidInput);
  CHECK_THROWS_AS(ValueProfile({-0.1}), InvalidInput);
  CHECK_THROWS_AS(ValueProfile(std::vector<double>{}), InvalidInput);
  CHECK_THROWS_AS(ValueProfile({std::nan("")}), InvalidInput);
  const ValueProfile p({0.25, 0.5, 1.0});
  CHECK(p.total() == 1.75);
  CHECK(p.cumulative(0) == 0.0);
  CHECK(p.cumulative(2) == 0.75);
}

TEST_CASE("type profile needs a shared horizon") {
  CHECK_THROWS_AS(TypeProfile({ValueProfile({1.0}), ValueProfile({1.0, 1.0})}), InvalidInput);
  CHECK_THROWS_AS(TypeProfile(std::vector<ValueProfile>{}), InvalidInput);
}

TEST_CASE("rev_stb is the second largest total") {
  CHECK(rev_stb(rows_with_totals({10, 7, 3})) == 7.0);
  CHECK(rev_stb(rows_with_totals({5, 5})) == 5.0);
  CHECK_THROWS_AS(rev_stb(rows_with_totals({5})), InvalidInput);
}

TEST_CASE("rev_spa sums per-round second highest values") {
  const TypeProfile disjoint({ValueProfile({1, 0, 1, 0}), ValueProfile({0, 1, 0, 1})});
  CHECK(rev_spa(disjoint) == 0.0);
  const TypeProfile halves({ValueProfile(std::vector<double>(10, 0.5)),
                            ValueProfile(std::vector<double>(10, 0.5))});
  CHECK(rev_spa(halves) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK_THROWS_AS(rev_spa(TypeProfile({ValueProfile({1.0})})), InvalidInput);
}

TEST_CASE("benchmarks agree with sort oracles") {
  Rng rng(2024);
  SUBCASE("k = 4, T = 6, 50 instances") {
    for (int n = 0; n < 50; ++n) {
      const auto p = random_type_profile(rng, 4, 6);
      CHECK(rev_stb(p) == stb_oracle(p));
    }
  }
  SUBCASE("k = 3, T = 5") {
    const auto p = random_type_profile(rng, 3, 5);
    CHECK(rev_spa(p) == spa_oracle(p));
  }
  SUBCASE("1000 instances, k <= 5, T <= 8") {
    for (int n = 0; n < 1000; ++n) {
      const std::size_t k = 2 + rng.next() % 4;
      const std::size_t rounds = 1 + rng.next() % 8;
      const auto p = random_type_profile(rng, k, rounds);
      REQUIRE(rev_stb(p) == stb_oracle(p));
      REQUIRE(rev_spa(p) == spa_oracle(p));
      REQUIRE(rev_stb(p) >= 0.0);
      REQUIRE(rev_spa(p) >= 0.0);
    }
  }
}

TEST_CASE("generator examples") {
  ProfileParams half;
  half.level = 0.5;
  CHECK(gen_profile(ProfileKind::kConstant, half, 4, 0).values().size() == 4);
  CHECK(std::ranges::equal(gen_profile(ProfileKind::kConstant, half, 4, 0).values(),
                           std::vector<double>{0.5, 0.5, 0.5, 0.5}));

  ProfileParams back;
  back.level = 1.0;
  CHECK(std::ranges::equal(gen_profile(ProfileKind::kBackLoaded, back, 4, 0).values(),
                           std::vector<double>{0, 0, 1, 1}));
  CHECK(std::ranges::equal(gen_profile(ProfileKind::kFrontLoaded, back, 4, 0).values(),
                           std::vector<double>{1, 1, 0, 0}));

  ProfileParams sp = half;
  sp.cut_round = 2;
  sp.width = 2;
  CHECK(std::ranges::equal(gen_profile(ProfileKind::kSpike, sp, 4, 0).values(),
                           std::vector<double>{0.5, 0.5, 0.5, 0.5}));
}

TEST_CASE("spike concentrates the remaining mass") {
  const ValueProfile base(std::vector<double>(8, 0.25));
  const auto s = spike(base, 2, 3);
  // 6 rounds * 0.25 = 1.5 spread over 3 rounds.
  CHECK(std::ranges::equal(s.values(), std::vector<double>{0.25, 0.25, 0.5, 0.5, 0.5, 0, 0, 0}));
  CHECK(s.total() == doctest::Approx(base.total()));
  CHECK_THROWS_AS(spike(base, 2, 1), InvalidInput);   // 1.5 in one round
  CHECK_THROWS_AS(spike(base, 7, 2), InvalidInput);   // window past T
  CHECK_THROWS_AS(spike(base, 0, 1), InvalidInput);
  CHECK(spike(base, 8, 1) == base);                   // nothing left to move
}

TEST_CASE("uniform_random hits the requested total and stays feasible") {
  ProfileParams p;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    p.total = static_cast<double>(seed % 40) + 0.5;
    const auto v = gen_profile(ProfileKind::kUniformRandom, p, 40, seed);
    REQUIRE(v.total() == doctest::Approx(*p.total).epsilon(1e-12));
    for (double x : v.values()) REQUIRE((x >= 0.0 && x <= 1.0));
  }
  p.total = 41.0;
  CHECK_THROWS_AS(gen_profile(ProfileKind::kUniformRandom, p, 40, 0), InvalidInput);
}

TEST_CASE("generation is pure") {
  ProfileParams p;
  p.total = 17.0;
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL, 0xdeadbeefULL}) {
    const auto a = gen_profile(ProfileKind::kUniformRandom, p, 64, seed);
    const auto b = gen_profile(ProfileKind::kUniformRandom, p, 64, seed);
    CHECK(std::memcmp(a.values().data(), b.values().data(), 64 * sizeof(double)) == 0);
  }
  CHECK(gen_profile(ProfileKind::kUniformRandom, p, 64, 1) !=
        gen_profile(ProfileKind::kUniformRandom, p, 64, 2));
}

TEST_CASE("generator rejects bad parameters") {
  ProfileParams p;
  p.level = 1.2;
  CHECK_THROWS_AS(gen_profile(ProfileKind::kConstant, p, 4, 0), InvalidInput);
  CHECK_THROWS_AS(gen_profile(ProfileKind::kConstant, ProfileParams{}, 0, 0), InvalidInput);
  CHECK_THROWS_AS(profile_kind_from_string("sawtooth"), InvalidInput);
  for (auto k : {ProfileKind::kConstant, ProfileKind::kFrontLoaded, ProfileKind::kBackLoaded,
                 ProfileKind::kSpike, ProfileKind::kUniformRandom}) {
    CHECK(profile_kind_from_string(to_string(k)) == k);
  }
}

TEST_CASE("outcome utility identity is exact") {
  const TypeProfile p({ValueProfile({1.0, 0.5}), ValueProfile({0.25, 0.75})});
  Transcript tr = blank_transcript("hand", 7, 2, 2);
  tr.rounds[0].allocations = {0.5, 0.5};
  tr.rounds[0].payments = {0.3, 0.1};
  tr.rounds[1].allocations = {0.25, 0.75};
  tr.rounds[1].payments = {0.1, 0.5};
  tr.reimbursements = {0.2, 0.0};
  const Outcome o = make_outcome(tr, p);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(o.per_bidder_utility[i] ==
          o.per_bidder_welfare[i] - o.per_bidder_payments[i] + tr.reimbursements[i]);
  }
  CHECK(o.revenue == doctest::Approx(0.8));
  CHECK(o.rev_stb == 1.0);
  REQUIRE(o.competitive_ratio);
  CHECK(*o.competitive_ratio == doctest::Approx(0.8));
}

TEST_CASE("rng streams are reproducible and split independently") {
  Rng a(5);
  Rng b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  const Rng root(11);
  CHECK(root.split(0).next() != root.split(1).next());
  Rng u(3);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u.uniform();
    REQUIRE((x >= 0.0 && x < 1.0));
    sum += x;
  }
  CHECK(sum / 100000.0 == doctest::Approx(0.5).epsilon(0.01));
}
