#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynauction {

// Raised when an operation's inputs violate its preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Absolute slack used by every feasibility and liability comparison.
inline constexpr double kFeasibilityTol = 1e-9;

// One bidder's per-round values, each in [0, 1], over T >= 1 rounds.
class ValueProfile {
 public:
  explicit ValueProfile(std::vector<double> values);

  std::size_t rounds() const { return values_.size(); }
  double operator[](std::size_t t) const { return values_[t]; }
  std::span<const double> values() const { return values_; }
  double total() const { return total_; }

  // Cumulative value through round t (1-based, inclusive); W(0) = 0.
  double cumulative(std::size_t t) const;

  bool operator==(const ValueProfile&) const = default;

 private:
  std::vector<double> values_;
  double total_ = 0.0;
};

// Values of all k bidders; every row shares the same T.
class TypeProfile {
 public:
  explicit TypeProfile(std::vector<ValueProfile> bidders);

  std::size_t bidders() const { return bidders_.size(); }
  std::size_t rounds() const { return bidders_.front().rounds(); }
  const ValueProfile& operator[](std::size_t i) const { return bidders_[i]; }
  const std::vector<ValueProfile>& all() const { return bidders_; }
  std::vector<double> totals() const;

 private:
  std::vector<ValueProfile> bidders_;
};

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  std::vector<double> allocations;
  std::vector<double> payments;
  std::vector<bool> eliminated_this_round;
  bool is_check_round = false;

  // Mechanism state at the start of the round: cumulative (pre-cap) payment
  // per bidder and the rate it buys.
  std::vector<double> state;
  std::vector<double> rates;

  // Auction-half outcome for first-price rounds; empty when nobody won.
  std::vector<std::size_t> winners;
  double winning_bid = 0.0;
};

struct Transcript {
  std::string mechanism_id;
  std::uint64_t seed = 0;
  std::size_t bidders = 0;
  std::vector<RoundRecord> rounds;
  std::vector<double> reimbursements;

  // Seller cash ledger kept by the mechanism while it runs. The audit
  // recomputes revenue from the rounds and compares.
  double ledger_revenue = 0.0;

  // First-price extensions.
  std::optional<std::size_t> cap_hit_round;
  std::vector<std::size_t> check_rounds;
  std::vector<bool> eliminated;
  std::vector<std::size_t> s_price;
  std::vector<std::size_t> s_play;
  std::optional<double> v_star;
  std::vector<double> post_cap_payments;
  std::optional<double> completion_bonus;
  bool audit_branch = false;

  double total_payment(std::size_t bidder) const;
  double total_payments() const;
  double total_reimbursements() const;
  // Sum of payments minus sum of reimbursements.
  double revenue() const;
};

// Empty transcript with T zeroed rounds for k bidders.
Transcript blank_transcript(std::string mechanism_id, std::uint64_t seed,
                            std::size_t bidders, std::size_t rounds);

struct Outcome {
  double revenue = 0.0;
  std::vector<double> per_bidder_welfare;
  std::vector<double> per_bidder_payments;
  std::vector<double> per_bidder_utility;
  double rev_stb = 0.0;
  double rev_spa = 0.0;
  std::optional<double> competitive_ratio;
};

// With a single bidder both benchmarks fall back to the bidder's total
// value, the single-buyer game's benchmark.
Outcome make_outcome(const Transcript& transcript, const TypeProfile& profile);

// Second-largest total value (multiset semantics). Requires k >= 2.
double rev_stb(const TypeProfile& profile);

// Sum over rounds of the per-round second-highest value. Requires k >= 2.
double rev_spa(const TypeProfile& profile);

// Adversarial profile generators ------------------------------------------

enum class ProfileKind { kConstant, kFrontLoaded, kBackLoaded, kSpike, kUniformRandom };

std::string to_string(ProfileKind kind);
ProfileKind profile_kind_from_string(const std::string& name);

struct ProfileParams {
  // Per-round value for constant / front_loaded / back_loaded, and for the
  // constant base of a spike.
  double level = 1.0;
  // front_loaded: number of leading non-zero rounds; back_loaded: number of
  // leading zero rounds. Defaults to T/2.
  std::optional<std::size_t> count;
  // uniform_random: requested total value (defaults to T/2, needs <= T).
  std::optional<double> total;
  // spike: cut round t0 in [1, T] and window width m >= 1.
  std::size_t cut_round = 1;
  std::size_t width = 1;
  ProfileKind base = ProfileKind::kConstant;
};

ValueProfile gen_profile(ProfileKind kind, const ProfileParams& params, std::size_t rounds,
                         std::uint64_t seed);

// Keeps base for t <= cut_round, spreads the remaining mass evenly over
// rounds (cut_round, cut_round + width], zero afterwards.
ValueProfile spike(const ValueProfile& base, std::size_t cut_round, std::size_t width);

}  // namespace dynauction
