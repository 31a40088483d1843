#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynauction/core.hpp"
#include "dynauction/single_buyer.hpp"

namespace dynauction {

// Raised when an exhaustive search would exceed its enumeration budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultEnumerationBudget = 10'000'000;

struct AuditNote {
  std::size_t round = 0;  // 0 for end-of-game checks
  std::size_t bidder = 0;
  std::string kind;
  double amount = 0.0;
};

struct AuditReport {
  bool liability_ok = true;
  bool feasibility_ok = true;
  bool accounting_ok = true;
  double max_liability_violation = 0.0;
  std::vector<AuditNote> notes;

  bool ok() const { return liability_ok && feasibility_ok && accounting_ok; }
};

// Checks per-round limited liability (payment <= allocation * value),
// per-round feasibility (allocations sum to at most 1), and the revenue
// identity against the mechanism's own ledger. First-price transcripts also
// get the refund identity, the share cap and the freeze after saturation.
AuditReport audit_transcript(const Transcript& transcript, const TypeProfile& profiles);

// Which mechanism a deviating bidder faces. In the multi-bidder variants
// the deviator is bidder 0 and the others report truthfully.
struct DeviationMechanism {
  enum class Kind { kPayToPlay, kTwoBidder, kSplitK };

  Kind kind = Kind::kPayToPlay;
  PayToPlayConfig config;

  static DeviationMechanism pay_to_play(PayToPlayConfig config);
  static DeviationMechanism two_bidder(const RateFunction& rho = RateFunction::canonical());
  static DeviationMechanism split_k(const RateFunction& rho = RateFunction::canonical());
};

struct DeviationResult {
  double best_gain = 0.0;
  std::vector<double> best_misreport;
  std::size_t best_defection_round = 0;
  double truthful_utility = 0.0;
  std::size_t misreports_checked = 0;
};

// Every misreport on the value grid (endpoints included) combined with
// every defection round tau: follow the misreport's prescribed schedule
// while it stays affordable, skip the payment at tau, and compare with
// truthful play plus its reimbursement.
DeviationResult deviation_search(const DeviationMechanism& mechanism,
                                 const ValueProfile& true_profile, double value_grid_step,
                                 const std::optional<TypeProfile>& co_profiles = std::nullopt,
                                 std::size_t budget = kDefaultEnumerationBudget);

struct DominanceResult {
  bool front_load_optimal = true;
  double gap = 0.0;  // best enumerated utility minus best front-loading utility
  double best_schedule_utility = 0.0;
  double best_front_load_utility = 0.0;
  std::size_t states_visited = 0;
};

// Best utility over every liability-feasible payment schedule on the payment
// grid (depth-first, memoized on round and amount paid so far), against
// front-loading to every total those schedules reach and a 0.01 grid of x_bar.
// The budget bounds the number of (round, amount) states.
DominanceResult schedule_dominance_check(const ValueProfile& profile,
                                         const PayToPlayConfig& config, double payment_grid_step,
                                         double tolerance = 1e-6,
                                         std::size_t budget = kDefaultEnumerationBudget);

// Two-bidder first-price mechanism, utility of bidder 0 excluding the
// constant completion bonus. A lean replay of run_k_fpa used by the
// exhaustive bid check below.
double fpa_pair_utility(const ValueProfile& top, const ValueProfile& opponent, double v_star,
                        const std::vector<double>& top_bids, const std::vector<double>& opp_bids);

struct BidDominanceReport {
  std::size_t comparisons = 0;
  std::size_t violations = 0;
  double worst_shortfall = 0.0;
  // Every low-bid vector had at least one opponent where raising strictly
  // helps.
  bool strict_everywhere = true;
  // Fraction of low-bid vectors strictly improved against all-zero opponents.
  double zero_opponent_strict_share = 0.0;
};

// For every top-bidder bid vector on the grid (bids <= v_t / 2) and every
// early round t' (W(t') <= 0.8 V - 1) bidding below v_t' / 2, compares
// against the same vector raised to v_t' / 2, for every opponent vector on
// the grid with bids in [0, opponent_max_bid].
BidDominanceReport early_bid_dominance_check(const ValueProfile& top, const ValueProfile& opponent,
                                             double v_star, double bid_step,
                                             double opponent_max_bid);

}  // namespace dynauction
