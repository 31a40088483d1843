#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dynauction/core.hpp"
#include "dynauction/single_buyer.hpp"

namespace dynauction {

// Bids for the auction half of each round, submitted up front, plus the
// reported total value and an optional round at which the bidder walks away.
struct BidSchedule {
  std::vector<double> bids;
  double reported_total = 0.0;
  std::optional<std::size_t> defect_round;
};

// Bid v_t / 2 every round and report the true total.
BidSchedule prescribed_bids(const ValueProfile& profile);

// Last round t with W(t) <= 0.8 V - 1, where raising a bid to v_t / 2 is
// weakly dominant for the top bidder. Empty when no round qualifies.
std::optional<std::size_t> last_early_round(const ValueProfile& profile);

// Per-bidder pay-to-play on a 1/k slice of the item. Bidder i's bound is
// max_{j != i} reports[j] / k and the reimbursement is scaled by the slice.
Transcript run_split_k(const TypeProfile& profiles, std::span<const double> reports,
                       std::span<const BuyerStrategy> strategies,
                       const RateFunction& rho = RateFunction::canonical(),
                       std::optional<double> reimbursement = std::nullopt);

// The k = 2 case: bidder 1 gets rho(2 X1 / V2) / 2, bidder 2 rho(2 X2 / V1) / 2.
Transcript run_two_bidder(const ValueProfile& a, const ValueProfile& b,
                          std::array<double, 2> reports,
                          const std::array<BuyerStrategy, 2>& strategies,
                          const RateFunction& rho = RateFunction::canonical(),
                          std::optional<double> reimbursement = std::nullopt);

// Live state of the first-price mechanism.
struct KFpaState {
  std::vector<double> x_paid;
  std::optional<std::size_t> cap_hit_round;
  std::vector<bool> eliminated;
  std::vector<double> post_cap_payments;

  double share_total() const;
};

// Half of each item is sold by first-price auction; the other half is split
// in proportion to shares 10 X_i / v_star, where X_i is the bidder's
// auction spend before the shares saturate. After saturation auction
// payments are refunded at the end; survivors also receive g.
Transcript run_k_fpa(const TypeProfile& profiles, double v_star,
                     std::span<const BidSchedule> schedules, double g = 2.0);

struct SolicitationConfig {
  std::uint64_t seed = 0;
  double audit_probability = 0.05;
  // Defaults to 1 / (2 k T).
  std::optional<double> epsilon_share;
  double bonus_multiplier = 2.0;

  double epsilon_for(std::size_t bidders, std::size_t rounds) const;
};

// Value solicitation: with probability delta run the report audit,
// otherwise split bidders by fair coin into a pricing set (whose top report
// becomes v_star) and a playing set that runs the first-price mechanism.
// Playing bidders use `schedules` when given, else prescribed bids.
Transcript solicit_and_run(const TypeProfile& profiles, std::span<const double> reports,
                           const SolicitationConfig& config, double g = 2.0,
                           std::span<const BidSchedule> schedules = {});

// First-price mechanism run against 0.5 v_star with every share seeded at
// X_i = 1. Each round is, with probability 1/2, a check round in which
// every bidder receives epsilon_share and must pay 2 * epsilon_share * bid
// or be ejected. Post-saturation auction rounds are free, so the only end
// payment is g per survivor.
Transcript run_k_fpa_spot_check(const TypeProfile& profiles, double v_star,
                                std::span<const BidSchedule> schedules,
                                const SolicitationConfig& config, double g, std::uint64_t seed);

}  // namespace dynauction
