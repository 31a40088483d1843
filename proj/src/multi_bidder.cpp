#include "dynauction/multi_bidder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dynauction/rng.hpp"

namespace dynauction {

BidSchedule prescribed_bids(const ValueProfile& profile) {
  BidSchedule s;
  s.bids.reserve(profile.rounds());
  for (double v : profile.values()) s.bids.push_back(v / 2.0);
  s.reported_total = profile.total();
  return s;
}

std::optional<std::size_t> last_early_round(const ValueProfile& profile) {
  const double threshold = 0.8 * profile.total() - 1.0;
  std::optional<std::size_t> last;
  double w = 0.0;
  for (std::size_t t = 0; t < profile.rounds(); ++t) {
    w += profile[t];
    if (w > threshold + 1e-12) break;
    last = t + 1;
  }
  return last;
}

Transcript run_split_k(const TypeProfile& profiles, std::span<const double> reports,
                       std::span<const BuyerStrategy> strategies, const RateFunction& rho,
                       std::optional<double> reimbursement) {
  const std::size_t k = profiles.bidders();
  if (k < 2) throw InvalidInput("split mechanism needs at least two bidders");
  if (reports.size() != k || strategies.size() != k) {
    throw InvalidInput("need one report and one strategy per bidder");
  }
  for (double r : reports) {
    if (!(r >= 0.0)) throw InvalidInput("reported totals must be non-negative");
  }

  const double share = 1.0 / static_cast<double>(k);
  PayToPlayConfig base = PayToPlayConfig::make(rho, 1.0, reimbursement);

  Transcript tr = blank_transcript(k == 2 ? "two_bidder" : "split_k", 0, k, profiles.rounds());
  double cash = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double top_other = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) top_other = std::max(top_other, reports[j]);
    }
    PayToPlayConfig slice = base;
    slice.v_bound = top_other * share;

    const SliceRun run = run_pay_to_play_slice(profiles[i].values(), slice, share, strategies[i]);
    for (std::size_t t = 0; t < profiles.rounds(); ++t) {
      auto& r = tr.rounds[t];
      r.allocations[i] = run.allocations[t];
      r.payments[i] = run.payments[t];
      r.state[i] = run.cumulative[t];
      r.rates[i] = run.rates[t];
      r.eliminated_this_round[i] = run.eliminated_round == t + 1;
      cash += run.payments[t];
    }
    tr.eliminated[i] = run.eliminated_round.has_value();
    tr.reimbursements[i] = run.reimbursement;
    cash -= run.reimbursement;
  }
  tr.ledger_revenue = cash;
  return tr;
}

Transcript run_two_bidder(const ValueProfile& a, const ValueProfile& b,
                          std::array<double, 2> reports,
                          const std::array<BuyerStrategy, 2>& strategies, const RateFunction& rho,
                          std::optional<double> reimbursement) {
  if (!(reports[0] > 0.0 && reports[1] > 0.0)) throw InvalidInput("reports must be positive");
  if (a.rounds() != b.rounds()) throw InvalidInput("both bidders need the same number of rounds");
  return run_split_k(TypeProfile({a, b}), reports, strategies, rho, reimbursement);
}

double KFpaState::share_total() const {
  return std::accumulate(x_paid.begin(), x_paid.end(), 0.0);
}

namespace {

struct FpaOptions {
  std::string mechanism_id;
  double v_star = 1.0;
  double v_bound = 1.0;        // shares are 10 X_i / v_bound
  double initial_credit = 0.0;  // starting X_i
  bool refund_post_cap = true;  // false: post-cap auction rounds are free
  double check_probability = 0.0;
  double check_share = 0.0;
  std::uint64_t seed = 0;
};

void validate_schedules(const TypeProfile& profiles, std::span<const BidSchedule> schedules) {
  if (schedules.size() != profiles.bidders()) throw InvalidInput("need one bid schedule per bidder");
  for (const auto& s : schedules) {
    if (s.bids.size() != profiles.rounds()) throw InvalidInput("bid schedule length differs from T");
    for (double b : s.bids) {
      if (!(b >= 0.0)) throw InvalidInput("bids must be non-negative");
    }
  }
}

Transcript run_fpa_engine(const TypeProfile& profiles, std::span<const BidSchedule> schedules,
                          double g, const FpaOptions& opt) {
  const std::size_t k = profiles.bidders();
  const std::size_t rounds = profiles.rounds();
  const double cap_total = opt.v_bound / 10.0;

  KFpaState st;
  st.x_paid.assign(k, opt.initial_credit);
  st.eliminated.assign(k, false);
  st.post_cap_payments.assign(k, 0.0);

  Transcript tr = blank_transcript(opt.mechanism_id, opt.seed, k, rounds);
  tr.v_star = opt.v_star;
  tr.completion_bonus = g;
  Rng rng(opt.seed);
  double cash = 0.0;

  const auto eliminate = [&](std::size_t i, RoundRecord& r) {
    st.eliminated[i] = true;
    st.post_cap_payments[i] = 0.0;
    r.eliminated_this_round[i] = true;
  };

  for (std::size_t t = 0; t < rounds; ++t) {
    RoundRecord& r = tr.rounds[t];
    const bool capped = st.cap_hit_round.has_value();
    for (std::size_t i = 0; i < k; ++i) {
      r.state[i] = st.x_paid[i];
      r.rates[i] = 10.0 * st.x_paid[i] / opt.v_bound;
    }

    if (opt.check_probability > 0.0 && rng.coin(opt.check_probability)) {
      r.is_check_round = true;
      tr.check_rounds.push_back(t + 1);
      for (std::size_t i = 0; i < k; ++i) {
        if (st.eliminated[i]) continue;
        r.allocations[i] = opt.check_share;
        const double due = 2.0 * opt.check_share * schedules[i].bids[t];
        const double capacity = opt.check_share * profiles[i][t];
        if (schedules[i].defect_round == t + 1 || due > capacity + kFeasibilityTol) {
          eliminate(i, r);
          continue;
        }
        r.payments[i] = due;
        cash += due;
      }
      continue;
    }

    // Allocation half.
    for (std::size_t i = 0; i < k; ++i) {
      if (!st.eliminated[i]) r.allocations[i] = r.rates[i] / 2.0;
    }

    // Auction half.
    std::vector<std::size_t> winners;
    double top = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (st.eliminated[i]) continue;
      const double b = schedules[i].bids[t];
      if (winners.empty() || b > top) {
        winners.assign(1, i);
        top = b;
      } else if (b == top) {
        winners.push_back(i);
      }
    }

    std::vector<double> due(k, 0.0);
    bool hits_cap = false;
    if (!winners.empty()) {
      const double n = static_cast<double>(winners.size());
      for (std::size_t i : winners) r.allocations[i] += 0.5 / n;
      r.winners = winners;
      r.winning_bid = top;

      // Winners that cannot cover the amount requested of them drop out and
      // the clipping is recomputed over those left.
      std::vector<std::size_t> payers = winners;
      for (bool changed = true; changed;) {
        changed = false;
        std::fill(due.begin(), due.end(), 0.0);
        for (std::size_t i : payers) due[i] = top / n;
        hits_cap = false;
        if (!capped) {
          double owed = 0.0;
          for (std::size_t i : payers) owed += due[i];
          const double room = std::max(cap_total - st.share_total(), 0.0);
          if (owed > 0.0 && owed >= room) {
            hits_cap = true;
            const double scale = room / owed;
            for (std::size_t i : payers) due[i] *= scale;
          }
        } else if (!opt.refund_post_cap) {
          for (std::size_t i : payers) due[i] = 0.0;
        }
        for (auto it = payers.begin(); it != payers.end(); ++it) {
          const std::size_t i = *it;
          const double capacity = r.allocations[i] * profiles[i][t];
          if (schedules[i].defect_round == t + 1 || due[i] > capacity + kFeasibilityTol) {
            eliminate(i, r);
            due[i] = 0.0;
            payers.erase(it);
            changed = true;
            break;
          }
        }
      }
      for (std::size_t i : payers) {
        r.payments[i] = due[i];
        cash += due[i];
        if (!capped) {
          st.x_paid[i] += due[i];
        } else {
          st.post_cap_payments[i] += due[i];
        }
      }
      if (hits_cap) st.cap_hit_round = t + 1;
    }

    // Walk-aways that were not asked to pay this round.
    for (std::size_t i = 0; i < k; ++i) {
      if (!st.eliminated[i] && schedules[i].defect_round == t + 1) eliminate(i, r);
    }
  }

  tr.cap_hit_round = st.cap_hit_round;
  tr.eliminated = st.eliminated;
  tr.post_cap_payments = st.post_cap_payments;
  for (std::size_t i = 0; i < k; ++i) {
    if (st.eliminated[i]) continue;
    tr.reimbursements[i] = st.post_cap_payments[i] + g;
    cash -= tr.reimbursements[i];
  }
  tr.ledger_revenue = cash;
  return tr;
}

}  // namespace

Transcript run_k_fpa(const TypeProfile& profiles, double v_star,
                     std::span<const BidSchedule> schedules, double g) {
  if (!(v_star > 0.0)) throw InvalidInput("v_star must be positive");
  validate_schedules(profiles, schedules);
  FpaOptions opt;
  opt.mechanism_id = "k_fpa";
  opt.v_star = v_star;
  opt.v_bound = v_star;
  return run_fpa_engine(profiles, schedules, g, opt);
}

double SolicitationConfig::epsilon_for(std::size_t bidders, std::size_t rounds) const {
  return epsilon_share.value_or(1.0 / (2.0 * static_cast<double>(bidders * rounds)));
}

Transcript run_k_fpa_spot_check(const TypeProfile& profiles, double v_star,
                                std::span<const BidSchedule> schedules,
                                const SolicitationConfig& config, double g, std::uint64_t seed) {
  if (!(v_star > 0.0)) throw InvalidInput("v_star must be positive");
  validate_schedules(profiles, schedules);
  const std::size_t k = profiles.bidders();
  const double eps = config.epsilon_for(k, profiles.rounds());
  if (!(eps > 0.0) || eps * static_cast<double>(k) > 1.0) {
    throw InvalidInput("check share must be positive with k * epsilon <= 1");
  }
  FpaOptions opt;
  opt.mechanism_id = "k_fpa_spot_check";
  opt.v_star = v_star;
  opt.v_bound = 0.5 * v_star;
  opt.initial_credit = 1.0;
  if (10.0 * static_cast<double>(k) / opt.v_bound > 1.0) {
    throw InvalidInput("v_star too small for unit starting shares (needs v_star >= 20 k)");
  }
  opt.refund_post_cap = false;
  opt.check_probability = 0.5;
  opt.check_share = eps;
  opt.seed = seed;
  return run_fpa_engine(profiles, schedules, g, opt);
}

namespace {

// Report audit: every bidder gets eps of the item each round. A bidder who
// can afford eps * report front-loads toward it; otherwise paying earns
// nothing, so they pay nothing.
Transcript run_audit_branch(const TypeProfile& profiles, std::span<const double> reports,
                            const SolicitationConfig& config) {
  const std::size_t k = profiles.bidders();
  const double eps = config.epsilon_for(k, profiles.rounds());
  if (!(eps > 0.0) || eps * static_cast<double>(k * profiles.rounds()) > 1.0 + 1e-12) {
    throw InvalidInput("audit share must satisfy epsilon * k * T <= 1");
  }
  Transcript tr = blank_transcript("solicit", config.seed, k, profiles.rounds());
  tr.audit_branch = true;
  double cash = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double target = eps * reports[i];
    const bool affordable = reports[i] <= profiles[i].total() + kFeasibilityTol;
    double paid = 0.0;
    for (std::size_t t = 0; t < profiles.rounds(); ++t) {
      auto& r = tr.rounds[t];
      r.allocations[i] = eps;
      if (!affordable) continue;
      const double pay = std::clamp(target - paid, 0.0, eps * profiles[i][t]);
      r.payments[i] = pay;
      paid += pay;
      cash += pay;
    }
    if (affordable && paid >= target - kFeasibilityTol) {
      tr.reimbursements[i] = config.bonus_multiplier * target;
      cash -= tr.reimbursements[i];
    }
  }
  tr.ledger_revenue = cash;
  return tr;
}

}  // namespace

Transcript solicit_and_run(const TypeProfile& profiles, std::span<const double> reports,
                           const SolicitationConfig& config, double g,
                           std::span<const BidSchedule> schedules) {
  const std::size_t k = profiles.bidders();
  if (k < 2) throw InvalidInput("solicitation needs at least two bidders");
  if (reports.size() != k) throw InvalidInput("need one report per bidder");
  if (!(config.audit_probability > 0.0 && config.audit_probability < 1.0)) {
    throw InvalidInput("audit probability must lie in (0, 1)");
  }
  if (!schedules.empty()) validate_schedules(profiles, schedules);

  Rng rng(config.seed);
  if (rng.coin(config.audit_probability)) return run_audit_branch(profiles, reports, config);

  std::vector<std::size_t> s_price;
  std::vector<std::size_t> s_play;
  for (std::size_t i = 0; i < k; ++i) (rng.coin(0.5) ? s_price : s_play).push_back(i);

  Transcript tr = blank_transcript("solicit", config.seed, k, profiles.rounds());
  tr.s_price = s_price;
  tr.s_play = s_play;
  if (s_price.empty() || s_play.empty()) return tr;

  double v_star = 0.0;
  for (std::size_t i : s_price) v_star = std::max(v_star, reports[i]);
  tr.v_star = v_star;
  if (!(v_star > 0.0)) return tr;

  std::vector<ValueProfile> players;
  std::vector<BidSchedule> player_bids;
  for (std::size_t i : s_play) {
    players.push_back(profiles[i]);
    player_bids.push_back(schedules.empty() ? prescribed_bids(profiles[i]) : schedules[i]);
  }
  const Transcript sub = run_k_fpa(TypeProfile(std::move(players)), v_star, player_bids, g);

  for (std::size_t t = 0; t < profiles.rounds(); ++t) {
    const RoundRecord& from = sub.rounds[t];
    RoundRecord& to = tr.rounds[t];
    for (std::size_t j = 0; j < s_play.size(); ++j) {
      const std::size_t i = s_play[j];
      to.allocations[i] = from.allocations[j];
      to.payments[i] = from.payments[j];
      to.eliminated_this_round[i] = from.eliminated_this_round[j];
      to.state[i] = from.state[j];
      to.rates[i] = from.rates[j];
    }
    for (std::size_t j : from.winners) to.winners.push_back(s_play[j]);
    to.winning_bid = from.winning_bid;
  }
  tr.post_cap_payments.assign(k, 0.0);
  for (std::size_t j = 0; j < s_play.size(); ++j) {
    const std::size_t i = s_play[j];
    tr.reimbursements[i] = sub.reimbursements[j];
    tr.eliminated[i] = sub.eliminated[j];
    tr.post_cap_payments[i] = sub.post_cap_payments[j];
  }
  tr.cap_hit_round = sub.cap_hit_round;
  tr.completion_bonus = g;
  tr.ledger_revenue = sub.ledger_revenue;
  return tr;
}

}  // namespace dynauction
