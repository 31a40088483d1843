#include "dynauction/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "dynauction/multi_bidder.hpp"

namespace dynauction {

namespace {

void note(AuditReport& rep, std::size_t round, std::size_t bidder, std::string kind, double amount) {
  rep.notes.push_back({round, bidder, std::move(kind), amount});
}

bool survives(const Transcript& tr, std::size_t i) {
  if (tr.eliminated.size() > i && tr.eliminated[i]) return false;
  if (tr.s_play.empty()) return true;
  return std::find(tr.s_play.begin(), tr.s_play.end(), i) != tr.s_play.end();
}

void audit_first_price(const Transcript& tr, AuditReport& rep, double tol) {
  const std::size_t k = tr.bidders;
  const double g = *tr.completion_bonus;

  std::vector<double> post_cap(k, 0.0);
  if (tr.cap_hit_round) {
    for (const auto& r : tr.rounds) {
      if (r.round <= *tr.cap_hit_round || r.is_check_round) continue;
      for (std::size_t i = 0; i < k; ++i) post_cap[i] += r.payments[i];
    }
  }
  double expected = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!survives(tr, i)) continue;
    expected += post_cap[i] + g;
    if (std::abs(tr.reimbursements[i] - (post_cap[i] + g)) > tol) {
      rep.accounting_ok = false;
      note(rep, 0, i, "refund_mismatch", tr.reimbursements[i] - (post_cap[i] + g));
    }
  }
  if (std::abs(tr.total_reimbursements() - expected) > tol) {
    rep.accounting_ok = false;
    note(rep, 0, 0, "refund_total_mismatch", tr.total_reimbursements() - expected);
  }

  for (const auto& r : tr.rounds) {
    const double shares = std::accumulate(r.rates.begin(), r.rates.end(), 0.0);
    if (shares > 1.0 + kFeasibilityTol) {
      rep.feasibility_ok = false;
      note(rep, r.round, 0, "share_cap_exceeded", shares - 1.0);
    }
  }

  if (tr.cap_hit_round && *tr.cap_hit_round < tr.rounds.size()) {
    const auto& frozen = tr.rounds[*tr.cap_hit_round].state;
    for (std::size_t t = *tr.cap_hit_round; t < tr.rounds.size(); ++t) {
      for (std::size_t i = 0; i < k; ++i) {
        if (tr.rounds[t].state[i] != frozen[i]) {
          rep.accounting_ok = false;
          note(rep, t + 1, i, "share_moved_after_cap", tr.rounds[t].state[i] - frozen[i]);
        }
      }
    }
  }
}

}  // namespace

AuditReport audit_transcript(const Transcript& tr, const TypeProfile& profiles) {
  if (tr.bidders != profiles.bidders() || tr.rounds.size() != profiles.rounds()) {
    throw InvalidInput("transcript and profile shapes differ");
  }
  AuditReport rep;
  const std::size_t k = tr.bidders;
  const double ledger_tol = kFeasibilityTol * static_cast<double>(std::max<std::size_t>(1, tr.rounds.size()));

  std::vector<bool> gone(k, false);
  for (const auto& r : tr.rounds) {
    if (r.allocations.size() != k || r.payments.size() != k) {
      throw InvalidInput("round record width differs from bidder count");
    }
    double total_alloc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double a = r.allocations[i];
      const double x = r.payments[i];
      total_alloc += a;
      if (a < -kFeasibilityTol || a > 1.0 + kFeasibilityTol) {
        rep.feasibility_ok = false;
        note(rep, r.round, i, "allocation_out_of_range", a);
      }
      if (x < -kFeasibilityTol) {
        rep.accounting_ok = false;
        note(rep, r.round, i, "negative_payment", x);
      }
      if (gone[i] && (a > 0.0 || x > 0.0)) {
        rep.feasibility_ok = false;
        note(rep, r.round, i, "served_after_elimination", a);
      }
      const double violation = x - a * profiles[i][r.round - 1];
      if (violation > 0.0) rep.max_liability_violation = std::max(rep.max_liability_violation, violation);
      if (violation > kFeasibilityTol) note(rep, r.round, i, "liability", violation);
      if (!r.eliminated_this_round.empty() && r.eliminated_this_round[i]) gone[i] = true;
    }
    if (total_alloc > 1.0 + kFeasibilityTol) {
      rep.feasibility_ok = false;
      note(rep, r.round, 0, "over_allocated", total_alloc - 1.0);
    }
  }
  rep.liability_ok = rep.max_liability_violation <= kFeasibilityTol;

  for (std::size_t i = 0; i < k; ++i) {
    if (tr.reimbursements[i] < 0.0) {
      rep.accounting_ok = false;
      note(rep, 0, i, "negative_reimbursement", tr.reimbursements[i]);
    }
    if (gone[i] && tr.reimbursements[i] > 0.0) {
      rep.accounting_ok = false;
      note(rep, 0, i, "reimbursed_after_elimination", tr.reimbursements[i]);
    }
  }

  const double recomputed = tr.revenue();
  if (std::abs(recomputed - tr.ledger_revenue) > ledger_tol) {
    rep.accounting_ok = false;
    note(rep, 0, 0, "revenue_identity", recomputed - tr.ledger_revenue);
  }

  if (tr.completion_bonus && !tr.audit_branch) audit_first_price(tr, rep, ledger_tol);
  return rep;
}

DeviationMechanism DeviationMechanism::pay_to_play(PayToPlayConfig config) {
  DeviationMechanism m;
  m.kind = Kind::kPayToPlay;
  m.config = std::move(config);
  return m;
}

DeviationMechanism DeviationMechanism::two_bidder(const RateFunction& rho) {
  DeviationMechanism m;
  m.kind = Kind::kTwoBidder;
  m.config = PayToPlayConfig::make(rho, 1.0);
  return m;
}

DeviationMechanism DeviationMechanism::split_k(const RateFunction& rho) {
  DeviationMechanism m;
  m.kind = Kind::kSplitK;
  m.config = PayToPlayConfig::make(rho, 1.0);
  return m;
}

namespace {

std::size_t grid_points(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw InvalidInput("grid step must lie in (0, 1]");
  const double n = std::round(1.0 / step);
  if (std::abs(n * step - 1.0) > 1e-9) throw InvalidInput("grid step must divide 1");
  return static_cast<std::size_t>(n) + 1;
}

double slice_utility(std::span<const double> values, const SliceRun& run) {
  double u = run.reimbursement;
  for (std::size_t t = 0; t < values.size(); ++t) u += run.allocations[t] * values[t] - run.payments[t];
  return u;
}

}  // namespace

DeviationResult deviation_search(const DeviationMechanism& mechanism,
                                 const ValueProfile& true_profile, double value_grid_step,
                                 const std::optional<TypeProfile>& co_profiles,
                                 std::size_t budget) {
  const std::size_t rounds = true_profile.rounds();
  if (rounds > 8) throw InvalidInput("deviation search supports at most 8 rounds");
  const std::size_t per_round = grid_points(value_grid_step);
  const double bound = std::pow(static_cast<double>(per_round), static_cast<double>(rounds));
  if (bound > static_cast<double>(budget)) {
    std::ostringstream os;
    os << "deviation search needs " << bound << " misreports, above the budget of " << budget;
    throw BudgetExceeded(os.str());
  }

  PayToPlayConfig config = mechanism.config;
  double share = 1.0;
  if (mechanism.kind != DeviationMechanism::Kind::kPayToPlay) {
    if (!co_profiles) throw InvalidInput("multi-bidder deviation search needs the other bidders");
    if (co_profiles->rounds() != rounds) throw InvalidInput("co-profiles must share T");
    if (mechanism.kind == DeviationMechanism::Kind::kTwoBidder && co_profiles->bidders() != 1) {
      throw InvalidInput("two-bidder deviation search takes exactly one opponent");
    }
    const std::size_t k = co_profiles->bidders() + 1;
    share = 1.0 / static_cast<double>(k);
    double top_other = 0.0;
    for (double v : co_profiles->totals()) top_other = std::max(top_other, v);
    config.v_bound = top_other * share;
  }

  const auto values = true_profile.values();
  const auto truthful = run_pay_to_play_slice(values, config, share, BuyerStrategy::front_load_stop());

  DeviationResult res;
  res.truthful_utility = slice_utility(values, truthful);
  res.best_gain = -std::numeric_limits<double>::infinity();

  const auto consider = [&](const std::vector<double>& report) {
    const auto run = run_pay_to_play_slice(report, config, share, BuyerStrategy::front_load_stop());
    ++res.misreports_checked;
    double prefix = 0.0;
    for (std::size_t tau = 0; tau < rounds; ++tau) {
      const double gained = run.allocations[tau] * values[tau];
      // Affordability is only needed up to the round before defection; the
      // payment at tau itself is withheld.
      const double payoff = prefix + gained;
      const double gain = payoff - res.truthful_utility;
      if (gain > res.best_gain) {
        res.best_gain = gain;
        res.best_misreport = report;
        res.best_defection_round = tau + 1;
      }
      if (run.payments[tau] > gained + kFeasibilityTol) break;
      prefix += gained - run.payments[tau];
    }
  };

  std::vector<double> report(rounds, 0.0);
  std::vector<std::size_t> digits(rounds, 0);
  const double step = 1.0 / static_cast<double>(per_round - 1);
  for (;;) {
    for (std::size_t t = 0; t < rounds; ++t) report[t] = static_cast<double>(digits[t]) * step;
    consider(report);
    std::size_t pos = 0;
    while (pos < rounds && ++digits[pos] == per_round) digits[pos++] = 0;
    if (pos == rounds) break;
  }
  consider(std::vector<double>(values.begin(), values.end()));
  return res;
}

DominanceResult schedule_dominance_check(const ValueProfile& profile,
                                         const PayToPlayConfig& config, double payment_grid_step,
                                         double tolerance, std::size_t budget) {
  const std::size_t rounds = profile.rounds();
  if (rounds > 6) throw InvalidInput("schedule enumeration supports at most 6 rounds");
  if (!(payment_grid_step > 0.0)) throw InvalidInput("payment grid step must be positive");
  const auto values = profile.values();
  const double threshold = config.x_opt * config.v_bound - kFeasibilityTol;

  DominanceResult res;
  std::set<long> totals;

  // The rest of the game depends only on (round, units paid so far), so the
  // depth-first search memoizes on that pair; this is still exact.
  std::vector<std::map<long, double>> memo(rounds + 1);
  std::function<double(std::size_t, long)> best = [&](std::size_t t, long units) -> double {
    if (auto it = memo[t].find(units); it != memo[t].end()) return it->second;
    if (++res.states_visited > budget) {
      throw BudgetExceeded("schedule enumeration passed the budget of " + std::to_string(budget) +
                           " states");
    }
    const double paid = static_cast<double>(units) * payment_grid_step;
    double out = 0.0;
    if (t == rounds) {
      totals.insert(units);
      out = -paid + (paid >= threshold ? config.reimbursement : 0.0);
    } else {
      const double rate = config.rho.at(config.v_bound > 0.0 ? paid / config.v_bound : 1.0);
      const double gained = rate * values[t];
      const auto options =
          static_cast<long>(std::floor((gained + kFeasibilityTol) / payment_grid_step));
      out = -std::numeric_limits<double>::infinity();
      for (long c = 0; c <= options; ++c) out = std::max(out, best(t + 1, units + c));
      out += gained;
    }
    memo[t].emplace(units, out);
    return out;
  };
  res.best_schedule_utility = best(0, 0);

  const auto front_load_utility = [&](double target) {
    const auto pays = front_load_payments(values, config, 1.0, target);
    const auto run = run_pay_to_play_slice(values, config, 1.0, BuyerStrategy::custom_schedule(pays));
    return slice_utility(values, run);
  };
  res.best_front_load_utility = front_load_utility(config.x_opt * config.v_bound);
  for (long units : totals) {
    res.best_front_load_utility = std::max(
        res.best_front_load_utility, front_load_utility(static_cast<double>(units) * payment_grid_step));
  }
  for (int j = 0; j <= 100; ++j) {
    res.best_front_load_utility =
        std::max(res.best_front_load_utility, front_load_utility(0.01 * j * config.v_bound));
  }
  res.gap = res.best_schedule_utility - res.best_front_load_utility;
  res.front_load_optimal = res.gap <= tolerance;
  return res;
}

namespace {

// State of the two-bidder first-price mechanism seen by bidder 0.
struct PairState {
  double x0 = 0.0;
  double x1 = 0.0;
  bool capped = false;
  double utility = 0.0;  // welfare - pre-cap payments; post-cap payments net to zero
};

// One round. Bids at most v / 2 are always affordable, so nobody is
// eliminated; post-cap payments are refunded in full and drop out.
PairState step_pair(PairState s, double v0, double b0, double b1, double cap_total, double v_star) {
  double alloc0 = 5.0 * s.x0 / v_star;
  double due0 = 0.0;
  double due1 = 0.0;
  if (b0 > b1) {
    alloc0 += 0.5;
    due0 = b0;
  } else if (b0 == b1) {
    alloc0 += 0.25;
    due0 = due1 = b0 / 2.0;
  } else {
    due1 = b1;
  }
  s.utility += alloc0 * v0;
  if (!s.capped) {
    const double owed = due0 + due1;
    const double room = std::max(cap_total - (s.x0 + s.x1), 0.0);
    if (owed > 0.0 && owed >= room) {
      const double scale = room / owed;
      due0 *= scale;
      due1 *= scale;
      s.capped = true;
    }
    s.x0 += due0;
    s.x1 += due1;
    s.utility -= due0;
  }
  return s;
}

std::vector<double> grid_upto(double max_bid, double step) {
  std::vector<double> out;
  for (long j = 0;; ++j) {
    const double b = static_cast<double>(j) * step;
    if (b > max_bid + 1e-12) break;
    out.push_back(b);
  }
  return out;
}

}  // namespace

double fpa_pair_utility(const ValueProfile& top, const ValueProfile& opponent, double v_star,
                        const std::vector<double>& top_bids, const std::vector<double>& opp_bids) {
  if (top.rounds() != opponent.rounds() || top_bids.size() != top.rounds() ||
      opp_bids.size() != top.rounds()) {
    throw InvalidInput("bid vectors and profiles must share T");
  }
  PairState s;
  for (std::size_t t = 0; t < top.rounds(); ++t) {
    s = step_pair(s, top[t], top_bids[t], opp_bids[t], v_star / 10.0, v_star);
  }
  return s.utility;
}

BidDominanceReport early_bid_dominance_check(const ValueProfile& top, const ValueProfile& opponent,
                                             double v_star, double bid_step,
                                             double opponent_max_bid) {
  const std::size_t rounds = top.rounds();
  if (opponent.rounds() != rounds) throw InvalidInput("profiles must share T");
  if (rounds > 8) throw InvalidInput("bid dominance check supports at most 8 rounds");
  if (!(v_star > 0.0 && bid_step > 0.0)) throw InvalidInput("v_star and bid step must be positive");
  for (std::size_t t = 0; t < rounds; ++t) {
    if (opponent_max_bid > opponent[t] / 2.0 + 1e-12) {
      throw InvalidInput("opponent bids must stay affordable (<= v / 2)");
    }
  }

  std::vector<std::vector<double>> mine(rounds);
  std::vector<std::size_t> radix(rounds);
  std::size_t n_mine = 1;
  for (std::size_t t = 0; t < rounds; ++t) {
    mine[t] = grid_upto(top[t] / 2.0, bid_step);
    radix[t] = n_mine;
    n_mine *= mine[t].size();
  }
  const std::vector<double> theirs = grid_upto(opponent_max_bid, bid_step);
  std::size_t n_theirs = 1;
  for (std::size_t t = 0; t < rounds; ++t) n_theirs *= theirs.size();
  if (static_cast<double>(n_mine) * static_cast<double>(n_theirs) > 5e9) {
    throw BudgetExceeded("bid dominance check would exceed 5e9 simulations");
  }

  // Raising only matters in early rounds with positive value, and only where
  // the grid can express v_t / 2.
  std::vector<std::size_t> early;
  if (auto last = last_early_round(top)) {
    for (std::size_t t = 0; t < *last; ++t) {
      if (top[t] > 0.0 && std::abs(mine[t].back() - top[t] / 2.0) < 1e-12) early.push_back(t);
    }
  }

  const double cap_total = v_star / 10.0;
  const auto utilities_against = [&](const std::vector<double>& opp, std::vector<double>& out) {
    std::function<void(std::size_t, std::size_t, PairState)> dfs = [&](std::size_t t, std::size_t idx,
                                                                       PairState s) {
      if (t == rounds) {
        out[idx] = s.utility;
        return;
      }
      for (std::size_t j = 0; j < mine[t].size(); ++j) {
        dfs(t + 1, idx + j * radix[t], step_pair(s, top[t], mine[t][j], opp[t], cap_total, v_star));
      }
    };
    dfs(0, 0, PairState{});
  };

  // low-bid (vector, round) pairs, flattened as vector * rounds + t
  std::vector<char> strict(n_mine * rounds, 0);
  std::vector<char> strict_zero(n_mine * rounds, 0);

  const unsigned workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::vector<BidDominanceReport> partial(workers);
  std::vector<std::vector<char>> strict_parts(workers, std::vector<char>(n_mine * rounds, 0));

  const auto work = [&](unsigned w) {
    std::vector<double> util(n_mine);
    std::vector<double> opp(rounds);
    for (std::size_t o = w; o < n_theirs; o += workers) {
      std::size_t rest = o;
      for (std::size_t t = 0; t < rounds; ++t) {
        opp[t] = theirs[rest % theirs.size()];
        rest /= theirs.size();
      }
      utilities_against(opp, util);
      auto& rep = partial[w];
      for (std::size_t idx = 0; idx < n_mine; ++idx) {
        for (std::size_t t : early) {
          const std::size_t digit = (idx / radix[t]) % mine[t].size();
          if (digit + 1 == mine[t].size()) continue;
          const std::size_t raised = idx + (mine[t].size() - 1 - digit) * radix[t];
          const double diff = util[raised] - util[idx];
          ++rep.comparisons;
          if (diff < -1e-9) {
            ++rep.violations;
            rep.worst_shortfall = std::max(rep.worst_shortfall, -diff);
          } else if (diff > 1e-9) {
            strict_parts[w][idx * rounds + t] = 1;
            if (o == 0) strict_zero[idx * rounds + t] = 1;
          }
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  for (auto& th : pool) th.join();

  BidDominanceReport rep;
  for (const auto& p : partial) {
    rep.comparisons += p.comparisons;
    rep.violations += p.violations;
    rep.worst_shortfall = std::max(rep.worst_shortfall, p.worst_shortfall);
  }
  std::size_t low = 0;
  std::size_t zero_hits = 0;
  for (std::size_t idx = 0; idx < n_mine; ++idx) {
    for (std::size_t t : early) {
      const std::size_t digit = (idx / radix[t]) % mine[t].size();
      if (digit + 1 == mine[t].size()) continue;
      ++low;
      bool any = false;
      for (const auto& part : strict_parts) any = any || part[idx * rounds + t];
      if (!any) rep.strict_everywhere = false;
      if (strict_zero[idx * rounds + t]) ++zero_hits;
    }
  }
  rep.zero_opponent_strict_share = low == 0 ? 1.0 : static_cast<double>(zero_hits) / static_cast<double>(low);
  return rep;
}

}  // namespace dynauction
