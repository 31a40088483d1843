#include "dynauction/single_buyer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dynauction/numeric.hpp"

namespace dynauction {

namespace {

constexpr double kE = std::numbers::e;
constexpr double kInvE = 1.0 / std::numbers::e;

double canonical_rate(double w) { return w >= kInvE ? 1.0 : std::exp(kE * w - 1.0); }

}  // namespace

RateFunction RateFunction::canonical() { return RateFunction(); }

RateFunction RateFunction::perturbed(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInput("perturbation epsilon must be in (0, 1)");
  RateFunction r;
  r.kind_ = Kind::kPerturbed;
  r.epsilon_ = epsilon;
  return r;
}

RateFunction RateFunction::linear(double intercept, double slope) {
  if (!(intercept > 0.0 && intercept <= 1.0)) throw InvalidInput("linear rate needs intercept in (0, 1]");
  if (!(slope >= 0.0)) throw InvalidInput("linear rate needs a non-negative slope");
  RateFunction r;
  r.kind_ = Kind::kLinear;
  r.intercept_ = intercept;
  r.slope_ = slope;
  return r;
}

RateFunction RateFunction::custom(std::vector<double> table) {
  if (table.size() < 2) throw InvalidInput("custom rate table needs at least two points");
  for (std::size_t j = 0; j < table.size(); ++j) {
    if (!(table[j] > 0.0 && table[j] <= 1.0)) throw InvalidInput("custom rate values must lie in (0, 1]");
    if (j > 0 && table[j] < table[j - 1]) throw InvalidInput("custom rate must be weakly increasing");
  }
  RateFunction r;
  r.kind_ = Kind::kCustom;
  r.table_ = std::move(table);
  return r;
}

double RateFunction::at(double w) const {
  w = std::clamp(w, 0.0, 1.0);
  switch (kind_) {
    case Kind::kCanonical: return canonical_rate(w);
    case Kind::kPerturbed: return canonical_rate(std::min(w / (1.0 - epsilon_), 1.0));
    case Kind::kLinear: return std::min(intercept_ + slope_ * w, 1.0);
    case Kind::kCustom: {
      const double pos = w * static_cast<double>(table_.size() - 1);
      const auto j = std::min(static_cast<std::size_t>(pos), table_.size() - 2);
      const double frac = pos - static_cast<double>(j);
      return table_[j] + frac * (table_[j + 1] - table_[j]);
    }
  }
  return 1.0;
}

std::vector<double> RateFunction::breakpoints() const {
  std::vector<double> out;
  switch (kind_) {
    case Kind::kCanonical: out.push_back(kInvE); break;
    case Kind::kPerturbed: out.push_back((1.0 - epsilon_) * kInvE); break;
    case Kind::kLinear:
      if (slope_ > 0.0) {
        const double knee = (1.0 - intercept_) / slope_;
        if (knee > 0.0 && knee < 1.0) out.push_back(knee);
      }
      break;
    case Kind::kCustom:
      for (std::size_t j = 1; j + 1 < table_.size(); ++j) {
        out.push_back(static_cast<double>(j) / static_cast<double>(table_.size() - 1));
      }
      break;
  }
  return out;
}

std::string RateFunction::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::kCanonical: os << "canonical"; break;
    case Kind::kPerturbed: os << "perturbed(" << epsilon_ << ")"; break;
    case Kind::kLinear: os << "linear(" << intercept_ << "," << slope_ << ")"; break;
    case Kind::kCustom: os << "custom(" << table_.size() << ")"; break;
  }
  return os.str();
}

double eval_rho(const RateFunction& rho, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw InvalidInput("rate argument outside [0, 1]");
  return rho.at(w);
}

double inverse_rate_integral(const RateFunction& rho, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidInput("integral limit outside [0, 1]");
  if (rho.kind() == RateFunction::Kind::kCanonical) {
    if (x <= kInvE) return 1.0 - std::exp(-kE * x);
    return (1.0 - kInvE) + (x - kInvE);
  }
  const auto inv = [&rho](double w) { return 1.0 / rho.at(w); };
  double sum = 0.0;
  double lo = 0.0;
  for (double knot : rho.breakpoints()) {
    if (knot >= x) break;
    sum += numeric::adaptive_simpson(inv, lo, knot);
    lo = knot;
  }
  return sum + numeric::adaptive_simpson(inv, lo, x);
}

double buyer_objective(const RateFunction& rho, double x_bar, double v_bound, double v_true) {
  if (!(x_bar >= 0.0 && x_bar <= 1.0)) throw InvalidInput("x_bar outside [0, 1]");
  if (!(v_bound > 0.0)) throw InvalidInput("v_bound must be positive");
  if (v_true < v_bound) throw InvalidInput("v_true must be at least the lower bound v_bound");
  return rho.at(x_bar) * (v_true - v_bound * inverse_rate_integral(rho, x_bar));
}

XOptSolution solve_x_opt(const RateFunction& rho) {
  constexpr std::size_t kCells = 10000;
  constexpr double kPlateauTol = 1e-9;
  const double h = 1.0 / static_cast<double>(kCells);
  const auto objective = [&rho](double x) { return buyer_objective(rho, x, 1.0, 1.0); };

  std::vector<double> values(kCells + 1);
  std::size_t best = 0;
  for (std::size_t j = 0; j <= kCells; ++j) {
    values[j] = objective(static_cast<double>(j) * h);
    if (values[j] > values[best]) best = j;
  }
  const double top = values[best];

  std::size_t first = kCells + 1;
  std::size_t last = 0;
  for (std::size_t j = 0; j <= kCells; ++j) {
    if (values[j] >= top - kPlateauTol) {
      first = std::min(first, j);
      last = std::max(last, j);
    }
  }

  XOptSolution sol;
  if (last - first >= 2) {
    sol.plateau = true;
    if (last == kCells) {
      sol.x_opt = 1.0;
    } else {
      // Right end of the argmax set lies in [x_last, x_last + h]. Detection
      // uses kPlateauTol, but the end is located at rounding level: the
      // reimbursement threshold is x_opt * v_bound, so an overshoot of 1e-9
      // would already cost a buyer with v_bound = 1e4 the reimbursement.
      const double edge_tol = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(top);
      double lo = static_cast<double>(last) * h;
      double hi = std::min(lo + h, 1.0);
      while (hi - lo > 1e-15) {
        const double mid = 0.5 * (lo + hi);
        (objective(mid) >= top - edge_tol ? lo : hi) = mid;
      }
      sol.x_opt = lo;
    }
    sol.objective_value = std::max(top, objective(sol.x_opt));
    return sol;
  }

  const double a = best == 0 ? 0.0 : static_cast<double>(best - 1) * h;
  const double b = best == kCells ? 1.0 : static_cast<double>(best + 1) * h;
  const auto refined = numeric::golden_section_max(objective, a, b, 1e-10);
  if (refined.value >= top) {
    sol.x_opt = refined.x;
    sol.objective_value = refined.value;
  } else {
    sol.x_opt = static_cast<double>(best) * h;
    sol.objective_value = top;
  }
  return sol;
}

double default_reimbursement(const RateFunction& rho) { return 1.0 + 2.0 / rho.at(0.0); }

PayToPlayConfig PayToPlayConfig::make(RateFunction rho, double v_bound,
                                      std::optional<double> reimbursement) {
  if (!(v_bound > 0.0)) throw InvalidInput("v_bound must be positive");
  PayToPlayConfig cfg;
  cfg.x_opt = solve_x_opt(rho).x_opt;
  cfg.reimbursement = reimbursement.value_or(default_reimbursement(rho));
  if (cfg.reimbursement < 0.0) throw InvalidInput("reimbursement must be non-negative");
  cfg.rho = std::move(rho);
  cfg.v_bound = v_bound;
  return cfg;
}

BuyerStrategy BuyerStrategy::front_load_stop(std::optional<double> x_bar) {
  if (x_bar && !(*x_bar >= 0.0 && *x_bar <= 1.0)) throw InvalidInput("x_bar outside [0, 1]");
  BuyerStrategy s;
  s.kind = Kind::kFrontLoadStop;
  s.target_fraction = x_bar;
  return s;
}

BuyerStrategy BuyerStrategy::custom_schedule(std::vector<double> payments) {
  for (double p : payments) {
    if (!(p >= 0.0)) throw InvalidInput("scheduled payments must be non-negative");
  }
  BuyerStrategy s;
  s.kind = Kind::kCustomSchedule;
  s.payments = std::move(payments);
  return s;
}

BuyerStrategy BuyerStrategy::defect_at(std::size_t tau) {
  if (tau < 1) throw InvalidInput("defection round is 1-based");
  BuyerStrategy s = front_load_stop();
  s.defect_round = tau;
  return s;
}

namespace {

double fraction_paid(double paid, double v_bound) { return v_bound > 0.0 ? paid / v_bound : 1.0; }

}  // namespace

std::vector<double> front_load_payments(std::span<const double> values,
                                        const PayToPlayConfig& config, double share,
                                        double target_payment) {
  std::vector<double> out(values.size(), 0.0);
  double paid = 0.0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    const double remaining = target_payment - paid;
    if (remaining <= 0.0) break;
    const double cap = share * config.rho.at(fraction_paid(paid, config.v_bound)) * values[t];
    out[t] = std::min(cap, remaining);
    paid += out[t];
  }
  return out;
}

std::vector<double> front_load_schedule(const ValueProfile& profile, const PayToPlayConfig& config,
                                        double x_bar) {
  if (!(x_bar >= 0.0 && x_bar <= 1.0)) throw InvalidInput("x_bar outside [0, 1]");
  return front_load_payments(profile.values(), config, 1.0, x_bar * config.v_bound);
}

SliceRun run_pay_to_play_slice(std::span<const double> values, const PayToPlayConfig& config,
                               double share, const BuyerStrategy& strategy) {
  const std::size_t rounds = values.size();
  if (strategy.kind == BuyerStrategy::Kind::kCustomSchedule && strategy.payments.size() != rounds) {
    throw InvalidInput("custom schedule length differs from the number of rounds");
  }
  const double target =
      strategy.target_fraction.value_or(config.x_opt) * config.v_bound;

  SliceRun run;
  run.allocations.assign(rounds, 0.0);
  run.payments.assign(rounds, 0.0);
  run.cumulative.assign(rounds, 0.0);
  run.rates.assign(rounds, 0.0);

  double paid = 0.0;
  for (std::size_t t = 0; t < rounds; ++t) {
    run.cumulative[t] = paid;
    if (run.eliminated_round) continue;

    const double rate = config.rho.at(fraction_paid(paid, config.v_bound));
    run.rates[t] = rate;
    run.allocations[t] = share * rate;
    const double cap = run.allocations[t] * values[t];

    double due = 0.0;
    if (strategy.kind == BuyerStrategy::Kind::kFrontLoadStop) {
      due = std::clamp(target - paid, 0.0, cap);
    } else {
      due = strategy.payments[t];
    }

    if (strategy.defect_round == t + 1 ||
        (config.enforce_liability && due > cap + kFeasibilityTol)) {
      run.eliminated_round = t + 1;
      continue;
    }
    run.payments[t] = due;
    paid += due;
  }

  if (!run.eliminated_round && paid >= config.x_opt * config.v_bound - kFeasibilityTol) {
    run.reimbursement = config.reimbursement * share;
  }
  return run;
}

Transcript run_pay_to_play(const ValueProfile& profile, const PayToPlayConfig& config,
                           const BuyerStrategy& strategy, std::uint64_t seed) {
  const SliceRun run = run_pay_to_play_slice(profile.values(), config, 1.0, strategy);
  Transcript tr = blank_transcript("pay_to_play", seed, 1, profile.rounds());
  double cash = 0.0;
  for (std::size_t t = 0; t < profile.rounds(); ++t) {
    auto& r = tr.rounds[t];
    r.allocations[0] = run.allocations[t];
    r.payments[0] = run.payments[t];
    r.state[0] = run.cumulative[t];
    r.rates[0] = run.rates[t];
    r.eliminated_this_round[0] = run.eliminated_round == t + 1;
    cash += run.payments[t];
  }
  tr.eliminated[0] = run.eliminated_round.has_value();
  tr.reimbursements[0] = run.reimbursement;
  tr.ledger_revenue = cash - run.reimbursement;
  return tr;
}

std::vector<double> recursion_iterate(double c, double alpha0, std::size_t max_iter) {
  if (!(c > 0.0 && c < 1.0)) throw InvalidInput("c must lie in (0, 1)");
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw InvalidInput("alpha0 must lie in (0, 1]");
  std::vector<double> seq{alpha0};
  double alpha = alpha0;
  for (std::size_t n = 0; n < max_iter && alpha >= 0.0; ++n) {
    const double f = alpha > 0.0 ? alpha * std::log(1.0 / alpha) + alpha : 0.0;
    alpha = f - c;
    seq.push_back(alpha);
  }
  return seq;
}

}  // namespace dynauction
