#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynauction/core.hpp"

namespace dynauction {

// Pay-to-play rate: maps the fraction of the value bound paid so far to the
// fraction of the item allocated. Weakly increasing, positive, at most 1.
class RateFunction {
 public:
  enum class Kind { kCanonical, kPerturbed, kLinear, kCustom };

  // e^{ew-1} up to w = 1/e, then 1.
  static RateFunction canonical();
  // canonical(min(w / (1 - epsilon), 1)); strictly maximized objective.
  static RateFunction perturbed(double epsilon);
  // min(intercept + slope * w, 1).
  static RateFunction linear(double intercept, double slope);
  // Piecewise-linear through table[j] at w = j / (n - 1).
  static RateFunction custom(std::vector<double> table);

  Kind kind() const { return kind_; }
  double epsilon() const { return epsilon_; }
  double intercept() const { return intercept_; }
  double slope() const { return slope_; }
  const std::vector<double>& table() const { return table_; }

  // Rate at any payment fraction w >= 0. Fractions above 1 use rho(1), the
  // weakly increasing extension the multi-bidder mechanisms rely on.
  double at(double w) const;

  // Points in (0, 1) where the rate has a kink.
  std::vector<double> breakpoints() const;

  std::string describe() const;

 private:
  RateFunction() = default;

  Kind kind_ = Kind::kCanonical;
  double epsilon_ = 0.0;
  double intercept_ = 0.0;
  double slope_ = 0.0;
  std::vector<double> table_;
};

// rho(w) for w in [0, 1]; throws outside the domain.
double eval_rho(const RateFunction& rho, double w);

// Integral of 1 / rho over [0, x]. Closed form for the canonical rate,
// adaptive Simpson (abs tol 1e-10) split at the kinks otherwise.
double inverse_rate_integral(const RateFunction& rho, double x);

// Continuous-model utility of a buyer with true total v_true who stops
// paying at x_bar * v_bound: rho(x_bar) * (v_true - v_bound * I(x_bar)).
double buyer_objective(const RateFunction& rho, double x_bar, double v_bound, double v_true);

struct XOptSolution {
  double x_opt = 0.0;
  double objective_value = 0.0;
  // True when the maximum is attained on an interval; x_opt is then its
  // right end.
  bool plateau = false;
};

XOptSolution solve_x_opt(const RateFunction& rho);

// Smallest reimbursement for which front-loading to x_opt stays dominant in
// the discrete game: 1 + 2 / rho(0).
double default_reimbursement(const RateFunction& rho);

struct PayToPlayConfig {
  RateFunction rho = RateFunction::canonical();
  double v_bound = 1.0;
  // Paid at the end iff the buyer survived and paid at least x_opt * v_bound.
  double reimbursement = 0.0;
  double x_opt = 0.0;
  // When false, payments above allocation * value are accepted instead of
  // eliminating the buyer.
  bool enforce_liability = true;

  // Solves x_opt for rho; reimbursement defaults to 1 + 2 / rho(0).
  static PayToPlayConfig make(RateFunction rho, double v_bound,
                              std::optional<double> reimbursement = std::nullopt);
};

struct BuyerStrategy {
  enum class Kind { kFrontLoadStop, kCustomSchedule };

  Kind kind = Kind::kFrontLoadStop;
  // Stop once x_bar * v_bound has been paid; nullopt means the config's x_opt.
  std::optional<double> target_fraction;
  std::vector<double> payments;
  // Withhold the payment due at this round (1-based) and leave for good.
  std::optional<std::size_t> defect_round;

  static BuyerStrategy front_load_stop(std::optional<double> x_bar = std::nullopt);
  static BuyerStrategy custom_schedule(std::vector<double> payments);
  // Front-load toward x_opt, then defect at round tau.
  static BuyerStrategy defect_at(std::size_t tau);
};

// Payments of the front-loading buyer: pay allocation * value every round
// until x_bar * v_bound is reached (the last round pays the remainder).
std::vector<double> front_load_schedule(const ValueProfile& profile, const PayToPlayConfig& config,
                                        double x_bar);

// Same, for a target expressed directly in payment units, on a slice that
// receives share * rho of the item. Used by the verifiers and multi-bidder
// mechanisms.
std::vector<double> front_load_payments(std::span<const double> values,
                                        const PayToPlayConfig& config, double share,
                                        double target_payment);

// One buyer playing pay-to-play on a share of the item.
struct SliceRun {
  std::vector<double> allocations;
  std::vector<double> payments;
  std::vector<double> cumulative;  // payment total at the start of each round
  std::vector<double> rates;
  std::optional<std::size_t> eliminated_round;
  double reimbursement = 0.0;
};

SliceRun run_pay_to_play_slice(std::span<const double> values, const PayToPlayConfig& config,
                               double share, const BuyerStrategy& strategy);

Transcript run_pay_to_play(const ValueProfile& profile, const PayToPlayConfig& config,
                           const BuyerStrategy& strategy, std::uint64_t seed = 0);

// alpha_{n+1} = alpha_n ln(1 / alpha_n) + alpha_n - c, stopping after
// max_iter steps or at the first negative term. The result starts with alpha0.
std::vector<double> recursion_iterate(double c, double alpha0, std::size_t max_iter);

}  // namespace dynauction
