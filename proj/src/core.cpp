#include "dynauction/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "dynauction/rng.hpp"

namespace dynauction {

ValueProfile::ValueProfile(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidInput("value profile needs at least one round");
  for (std::size_t t = 0; t < values_.size(); ++t) {
    const double v = values_[t];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidInput("value " + std::to_string(v) + " at round " + std::to_string(t + 1) +
                         " outside [0, 1]");
    }
  }
  total_ = std::accumulate(values_.begin(), values_.end(), 0.0);
}

double ValueProfile::cumulative(std::size_t t) const {
  t = std::min(t, values_.size());
  return std::accumulate(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(t), 0.0);
}

TypeProfile::TypeProfile(std::vector<ValueProfile> bidders) : bidders_(std::move(bidders)) {
  if (bidders_.empty()) throw InvalidInput("type profile needs at least one bidder");
  for (const auto& b : bidders_) {
    if (b.rounds() != bidders_.front().rounds()) {
      throw InvalidInput("all bidders must share the same number of rounds");
    }
  }
}

std::vector<double> TypeProfile::totals() const {
  std::vector<double> out;
  out.reserve(bidders_.size());
  for (const auto& b : bidders_) out.push_back(b.total());
  return out;
}

double Transcript::total_payment(std::size_t bidder) const {
  double sum = 0.0;
  for (const auto& r : rounds) sum += r.payments[bidder];
  return sum;
}

double Transcript::total_payments() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < bidders; ++i) sum += total_payment(i);
  return sum;
}

double Transcript::total_reimbursements() const {
  return std::accumulate(reimbursements.begin(), reimbursements.end(), 0.0);
}

double Transcript::revenue() const { return total_payments() - total_reimbursements(); }

Transcript blank_transcript(std::string mechanism_id, std::uint64_t seed, std::size_t bidders,
                            std::size_t rounds) {
  Transcript tr;
  tr.mechanism_id = std::move(mechanism_id);
  tr.seed = seed;
  tr.bidders = bidders;
  tr.reimbursements.assign(bidders, 0.0);
  tr.eliminated.assign(bidders, false);
  tr.rounds.resize(rounds);
  for (std::size_t t = 0; t < rounds; ++t) {
    auto& r = tr.rounds[t];
    r.round = t + 1;
    r.allocations.assign(bidders, 0.0);
    r.payments.assign(bidders, 0.0);
    r.eliminated_this_round.assign(bidders, false);
    r.state.assign(bidders, 0.0);
    r.rates.assign(bidders, 0.0);
  }
  return tr;
}

Outcome make_outcome(const Transcript& transcript, const TypeProfile& profile) {
  if (transcript.bidders != profile.bidders() || transcript.rounds.size() != profile.rounds()) {
    throw InvalidInput("transcript and profile shapes differ");
  }
  Outcome out;
  const std::size_t k = profile.bidders();
  out.per_bidder_welfare.assign(k, 0.0);
  out.per_bidder_payments.assign(k, 0.0);
  out.per_bidder_utility.assign(k, 0.0);
  for (const auto& r : transcript.rounds) {
    for (std::size_t i = 0; i < k; ++i) {
      out.per_bidder_welfare[i] += r.allocations[i] * profile[i][r.round - 1];
      out.per_bidder_payments[i] += r.payments[i];
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    out.per_bidder_utility[i] =
        out.per_bidder_welfare[i] - out.per_bidder_payments[i] + transcript.reimbursements[i];
  }
  out.revenue = transcript.revenue();
  if (k >= 2) {
    out.rev_stb = rev_stb(profile);
    out.rev_spa = rev_spa(profile);
  } else {
    out.rev_stb = out.rev_spa = profile[0].total();
  }
  if (out.rev_stb > 0.0) out.competitive_ratio = out.revenue / out.rev_stb;
  return out;
}

namespace {

double second_largest(std::vector<double> xs) {
  std::nth_element(xs.begin(), xs.begin() + 1, xs.end(), std::greater<>());
  return xs[1];
}

}  // namespace

double rev_stb(const TypeProfile& profile) {
  if (profile.bidders() < 2) throw InvalidInput("rev_stb needs at least two bidders");
  return second_largest(profile.totals());
}

double rev_spa(const TypeProfile& profile) {
  if (profile.bidders() < 2) throw InvalidInput("rev_spa needs at least two bidders");
  double sum = 0.0;
  std::vector<double> column(profile.bidders());
  for (std::size_t t = 0; t < profile.rounds(); ++t) {
    for (std::size_t i = 0; i < profile.bidders(); ++i) column[i] = profile[i][t];
    sum += second_largest(column);
  }
  return sum;
}

std::string to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::kConstant: return "constant";
    case ProfileKind::kFrontLoaded: return "front_loaded";
    case ProfileKind::kBackLoaded: return "back_loaded";
    case ProfileKind::kSpike: return "spike";
    case ProfileKind::kUniformRandom: return "uniform_random";
  }
  return "unknown";
}

ProfileKind profile_kind_from_string(const std::string& name) {
  for (auto kind : {ProfileKind::kConstant, ProfileKind::kFrontLoaded, ProfileKind::kBackLoaded,
                    ProfileKind::kSpike, ProfileKind::kUniformRandom}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidInput("unknown profile kind '" + name + "'");
}

namespace {

void check_level(double level) {
  if (!(level >= 0.0 && level <= 1.0)) throw InvalidInput("level must lie in [0, 1]");
}

// Draws i.i.d. uniforms, rescales them to the requested total and pushes any
// excess above 1 onto the unclamped entries until everything fits.
std::vector<double> uniform_with_total(std::size_t rounds, double total, Rng& rng) {
  if (!(total >= 0.0 && total <= static_cast<double>(rounds))) {
    throw InvalidInput("uniform_random total must lie in [0, T]");
  }
  std::vector<double> v(rounds);
  for (auto& x : v) x = rng.uniform();
  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  if (sum <= 0.0) {
    std::fill(v.begin(), v.end(), total / static_cast<double>(rounds));
    return v;
  }
  for (auto& x : v) x *= total / sum;

  std::vector<bool> clamped(rounds, false);
  for (std::size_t pass = 0; pass <= rounds; ++pass) {
    double overflow = 0.0;
    for (std::size_t t = 0; t < rounds; ++t) {
      if (v[t] > 1.0) {
        overflow += v[t] - 1.0;
        v[t] = 1.0;
        clamped[t] = true;
      }
    }
    if (overflow <= 0.0) break;
    const auto free_slots =
        static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), false));
    if (free_slots == 0) break;
    const double share = overflow / static_cast<double>(free_slots);
    for (std::size_t t = 0; t < rounds; ++t) {
      if (!clamped[t]) v[t] += share;
    }
  }
  for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
  return v;
}

}  // namespace

ValueProfile spike(const ValueProfile& base, std::size_t cut_round, std::size_t width) {
  const std::size_t rounds = base.rounds();
  if (cut_round < 1 || cut_round > rounds) throw InvalidInput("spike cut round outside [1, T]");
  if (width < 1) throw InvalidInput("spike window width must be >= 1");

  std::vector<double> v(base.values().begin(), base.values().end());
  double remaining = 0.0;
  for (std::size_t t = cut_round; t < rounds; ++t) remaining += v[t];
  std::fill(v.begin() + static_cast<std::ptrdiff_t>(cut_round), v.end(), 0.0);
  if (remaining <= 0.0) return ValueProfile(std::move(v));

  if (cut_round + width > rounds) throw InvalidInput("spike window runs past the last round");
  const double per_round = remaining / static_cast<double>(width);
  if (per_round > 1.0 + 1e-12) {
    throw InvalidInput("spike window needs " + std::to_string(per_round) +
                       " value per round, above the bound of 1");
  }
  for (std::size_t t = cut_round; t < cut_round + width; ++t) v[t] = std::min(per_round, 1.0);
  return ValueProfile(std::move(v));
}

ValueProfile gen_profile(ProfileKind kind, const ProfileParams& params, std::size_t rounds,
                         std::uint64_t seed) {
  if (rounds < 1) throw InvalidInput("profile needs T >= 1");
  const std::size_t half = rounds / 2;
  switch (kind) {
    case ProfileKind::kConstant:
      check_level(params.level);
      return ValueProfile(std::vector<double>(rounds, params.level));
    case ProfileKind::kFrontLoaded: {
      check_level(params.level);
      const std::size_t n = std::min(params.count.value_or(half), rounds);
      std::vector<double> v(rounds, 0.0);
      std::fill_n(v.begin(), n, params.level);
      return ValueProfile(std::move(v));
    }
    case ProfileKind::kBackLoaded: {
      check_level(params.level);
      const std::size_t zeros = std::min(params.count.value_or(half), rounds);
      std::vector<double> v(rounds, params.level);
      std::fill_n(v.begin(), zeros, 0.0);
      return ValueProfile(std::move(v));
    }
    case ProfileKind::kUniformRandom: {
      Rng rng(seed);
      const double total = params.total.value_or(static_cast<double>(rounds) / 2.0);
      return ValueProfile(uniform_with_total(rounds, total, rng));
    }
    case ProfileKind::kSpike: {
      if (params.base == ProfileKind::kSpike) throw InvalidInput("spike base cannot be a spike");
      const ValueProfile base = gen_profile(params.base, params, rounds, seed);
      return spike(base, params.cut_round, params.width);
    }
  }
  throw InvalidInput("unhandled profile kind");
}

}  // namespace dynauction
