#include "dynauction/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "dynauction/multi_bidder.hpp"
#include "dynauction/rng.hpp"
#include "dynauction/single_buyer.hpp"

namespace dynauction {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw InvalidInput(where + ": " + what);
}

ProfileSpec parse_profile(const Json& j, const std::string& where) {
  if (!j.is_object()) bad(where, "profile spec must be an object");
  ProfileSpec p;
  if (j.contains("inline")) {
    p.inline_values = j.at("inline").get<std::vector<double>>();
    if (p.inline_values.empty()) bad(where, "inline profile is empty");
    return p;
  }
  if (!j.contains("kind")) bad(where, "profile spec needs kind or inline");
  try {
    p.kind = profile_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("base")) p.params.base = profile_kind_from_string(j.at("base").get<std::string>());
  } catch (const InvalidInput& e) {
    bad(where, e.what());
  }
  p.params.level = j.value("level", 1.0);
  if (j.contains("count")) p.params.count = j.at("count").get<std::size_t>();
  if (j.contains("total")) p.params.total = j.at("total").get<double>();
  p.params.cut_round = j.value("cut_round", std::size_t{1});
  p.params.width = j.value("width", std::size_t{1});
  return p;
}

StrategySpec parse_strategy(const Json& j, const std::string& where) {
  if (!j.is_object()) bad(where, "strategy spec must be an object");
  static const std::vector<std::string> kinds = {"default",   "front_load_stop", "defect_at",
                                                 "custom_schedule", "prescribed", "scaled", "fixed"};
  StrategySpec s;
  s.kind = j.value("kind", std::string("default"));
  if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end()) bad(where, "unknown strategy " + s.kind);
  if (j.contains("x_bar")) s.x_bar = j.at("x_bar").get<double>();
  if (j.contains("payments")) s.payments = j.at("payments").get<std::vector<double>>();
  s.factor = j.value("factor", 1.0);
  s.bid = j.value("bid", 0.0);
  if (j.contains("first_round")) s.first_round = j.at("first_round").get<std::size_t>();
  if (j.contains("defect_round")) s.defect_round = j.at("defect_round").get<std::size_t>();
  if (s.kind == "defect_at" && !s.defect_round) bad(where, "defect_at needs defect_round");
  return s;
}

SweepSpec parse_sweep(const Json& j, const std::string& where) {
  static const std::vector<std::string> names = {"x_bar", "T", "v_bound", "v_star", "epsilon"};
  SweepSpec s;
  s.param = j.value("param", std::string{});
  if (std::find(names.begin(), names.end(), s.param) == names.end()) bad(where, "unknown sweep param '" + s.param + "'");
  if (j.contains("values")) {
    s.values = j.at("values").get<std::vector<double>>();
  } else {
    const double from = j.at("from").get<double>();
    const double to = j.at("to").get<double>();
    const double step = j.at("step").get<double>();
    if (!(step > 0.0) || to < from) bad(where, "sweep range needs from <= to and step > 0");
    const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) s.values.push_back(from + static_cast<double>(i) * step);
  }
  if (s.values.empty()) bad(where, "sweep has no points");
  return s;
}

std::size_t expected_bidders(const std::string& mechanism, std::size_t given) {
  if (mechanism == "pay_to_play") return 1;
  if (mechanism == "two_bidder") return 2;
  return given;
}

}  // namespace

ExperimentConfig parse_config(const Json& j) {
  if (!j.is_object()) throw InvalidInput("config must be a JSON object");
  ExperimentConfig cfg;
  const Json& out = j.contains("output") ? j.at("output") : Json::object();
  cfg.format = out.value("format", std::string("csv"));
  if (cfg.format != "csv" && cfg.format != "json") bad("output.format", "must be csv or json");
  if (out.contains("path")) cfg.output_path = out.at("path").get<std::string>();

  std::map<std::string, int> seen;
  for (const auto& e : j.value("experiments", Json::array())) {
    ExperimentSpec spec;
    spec.id = e.value("id", std::string{});
    const std::string where = "experiment '" + spec.id + "'";
    if (spec.id.empty()) bad("experiment", "missing id");
    if (seen[spec.id]++) bad(where, "duplicate id");
    spec.mechanism = e.value("mechanism", std::string{});
    if (std::find(kMechanismIds.begin(), kMechanismIds.end(), spec.mechanism) == kMechanismIds.end()) {
      bad(where, "unknown mechanism '" + spec.mechanism + "'");
    }
    spec.rounds = e.value("T", std::size_t{0});
    for (const auto& p : e.value("profiles", Json::array())) spec.profiles.push_back(parse_profile(p, where));
    if (spec.profiles.empty()) bad(where, "needs at least one profile");
    if (spec.profiles.size() != expected_bidders(spec.mechanism, spec.profiles.size())) {
      bad(where, spec.mechanism + " takes " +
                     std::to_string(expected_bidders(spec.mechanism, 0)) + " profile(s)");
    }
    if (spec.mechanism != "pay_to_play" && spec.profiles.size() < 2) bad(where, "needs at least two bidders");
    for (const auto& s : e.value("strategies", Json::array())) spec.strategies.push_back(parse_strategy(s, where));
    if (!spec.strategies.empty() && spec.strategies.size() != spec.profiles.size()) {
      bad(where, "strategies must be empty or one per bidder");
    }
    spec.seeds = e.value("seeds", std::vector<std::uint64_t>{});
    if (spec.seeds.empty()) bad(where, "seeds must be non-empty");
    spec.params = e.value("params", Json::object());
    if (e.contains("sweep")) spec.sweep = parse_sweep(e.at("sweep"), where);
    const bool sweeps_t = spec.sweep && spec.sweep->param == "T";
    if (spec.rounds == 0 && !sweeps_t) {
      const auto inl = std::find_if(spec.profiles.begin(), spec.profiles.end(),
                                    [](const ProfileSpec& p) { return !p.kind; });
      if (inl == spec.profiles.end()) bad(where, "T must be positive");
      spec.rounds = inl->inline_values.size();
    }
    cfg.experiments.push_back(std::move(spec));
  }
  return cfg;
}

namespace {

RateFunction parse_rho(const Json& params, std::optional<double> epsilon) {
  if (epsilon) return RateFunction::perturbed(*epsilon);
  if (!params.contains("rho")) return RateFunction::canonical();
  const Json& r = params.at("rho");
  const std::string kind = r.value("kind", std::string("canonical"));
  if (kind == "canonical") return RateFunction::canonical();
  if (kind == "perturbed") return RateFunction::perturbed(r.at("epsilon").get<double>());
  if (kind == "linear") return RateFunction::linear(r.at("intercept").get<double>(), r.at("slope").get<double>());
  if (kind == "custom") return RateFunction::custom(r.at("table").get<std::vector<double>>());
  throw InvalidInput("unknown rate kind '" + kind + "'");
}

BuyerStrategy to_buyer_strategy(const StrategySpec* s, std::optional<double> swept_x_bar) {
  if (swept_x_bar) return BuyerStrategy::front_load_stop(*swept_x_bar);
  if (!s) return BuyerStrategy::front_load_stop();
  BuyerStrategy out;
  if (s->kind == "custom_schedule") {
    out = BuyerStrategy::custom_schedule(s->payments);
  } else if (s->kind == "default" || s->kind == "front_load_stop" || s->kind == "defect_at") {
    out = BuyerStrategy::front_load_stop(s->x_bar);
  } else {
    throw InvalidInput("strategy '" + s->kind + "' does not apply to pay-to-play mechanisms");
  }
  out.defect_round = s->defect_round;
  return out;
}

BidSchedule to_bid_schedule(const StrategySpec* s, const ValueProfile& v) {
  BidSchedule out = prescribed_bids(v);
  if (!s) return out;
  if (s->kind == "scaled") {
    for (double& b : out.bids) b *= s->factor;
  } else if (s->kind == "fixed") {
    for (std::size_t t = s->first_round.value_or(1) - 1; t < out.bids.size(); ++t) out.bids[t] = s->bid;
  } else if (s->kind != "default" && s->kind != "prescribed" && s->kind != "defect_at") {
    throw InvalidInput("strategy '" + s->kind + "' does not apply to first-price mechanisms");
  }
  out.defect_round = s->defect_round;
  return out;
}

std::vector<double> reports_for(const Json& params, const TypeProfile& profile) {
  if (params.contains("reports")) {
    auto r = params.at("reports").get<std::vector<double>>();
    if (r.size() != profile.bidders()) throw InvalidInput("need one report per bidder");
    return r;
  }
  return profile.totals();
}

template <typename T>
std::optional<T> opt_param(const Json& params, const char* name) {
  if (!params.contains(name) || params.at(name).is_null()) return std::nullopt;
  return params.at(name).get<T>();
}

}  // namespace

RunResult run_single(const ExperimentSpec& spec, std::size_t experiment_index, std::uint64_t seed,
                     std::size_t point) {
  const std::optional<double> swept =
      spec.sweep ? std::optional<double>(spec.sweep->values.at(point)) : std::nullopt;
  const std::string sweep_name = spec.sweep ? spec.sweep->param : std::string{};
  const auto swept_as = [&](const char* name) {
    return sweep_name == name ? swept : std::nullopt;
  };

  std::size_t rounds = spec.rounds;
  if (auto t = swept_as("T")) {
    if (!(*t >= 1.0) || *t != std::floor(*t)) throw InvalidInput("swept T must be a positive integer");
    rounds = static_cast<std::size_t>(*t);
  }

  const Rng base(seed);
  std::vector<ValueProfile> rows;
  for (std::size_t i = 0; i < spec.profiles.size(); ++i) {
    const auto& p = spec.profiles[i];
    if (!p.kind) {
      if (p.inline_values.size() != rounds) throw InvalidInput("inline profile length differs from T");
      rows.emplace_back(p.inline_values);
    } else {
      rows.push_back(gen_profile(*p.kind, p.params, rounds, base.split(i).next()));
    }
  }
  TypeProfile profile(std::move(rows));
  const std::size_t k = profile.bidders();
  const Json& params = spec.params;
  const auto strategy_of = [&](std::size_t i) -> const StrategySpec* {
    return spec.strategies.empty() ? nullptr : &spec.strategies[i];
  };
  const double g = opt_param<double>(params, "g").value_or(2.0);

  Transcript tr;
  if (spec.mechanism == "pay_to_play" || spec.mechanism == "two_bidder" || spec.mechanism == "split_k") {
    const RateFunction rho = parse_rho(params, swept_as("epsilon"));
    const auto reimbursement = opt_param<double>(params, "reimbursement");
    std::vector<BuyerStrategy> strategies;
    for (std::size_t i = 0; i < k; ++i) strategies.push_back(to_buyer_strategy(strategy_of(i), swept_as("x_bar")));
    if (spec.mechanism == "pay_to_play") {
      const double v_bound = swept_as("v_bound").value_or(
          opt_param<double>(params, "v_bound").value_or(std::max(profile[0].total(), 1.0)));
      PayToPlayConfig cfg = PayToPlayConfig::make(rho, v_bound, reimbursement);
      cfg.enforce_liability = params.value("enforce_liability", true);
      tr = run_pay_to_play(profile[0], cfg, strategies[0], seed);
    } else {
      const auto reports = reports_for(params, profile);
      tr = spec.mechanism == "two_bidder"
               ? run_two_bidder(profile[0], profile[1], {reports[0], reports[1]},
                                {strategies[0], strategies[1]}, rho, reimbursement)
               : run_split_k(profile, reports, strategies, rho, reimbursement);
    }
  } else {
    std::vector<BidSchedule> schedules;
    for (std::size_t i = 0; i < k; ++i) schedules.push_back(to_bid_schedule(strategy_of(i), profile[i]));
    SolicitationConfig sc;
    sc.seed = seed;
    sc.audit_probability = params.value("audit_probability", sc.audit_probability);
    sc.bonus_multiplier = params.value("bonus_multiplier", sc.bonus_multiplier);
    sc.epsilon_share = swept_as("epsilon");
    if (!sc.epsilon_share) sc.epsilon_share = opt_param<double>(params, "epsilon");
    if (spec.mechanism == "solicit") {
      tr = solicit_and_run(profile, reports_for(params, profile), sc, g,
                           spec.strategies.empty() ? std::span<const BidSchedule>{} : schedules);
    } else {
      const double v_star = swept_as("v_star").value_or(
          opt_param<double>(params, "v_star").value_or(rev_stb(profile)));
      tr = spec.mechanism == "k_fpa" ? run_k_fpa(profile, v_star, schedules, g)
                                     : run_k_fpa_spot_check(profile, v_star, schedules, sc, g, seed);
    }
  }
  tr.seed = seed;

  RunResult res{{}, std::move(tr), std::move(profile), {}};
  res.audit = audit_transcript(res.transcript, res.profile);
  const Outcome o = make_outcome(res.transcript, res.profile);

  ResultRow& row = res.row;
  row.experiment_index = experiment_index;
  row.experiment_id = spec.id;
  row.mechanism = spec.mechanism;
  row.seed = seed;
  row.point = point;
  row.param_name = sweep_name;
  row.param_value = swept;
  row.rounds = rounds;
  row.bidders = k;
  row.revenue = o.revenue;
  row.rev_stb = o.rev_stb;
  row.rev_spa = o.rev_spa;
  row.ratio = o.competitive_ratio;
  row.min_utility = *std::min_element(o.per_bidder_utility.begin(), o.per_bidder_utility.end());
  row.audit_ok = res.audit.ok();
  return res;
}

RunSummary run_experiments(const ExperimentConfig& config, const RunOptions& options) {
  struct Task {
    std::size_t experiment;
    std::uint64_t seed;
    std::size_t point;
  };
  std::vector<Task> tasks;
  for (std::size_t e = 0; e < config.experiments.size(); ++e) {
    const auto& spec = config.experiments[e];
    if (!options.mechanisms.empty() &&
        std::find(options.mechanisms.begin(), options.mechanisms.end(), spec.mechanism) ==
            options.mechanisms.end()) {
      continue;
    }
    std::vector<std::uint64_t> seeds = spec.seeds;
    if (options.seed_override) seeds = {*options.seed_override};
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    const std::size_t points = spec.sweep ? spec.sweep->values.size() : 1;
    for (std::uint64_t s : seeds) {
      for (std::size_t p = 0; p < points; ++p) tasks.push_back({e, s, p});
    }
  }

  std::vector<std::optional<ResultRow>> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex io;
  std::string first_error;

  const auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t n = next.fetch_add(1);
      if (n >= tasks.size()) return;
      const Task& task = tasks[n];
      const auto& spec = config.experiments[task.experiment];
      ResultRow row;
      try {
        RunResult res = run_single(spec, task.experiment, task.seed, task.point);
        if (options.transcript_dir) {
          std::ostringstream name;
          name << spec.id << '_' << task.seed << '_' << task.point << ".json";
          write_text_file(*options.transcript_dir / name.str(),
                          transcript_to_json(res.transcript).dump(1) + "\n");
        }
        row = std::move(res.row);
      } catch (const std::exception& e) {
        row.experiment_index = task.experiment;
        row.experiment_id = spec.id;
        row.mechanism = spec.mechanism;
        row.seed = task.seed;
        row.point = task.point;
        row.param_name = spec.sweep ? spec.sweep->param : std::string{};
        if (spec.sweep) row.param_value = spec.sweep->values[task.point];
        row.rounds = spec.rounds;
        row.bidders = spec.profiles.size();
        row.audit_ok = false;
        row.error = e.what();
      }
      if (!row.audit_ok && options.strict_audit) stop.store(true);
      slots[n] = std::move(row);
    }
  };
  const unsigned jobs = std::max(1u, options.jobs);
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  RunSummary summary;
  for (auto& s : slots) {
    if (!s) {
      summary.stopped_early = true;
      continue;
    }
    summary.all_ok = summary.all_ok && s->audit_ok;
    summary.rows.push_back(std::move(*s));
  }
  std::stable_sort(summary.rows.begin(), summary.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.experiment_index, a.seed, a.point) < std::tie(b.experiment_index, b.seed, b.point);
  });
  return summary;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  for (std::size_t c = 0; c < kResultColumns.size(); ++c) os << (c ? "," : "") << kResultColumns[c];
  os << '\n';
  for (const auto& r : rows) {
    os << r.experiment_id << ',' << r.seed << ',' << r.param_name << ','
       << (r.param_value ? format_number(*r.param_value) : "") << ',' << r.rounds << ',' << r.bidders
       << ',' << format_number(r.revenue) << ',' << format_number(r.rev_stb) << ','
       << format_number(r.rev_spa) << ',' << (r.ratio ? format_number(*r.ratio) : "") << ','
       << format_number(r.min_utility) << ',' << (r.audit_ok ? "true" : "false") << '\n';
  }
  return os.str();
}

Json rows_to_json(const std::vector<ResultRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j = {{"experiment_id", r.experiment_id},
              {"seed", r.seed},
              {"param_name", r.param_name},
              {"param_value", r.param_value ? Json(*r.param_value) : Json(nullptr)},
              {"T", r.rounds},
              {"k", r.bidders},
              {"revenue", r.revenue},
              {"rev_stb", r.rev_stb},
              {"rev_spa", r.rev_spa},
              {"ratio", r.ratio ? Json(*r.ratio) : Json(nullptr)},
              {"min_utility", r.min_utility},
              {"audit_ok", r.audit_ok}};
    if (!r.error.empty()) j["error"] = r.error;
    out.push_back(std::move(j));
  }
  return out;
}

std::string emit_report(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    double min_rev = rows[i].revenue;
    double sum_rev = 0.0;
    std::optional<double> min_ratio;
    std::optional<double> min_over_ve;
    std::size_t passed = 0;
    std::size_t errors = 0;
    for (; j < rows.size() && rows[j].experiment_index == rows[i].experiment_index; ++j) {
      const auto& r = rows[j];
      min_rev = std::min(min_rev, r.revenue);
      sum_rev += r.revenue;
      if (r.ratio) min_ratio = std::min(min_ratio.value_or(*r.ratio), *r.ratio);
      if (r.mechanism == "pay_to_play" && r.rev_stb > 0.0) {
        const double over = r.revenue / (r.rev_stb / std::numbers::e);
        min_over_ve = std::min(min_over_ve.value_or(over), over);
      }
      passed += r.audit_ok ? 1 : 0;
      errors += r.error.empty() ? 0 : 1;
    }
    const std::size_t n = j - i;
    os << rows[i].experiment_id << ": runs=" << n << " revenue_min=" << format_number(min_rev)
       << " revenue_mean=" << format_number(sum_rev / static_cast<double>(n))
       << " ratio_min=" << (min_ratio ? format_number(*min_ratio) : "-");
    if (min_over_ve) os << " revenue_over_V/e_min=" << format_number(*min_over_ve);
    os << " audits_passed=" << passed << "/" << n;
    if (errors) os << " errors=" << errors;
    if (passed != n) os << " FAILED";
    os << '\n';
    i = j;
  }
  return os.str();
}

}  // namespace dynauction
