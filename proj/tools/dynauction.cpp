#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynauction/core.hpp"
#include "dynauction/experiment.hpp"
#include "dynauction/multi_bidder.hpp"
#include "dynauction/serialize.hpp"
#include "dynauction/single_buyer.hpp"
#include "dynauction/verify.hpp"

namespace fs = std::filesystem;
using namespace dynauction;

namespace {

// Exit codes: 0 success, 1 failed audit or verification, 2 bad input.
constexpr int kFailed = 1;
constexpr int kBadInput = 2;

struct BatchFlags {
  std::string config;
  std::string out;
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed_override;
  bool strict_audit = false;
  std::string transcripts;
};

struct QuickFlags {
  std::string profiles;  // JSON rows file
  std::string kind = "constant";
  std::size_t rounds = 1000;
  std::size_t bidders = 0;
  double level = 1.0;
  std::uint64_t seed = 0;
  std::optional<double> v_bound;
  std::optional<double> x_bar;
  std::optional<double> v_star;
  std::optional<double> epsilon;
  std::optional<double> reimbursement;
  double g = 2.0;
  std::vector<double> reports;
  bool spot_check = false;
  bool split = false;
};

void add_batch_flags(CLI::App* cmd, BatchFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output path; overrides the config's output.path");
  cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed-override", f.seed_override, "Replace every experiment's seeds with this one");
  cmd->add_flag("--strict-audit", f.strict_audit, "Stop at the first failed audit");
  cmd->add_option("--transcripts", f.transcripts, "Directory for per-run transcript JSON");
}

void add_quick_flags(CLI::App* cmd, QuickFlags& q, bool multi) {
  cmd->add_option("--profiles", q.profiles, "Profile file: JSON array of per-bidder value rows")
      ->check(CLI::ExistingFile);
  cmd->add_option("--kind", q.kind, "Generator kind when no profile file is given");
  cmd->add_option("--T", q.rounds, "Rounds for the generator");
  cmd->add_option("--level", q.level, "Generator level");
  cmd->add_option("--seed", q.seed, "Run seed");
  cmd->add_option("--epsilon", q.epsilon, "Perturbed rate epsilon, or check/audit share");
  cmd->add_option("--g", q.g, "Completion bonus for first-price mechanisms");
  if (multi) {
    cmd->add_option("--k", q.bidders, "Bidders for the generator");
    cmd->add_option("--reports", q.reports, "Reported totals (default: truthful)");
    cmd->add_option("--v-star", q.v_star, "Value bound V* (default: second-highest total)");
  } else {
    cmd->add_option("--v-bound", q.v_bound, "Seller's lower bound V (default: total value)");
    cmd->add_option("--x-bar", q.x_bar, "Front-loading target fraction (default: x_opt)");
  }
  cmd->add_option("--reimbursement", q.reimbursement, "Pay-to-play reimbursement");
}

RunOptions run_options(const BatchFlags& f, std::vector<std::string> mechanisms) {
  RunOptions o;
  o.jobs = f.jobs;
  o.seed_override = f.seed_override;
  o.strict_audit = f.strict_audit;
  if (!f.transcripts.empty()) o.transcript_dir = fs::path(f.transcripts);
  o.mechanisms = std::move(mechanisms);
  return o;
}

int run_batch(const BatchFlags& f, std::vector<std::string> mechanisms) {
  ExperimentConfig cfg = parse_config(read_json_file(f.config));
  if (!f.out.empty()) cfg.output_path = f.out;
  if (cfg.output_path.empty()) {
    std::cerr << "error: no output path (set output.path in the config or pass --out)\n";
    return kBadInput;
  }
  const RunSummary summary = run_experiments(cfg, run_options(f, std::move(mechanisms)));
  write_text_file(cfg.output_path, cfg.format == "csv" ? rows_to_csv(summary.rows)
                                                       : rows_to_json(summary.rows).dump(1) + "\n");
  std::cout << emit_report(summary.rows);
  for (const auto& r : summary.rows) {
    if (!r.error.empty()) std::cerr << r.experiment_id << " seed " << r.seed << ": " << r.error << "\n";
  }
  if (summary.stopped_early) std::cerr << "stopped early after a failed audit\n";
  return summary.all_ok ? 0 : kFailed;
}

ExperimentSpec quick_spec(const QuickFlags& q, const std::string& mechanism, std::size_t default_k) {
  ExperimentSpec spec;
  spec.id = mechanism;
  spec.mechanism = mechanism;
  spec.seeds = {q.seed};
  if (!q.profiles.empty()) {
    const TypeProfile p = profile_from_json(read_json_file(q.profiles));
    spec.rounds = p.rounds();
    for (const auto& row : p.all()) {
      ProfileSpec ps;
      ps.inline_values.assign(row.values().begin(), row.values().end());
      spec.profiles.push_back(std::move(ps));
    }
  } else {
    spec.rounds = q.rounds;
    ProfileSpec ps;
    ps.kind = profile_kind_from_string(q.kind);
    ps.params.level = q.level;
    spec.profiles.assign(q.bidders ? q.bidders : default_k, ps);
  }
  if (q.v_bound) spec.params["v_bound"] = *q.v_bound;
  if (q.v_star) spec.params["v_star"] = *q.v_star;
  if (q.reimbursement) spec.params["reimbursement"] = *q.reimbursement;
  if (!q.reports.empty()) spec.params["reports"] = q.reports;
  spec.params["g"] = q.g;
  if (q.epsilon) {
    if (mechanism == "pay_to_play" || mechanism == "two_bidder" || mechanism == "split_k") {
      spec.params["rho"] = {{"kind", "perturbed"}, {"epsilon", *q.epsilon}};
    } else {
      spec.params["epsilon"] = *q.epsilon;
    }
  }
  if (q.x_bar) {
    StrategySpec s;
    s.kind = "front_load_stop";
    s.x_bar = q.x_bar;
    spec.strategies.assign(spec.profiles.size(), s);
  }
  return spec;
}

int run_quick(const QuickFlags& q, const std::string& mechanism, std::size_t default_k,
              const std::string& out) {
  const ExperimentSpec spec = quick_spec(q, mechanism, default_k);
  const RunResult res = run_single(spec, 0, q.seed, 0);
  const Outcome o = make_outcome(res.transcript, res.profile);
  Json summary = {{"mechanism_id", res.transcript.mechanism_id},
                  {"revenue", o.revenue},
                  {"rev_stb", o.rev_stb},
                  {"rev_spa", o.rev_spa},
                  {"ratio", o.competitive_ratio ? Json(*o.competitive_ratio) : Json(nullptr)},
                  {"utilities", o.per_bidder_utility},
                  {"audit", audit_to_json(res.audit)}};
  if (mechanism == "pay_to_play") summary["v_bound"] = spec.params.value("v_bound", std::max(res.profile[0].total(), 1.0));
  std::cout << summary.dump(1) << "\n";
  if (!out.empty()) {
    const fs::path path(out);
    write_text_file(path, path.extension() == ".csv" ? transcript_to_csv(res.transcript)
                                                     : transcript_to_json(res.transcript).dump(1) + "\n");
  }
  return res.audit.ok() ? 0 : kFailed;
}

struct VerifyFlags {
  std::string profiles;
  std::vector<double> values;
  std::string mode = "deviation";
  std::string mechanism = "pay_to_play";
  double step = 0.25;
  std::optional<double> v_bound;
  double tolerance = 1e-6;
  std::size_t budget = kDefaultEnumerationBudget;
  std::string out;
};

int run_verify(const VerifyFlags& f) {
  std::optional<TypeProfile> profile;
  if (!f.profiles.empty()) profile = profile_from_json(read_json_file(f.profiles));
  if (!f.values.empty()) profile = TypeProfile({ValueProfile(f.values)});
  if (!profile) {
    std::cerr << "error: pass --profiles or --values\n";
    return kBadInput;
  }
  const ValueProfile& truth = (*profile)[0];
  const double v_bound = f.v_bound.value_or(std::max(truth.total(), 1.0));
  const PayToPlayConfig cfg = PayToPlayConfig::make(RateFunction::canonical(), v_bound);

  Json report;
  bool ok = true;
  if (f.mode == "deviation") {
    std::optional<TypeProfile> others;
    DeviationMechanism mech = DeviationMechanism::pay_to_play(cfg);
    if (f.mechanism != "pay_to_play") {
      if (profile->bidders() < 2) {
        std::cerr << "error: multi-bidder deviation search needs at least two profile rows\n";
        return kBadInput;
      }
      mech = f.mechanism == "two_bidder" ? DeviationMechanism::two_bidder() : DeviationMechanism::split_k();
      others = TypeProfile(std::vector<ValueProfile>(profile->all().begin() + 1, profile->all().end()));
    }
    const DeviationResult res = deviation_search(mech, truth, f.step, others, f.budget);
    const double share = others ? 1.0 / static_cast<double>(profile->bidders()) : 1.0;
    const double allowance = mech.config.reimbursement * share + f.tolerance;
    ok = res.best_gain <= allowance;
    report = deviation_to_json(res);
    report["allowance"] = allowance;
  } else if (f.mode == "dominance") {
    const DominanceResult res = schedule_dominance_check(truth, cfg, f.step, f.tolerance, f.budget);
    ok = res.front_load_optimal;
    report = dominance_to_json(res);
  } else {
    std::cerr << "error: --mode must be deviation or dominance\n";
    return kBadInput;
  }
  report["ok"] = ok;
  const std::string text = report.dump(1) + "\n";
  if (f.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(f.out, text);
  }
  return ok ? 0 : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic auction mechanisms: simulation, audits and truthfulness checks"};
  app.require_subcommand(1);

  struct Family {
    const char* name;
    const char* help;
    std::vector<std::string> mechanisms;
    BatchFlags batch;
    QuickFlags quick;
    std::string out;
    CLI::App* cmd = nullptr;
  };
  std::vector<Family> families;
  families.push_back({"single", "Single-buyer pay-to-play", {"pay_to_play"}, {}, {}, {}});
  families.push_back({"two", "Two-bidder split (or split-k with --split)", {"two_bidder", "split_k"}, {}, {}, {}});
  families.push_back({"kbid", "k-bidder first-price mechanism", {"k_fpa", "k_fpa_spot_check"}, {}, {}, {}});
  families.push_back({"solicit", "Value solicitation followed by the first-price mechanism", {"solicit"}, {}, {}, {}});
  for (auto& fam : families) {
    fam.cmd = app.add_subcommand(fam.name, fam.help);
    add_batch_flags(fam.cmd, fam.batch);
    add_quick_flags(fam.cmd, fam.quick, fam.mechanisms.front() != "pay_to_play");
    if (std::string(fam.name) == "two") fam.cmd->add_flag("--split", fam.quick.split, "Run split-k instead");
    if (std::string(fam.name) == "kbid") fam.cmd->add_flag("--spot-check", fam.quick.spot_check, "Spot-check variant");
  }

  BatchFlags sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run every experiment in a config");
  add_batch_flags(sweep_cmd, sweep);
  sweep_cmd->get_option("--config")->required();

  VerifyFlags verify;
  CLI::App* verify_cmd = app.add_subcommand("verify", "Exhaustive truthfulness and dominance checks");
  verify_cmd->add_option("--profiles", verify.profiles, "Profile file; row 0 is the deviator")
      ->check(CLI::ExistingFile);
  verify_cmd->add_option("--values", verify.values, "Deviator's values, instead of a file")->delimiter(',');
  verify_cmd->add_option("--mode", verify.mode, "deviation or dominance");
  verify_cmd->add_option("--mechanism", verify.mechanism, "pay_to_play, two_bidder or split_k");
  verify_cmd->add_option("--step", verify.step, "Value grid step (deviation) or payment grid step (dominance)");
  verify_cmd->add_option("--v-bound", verify.v_bound, "Seller's bound V (default: max(total, 1))");
  verify_cmd->add_option("--tolerance", verify.tolerance, "Slack on top of the reimbursement");
  verify_cmd->add_option("--budget", verify.budget, "Enumeration budget");
  verify_cmd->add_option("--out", verify.out, "Write the JSON report here instead of stdout");

  double c = 0.3;
  double alpha0 = 1.0;
  std::size_t max_iter = 100;
  std::string rec_out;
  CLI::App* rec_cmd = app.add_subcommand("recursion", "Iterate alpha <- alpha ln(1/alpha) + alpha - c");
  rec_cmd->add_option("--c", c, "Constant c in (0, 1)");
  rec_cmd->add_option("--alpha0", alpha0, "Starting alpha in (0, 1]");
  rec_cmd->add_option("--max-iter", max_iter, "Iteration limit");
  rec_cmd->add_option("--out", rec_out, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto& fam : families) {
      if (!fam.cmd->parsed()) continue;
      if (!fam.batch.config.empty()) return run_batch(fam.batch, fam.mechanisms);
      std::string mechanism = fam.mechanisms.front();
      if (fam.quick.split) mechanism = "split_k";
      if (fam.quick.spot_check) mechanism = "k_fpa_spot_check";
      const std::size_t default_k = mechanism == "pay_to_play" ? 1 : mechanism == "two_bidder" ? 2 : 5;
      return run_quick(fam.quick, mechanism, default_k, fam.batch.out);
    }
    if (sweep_cmd->parsed()) return run_batch(sweep, {});
    if (verify_cmd->parsed()) return run_verify(verify);
    if (rec_cmd->parsed()) {
      const auto seq = recursion_iterate(c, alpha0, max_iter);
      std::ostringstream os;
      os << "n,alpha\n";
      for (std::size_t n = 0; n < seq.size(); ++n) os << n << ',' << format_number(seq[n]) << '\n';
      if (rec_out.empty()) {
        std::cout << os.str();
      } else {
        write_text_file(rec_out, os.str());
      }
      return 0;
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }
  return 0;
}
