#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynauction/core.hpp"
#include "dynauction/serialize.hpp"

namespace dynauction {

// Mechanism ids accepted in configs.
inline const std::vector<std::string> kMechanismIds = {
    "pay_to_play", "two_bidder", "split_k", "k_fpa", "k_fpa_spot_check", "solicit"};

// Per-bidder profile: a generator spec or inline values.
struct ProfileSpec {
  std::optional<ProfileKind> kind;
  ProfileParams params;
  std::vector<double> inline_values;
};

// Strategy of one bidder. Pay-to-play style mechanisms understand
// front_load_stop, defect_at and custom_schedule; first-price mechanisms
// understand prescribed (v / 2), scaled (factor * v / 2) and fixed (bid).
// defect_round applies to every kind.
struct StrategySpec {
  std::string kind = "default";
  std::optional<double> x_bar;
  std::vector<double> payments;
  double factor = 1.0;
  double bid = 0.0;
  std::optional<std::size_t> first_round;  // fixed bids only from this round on
  std::optional<std::size_t> defect_round;
};

struct SweepSpec {
  std::string param;  // x_bar, T, v_bound, v_star or epsilon
  std::vector<double> values;
};

struct ExperimentSpec {
  std::string id;
  std::string mechanism;
  std::size_t rounds = 0;
  std::vector<ProfileSpec> profiles;
  std::vector<StrategySpec> strategies;  // empty: defaults for everyone
  std::vector<std::uint64_t> seeds;
  Json params = Json::object();
  std::optional<SweepSpec> sweep;
};

struct ExperimentConfig {
  std::vector<ExperimentSpec> experiments;
  std::string format = "csv";
  std::filesystem::path output_path;
};

// Validates the schema; throws InvalidInput with the offending field.
ExperimentConfig parse_config(const Json& j);

struct ResultRow {
  std::size_t experiment_index = 0;
  std::string experiment_id;
  std::string mechanism;
  std::uint64_t seed = 0;
  std::size_t point = 0;  // sweep index
  std::string param_name;
  std::optional<double> param_value;
  std::size_t rounds = 0;
  std::size_t bidders = 0;
  double revenue = 0.0;
  double rev_stb = 0.0;
  double rev_spa = 0.0;
  std::optional<double> ratio;
  double min_utility = 0.0;
  bool audit_ok = false;
  std::string error;  // set when the run itself threw
};

// One experiment at one seed and sweep point.
struct RunResult {
  ResultRow row;
  Transcript transcript;
  TypeProfile profile;
  AuditReport audit;
};

RunResult run_single(const ExperimentSpec& spec, std::size_t experiment_index, std::uint64_t seed,
                     std::size_t point);

struct RunOptions {
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed_override;
  bool strict_audit = false;  // stop dispatching after the first failed audit
  std::optional<std::filesystem::path> transcript_dir;
  // Restricts the run to these mechanism ids when non-empty.
  std::vector<std::string> mechanisms;
};

struct RunSummary {
  std::vector<ResultRow> rows;  // sorted by (experiment, seed, sweep point)
  bool all_ok = true;
  bool stopped_early = false;
};

RunSummary run_experiments(const ExperimentConfig& config, const RunOptions& options);

inline const std::vector<std::string> kResultColumns = {
    "experiment_id", "seed", "param_name", "param_value", "T",   "k",
    "revenue",       "rev_stb", "rev_spa", "ratio", "min_utility", "audit_ok"};

std::string rows_to_csv(const std::vector<ResultRow>& rows);
Json rows_to_json(const std::vector<ResultRow>& rows);

// Per-experiment summary lines: run count, min/mean revenue, min ratio and
// audit pass count; pay-to-play lines also report min revenue over V/e.
std::string emit_report(const std::vector<ResultRow>& rows);

}  // namespace dynauction
