#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "dynauction/core.hpp"
#include "dynauction/verify.hpp"

namespace dynauction {

using Json = nlohmann::json;

// {mechanism_id, seed, rounds: [{t, r, x}], reimbursements, revenue}. r and x
// are always per-bidder arrays. Multi-bidder transcripts add cap_hit_round,
// check_rounds, eliminated, s_price, s_play and v_star.
Json transcript_to_json(const Transcript& transcript);

// Single bidder: t, allocation, payment, cumulative_payment, rate.
// Several bidders: t, winner, winning_bid, X_1..X_k, alloc_1..alloc_k, with
// tied winners joined by '+' and an empty winner for rounds without one.
std::string transcript_to_csv(const Transcript& transcript);

// Per-bidder rows of per-round values.
Json profile_to_json(const TypeProfile& profile);
TypeProfile profile_from_json(const Json& rows);

// Sidecar stored next to a profile file.
struct ProfileSidecar {
  std::size_t rounds = 0;
  std::size_t bidders = 0;
  std::uint64_t seed = 0;
  std::string kind;
  Json params = Json::object();
};

Json sidecar_to_json(const ProfileSidecar& sidecar);
ProfileSidecar sidecar_from_json(const Json& j);

Json audit_to_json(const AuditReport& report);
Json deviation_to_json(const DeviationResult& result);
Json dominance_to_json(const DominanceResult& result);

// Shortest round-trip decimal form, so equal doubles print identically.
std::string format_number(double x);

Json read_json_file(const std::filesystem::path& path);
// Throws std::runtime_error when the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dynauction
