#include "dynauction/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dynauction {

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Json transcript_to_json(const Transcript& tr) {
  Json rounds = Json::array();
  for (const auto& r : tr.rounds) {
    rounds.push_back({{"t", r.round}, {"r", r.allocations}, {"x", r.payments}});
  }
  Json j = {{"mechanism_id", tr.mechanism_id},
            {"seed", tr.seed},
            {"rounds", std::move(rounds)},
            {"reimbursements", tr.reimbursements},
            {"revenue", tr.revenue()}};
  if (tr.bidders > 1) {
    j["cap_hit_round"] = tr.cap_hit_round ? Json(*tr.cap_hit_round) : Json(nullptr);
    j["check_rounds"] = tr.check_rounds;
    std::vector<bool> eliminated = tr.eliminated;
    j["eliminated"] = eliminated;
    j["s_price"] = tr.s_price;
    j["s_play"] = tr.s_play;
    j["v_star"] = tr.v_star ? Json(*tr.v_star) : Json(nullptr);
  }
  return j;
}

std::string transcript_to_csv(const Transcript& tr) {
  std::ostringstream os;
  if (tr.bidders == 1) {
    os << "t,allocation,payment,cumulative_payment,rate\n";
    for (const auto& r : tr.rounds) {
      os << r.round << ',' << format_number(r.allocations[0]) << ',' << format_number(r.payments[0])
         << ',' << format_number(r.state[0]) << ',' << format_number(r.rates[0]) << '\n';
    }
    return os.str();
  }
  os << "t,winner,winning_bid";
  for (std::size_t i = 1; i <= tr.bidders; ++i) os << ",X_" << i;
  for (std::size_t i = 1; i <= tr.bidders; ++i) os << ",alloc_" << i;
  os << '\n';
  for (const auto& r : tr.rounds) {
    os << r.round << ',';
    for (std::size_t w = 0; w < r.winners.size(); ++w) os << (w ? "+" : "") << r.winners[w] + 1;
    os << ',' << format_number(r.winning_bid);
    for (double x : r.state) os << ',' << format_number(x);
    for (double a : r.allocations) os << ',' << format_number(a);
    os << '\n';
  }
  return os.str();
}

Json profile_to_json(const TypeProfile& profile) {
  Json rows = Json::array();
  for (const auto& p : profile.all()) {
    rows.push_back(std::vector<double>(p.values().begin(), p.values().end()));
  }
  return rows;
}

TypeProfile profile_from_json(const Json& rows) {
  if (!rows.is_array() || rows.empty()) throw InvalidInput("profile must be a non-empty array of rows");
  std::vector<ValueProfile> out;
  for (const auto& row : rows) {
    if (!row.is_array()) throw InvalidInput("each profile row must be an array of values");
    out.emplace_back(row.get<std::vector<double>>());
  }
  return TypeProfile(std::move(out));
}

Json sidecar_to_json(const ProfileSidecar& s) {
  return {{"T", s.rounds}, {"k", s.bidders}, {"seed", s.seed}, {"kind", s.kind}, {"params", s.params}};
}

ProfileSidecar sidecar_from_json(const Json& j) {
  ProfileSidecar s;
  s.rounds = j.at("T").get<std::size_t>();
  s.bidders = j.at("k").get<std::size_t>();
  s.seed = j.value("seed", std::uint64_t{0});
  s.kind = j.value("kind", std::string{});
  s.params = j.value("params", Json::object());
  return s;
}

Json audit_to_json(const AuditReport& rep) {
  Json notes = Json::array();
  for (const auto& n : rep.notes) {
    notes.push_back({{"round", n.round}, {"bidder", n.bidder}, {"kind", n.kind}, {"amount", n.amount}});
  }
  return {{"ok", rep.ok()},
          {"liability_ok", rep.liability_ok},
          {"feasibility_ok", rep.feasibility_ok},
          {"accounting_ok", rep.accounting_ok},
          {"max_liability_violation", rep.max_liability_violation},
          {"notes", std::move(notes)}};
}

Json deviation_to_json(const DeviationResult& res) {
  return {{"best_gain", res.best_gain},
          {"best_misreport", res.best_misreport},
          {"best_defection_round", res.best_defection_round},
          {"truthful_utility", res.truthful_utility},
          {"misreports_checked", res.misreports_checked}};
}

Json dominance_to_json(const DominanceResult& res) {
  return {{"front_load_optimal", res.front_load_optimal},
          {"gap", res.gap},
          {"best_schedule_utility", res.best_schedule_utility},
          {"best_front_load_utility", res.best_front_load_utility},
          {"states_visited", res.states_visited}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidInput("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace dynauction
