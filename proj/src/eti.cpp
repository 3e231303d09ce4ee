#include "eti_arena/eti.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "eti_arena/errors.hpp"

namespace eti {

using nlohmann::json;
using nlohmann::ordered_json;

std::string ChatPrompt::flatten() const { return system + "\n\n" + user; }

// ---- rendering --------------------------------------------------------------

std::string render_history(std::span<const RoundRecord> history,
                           std::string_view opponent_id, std::size_t window) {
  if (history.empty()) return std::string(kNoInteractionsMarker);
  std::ostringstream out;
  const std::size_t start = history.size() > window ? history.size() - window : 0;
  if (start > 0) {
    out << "(Showing the most recent " << window << " of " << history.size()
        << " rounds.)\n";
  }
  for (std::size_t i = start; i < history.size(); ++i) {
    const auto& r = history[i];
    out << "Round " << r.round << ": You chose " << to_string(r.agent_action)
        << ". " << opponent_id << " intended " << to_string(r.opponent_intended)
        << (r.opponent_success ? " and the action succeeded."
                               : " but the action failed.")
        << " Payoffs: you " << r.agent_payoff.to_string() << ", "
        << opponent_id << " " << r.opponent_payoff.to_string() << ".\n";
  }
  return out.str();
}

std::string describe_game(const PayoffTable& table,
                          std::string_view opponent_id) {
  const GameKind g = table.game();
  const auto acts = actions_of(g);
  std::ostringstream out;
  out << "Game: " << to_string(g) << "\n";
  out << "You are playing an iterated " << to_string(g) << " against "
      << opponent_id << ". Each round both players simultaneously choose "
      << to_string(acts[0]) << " or " << to_string(acts[1]) << ". "
      << "Your own actions always execute as intended. " << opponent_id
      << "'s chosen action may fail to execute, which changes the payoffs as "
         "shown below. After each round both choices, whether "
      << opponent_id << "'s action succeeded, and the payoffs are revealed.\n";
  if (g == GameKind::StagHunt) {
    out << "Hunting stag pays off only if both players commit to it; hunting "
           "hare is a safe individual payoff.\n";
  } else {
    out << "Staying silent is the cooperative choice; testifying betrays the "
           "other player. Payoffs are negative (years in prison), so higher "
           "is better.\n";
  }
  out << "\nPayoff matrix, shown as (your payoff, " << opponent_id
      << "'s payoff):\n";
  out << "You \\ " << opponent_id;
  for (Action o : acts) {
    out << " | " << to_string(o) << " (success) | " << to_string(o)
        << " (failure)";
  }
  out << "\n";
  for (Action a : acts) {
    out << to_string(a);
    for (Action o : acts) {
      for (bool ok : {true, false}) {
        const auto p = table.lookup(a, o, ok);
        out << " | (" << p.agent.to_string() << ", " << p.opponent.to_string()
            << ")";
      }
    }
    out << "\n";
  }
  return out.str();
}

std::string profile_json_template() {
  std::ostringstream out;
  out << "{\n";
  bool first_group = true;
  for (TraitDimension d : {TraitDimension::Competence, TraitDimension::Warmth}) {
    if (!first_group) out << ",\n";
    first_group = false;
    out << "  \"" << dimension_key(d) << "\": {\n";
    bool first = true;
    for (const auto& def : trait_definitions()) {
      if (def.dimension != d) continue;
      if (!first) out << ",\n";
      first = false;
      out << "    \"" << def.key
          << "\": {\"rating\": <integer 1-7 or \"N/A\">, \"evidence\": "
             "\"<2-3 sentences>\"}";
    }
    out << "\n  }";
  }
  out << "\n}";
  return out.str();
}

ChatPrompt build_inference_prompt(std::string_view scenario_description,
                                  std::string_view rendered_history,
                                  std::span<const TraitDefinition> definitions,
                                  std::string_view subject) {
  if (definitions.size() != kTraitCount) {
    throw DomainError("incomplete trait set: expected 8 definitions, got " +
                      std::to_string(definitions.size()));
  }
  std::array<bool, kTraitCount> seen{};
  for (const auto& d : definitions) {
    if (seen[index_of(d.trait)]) throw DomainError("duplicate trait definition");
    seen[index_of(d.trait)] = true;
  }
  std::ostringstream u;
  u << "Scenario:\n" << scenario_description << "\n\n";
  u << "Interaction history:\n";
  if (rendered_history.empty()) {
    u << kNoInteractionsMarker << "\n";
  } else {
    u << rendered_history;
    if (rendered_history.back() != '\n') u << "\n";
  }
  u << "\nTrait definitions:\n";
  for (const auto& d : definitions) {
    u << "- " << d.key << " (" << d.display_name << ", "
      << dimension_key(d.dimension) << "): " << d.definition << "\n";
  }
  u << "\nTask:\n"
    << "- Analyze the interaction history.\n"
    << "- Identify stable behavioral patterns. Focus on dominant behavioral "
       "patterns rather than isolated events, and do not derive task-specific "
       "decision rules.\n"
    << "- Assign ratings (1-7 or N/A) for each trait.\n"
    << "- Provide 2-3 sentence evidence per trait.\n\n";
  u << "Instruction: Based on the above, determine the extent to which the "
       "following traits apply to "
    << subject << ".\n\n";
  u << "Output format (reply with this JSON object only):\n"
    << profile_json_template() << "\n";
  return {std::string(kInferenceSystemPrompt), u.str()};
}

std::string render_profile_json(const TraitProfile& profile) {
  ordered_json root = ordered_json::object();
  for (TraitDimension d : {TraitDimension::Competence, TraitDimension::Warmth}) {
    ordered_json group = ordered_json::object();
    for (const auto& def : trait_definitions()) {
      if (def.dimension != d) continue;
      const auto& r = profile.rating(def.trait);
      ordered_json item = ordered_json::object();
      if (r.value) {
        item["rating"] = *r.value;
      } else {
        item["rating"] = "N/A";
      }
      item["evidence"] = r.evidence;
      group[def.key] = std::move(item);
    }
    root[std::string(dimension_key(d))] = std::move(group);
  }
  return root.dump(2);
}

// ---- parsing ----------------------------------------------------------------

namespace {

// End (one past the closing brace) of the balanced object starting at
// `open`, honouring string literals; npos if unbalanced.
std::size_t match_object(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

// Raw control characters inside string literals (line-wrapped evidence) are
// not valid JSON; fold them into spaces.
std::string fold_string_controls(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escaped = false;
  for (char c : s) {
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      } else if (c == '\n' || c == '\r' || c == '\t') {
        c = ' ';
      }
    } else if (c == '"') {
      in_string = true;
    }
    out.push_back(c);
  }
  return out;
}

std::optional<json> try_parse_object(std::string_view text) {
  auto parsed = json::parse(fold_string_controls(text), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

bool has_group(const json& j) {
  return j.contains("competence") || j.contains("warmth");
}

// Grouped keys written without the enclosing braces, as in
//   "competence": {...}, "warmth": {...}
std::optional<json> try_unbraced_groups(std::string_view raw) {
  std::size_t start = std::string_view::npos;
  for (std::string_view key : {"\"competence\"", "\"warmth\""}) {
    start = std::min(start, raw.find(key));
  }
  const auto end = raw.rfind('}');
  if (start == std::string_view::npos || end == std::string_view::npos ||
      end < start) {
    return std::nullopt;
  }
  std::string wrapped = "{";
  wrapped += raw.substr(start, end - start + 1);
  wrapped += "}";
  auto j = try_parse_object(wrapped);
  if (j && has_group(*j)) return j;
  return std::nullopt;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool is_na(std::string_view s) {
  std::string t = trim(s);
  for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return t == "N/A" || t == "NA" || t == "N.A.";
}

TraitRating parse_rating(const json& item, const std::string& key,
                         const std::string& raw) {
  if (!item.is_object()) {
    throw SchemaError(key, "trait '" + key + "' must be an object", raw);
  }
  if (!item.contains("rating")) {
    throw SchemaError(key, "trait '" + key + "' has no rating", raw);
  }
  const json& r = item.at("rating");
  TraitRating out;
  auto check_range = [&](double v) {
    if (v != std::floor(v) || v < 1 || v > 7) {
      std::ostringstream msg;
      msg << "rating " << v << " for '" << key << "' is outside 1..7";
      throw RangeError(key, msg.str(), raw);
    }
    out.value = static_cast<int>(v);
  };
  if (r.is_number()) {
    check_range(r.get<double>());
  } else if (r.is_string()) {
    const auto text = r.get<std::string>();
    if (is_na(text)) {
      out.value.reset();
    } else {
      const auto t = trim(text);
      char* end = nullptr;
      const double v = std::strtod(t.c_str(), &end);
      if (t.empty() || end != t.c_str() + t.size()) {
        throw SchemaError(key, "rating for '" + key + "' is not a number or N/A",
                          raw);
      }
      check_range(v);
    }
  } else if (r.is_null()) {
    out.value.reset();
  } else {
    throw SchemaError(key, "rating for '" + key + "' has the wrong type", raw);
  }
  if (item.contains("evidence")) {
    if (!item.at("evidence").is_string()) {
      throw SchemaError(key, "evidence for '" + key + "' must be a string", raw);
    }
    out.evidence = item.at("evidence").get<std::string>();
  }
  if (out.value && trim(out.evidence).empty()) {
    throw SchemaError(key, "rated trait '" + key + "' has no evidence", raw);
  }
  return out;
}

}  // namespace

TraitProfile parse_profile(std::string_view raw, std::string subject,
                           int round) {
  const std::string raw_copy(raw);
  std::optional<json> first_object;
  std::optional<json> grouped;
  for (std::size_t pos = raw.find('{'); pos != std::string_view::npos;) {
    const auto end = match_object(raw, pos);
    if (end == std::string_view::npos) break;
    if (auto j = try_parse_object(raw.substr(pos, end - pos))) {
      if (!first_object) first_object = *j;
      if (has_group(*j)) {
        grouped = std::move(j);
        break;
      }
      pos = raw.find('{', end);
    } else {
      pos = raw.find('{', pos + 1);
    }
  }
  if (!grouped) grouped = try_unbraced_groups(raw);
  if (!grouped) {
    if (!first_object) {
      throw ParseError("no well-formed JSON object in model output", raw_copy);
    }
    grouped = std::move(first_object);
  }

  const json& root = *grouped;
  TraitProfile profile;
  profile.subject = std::move(subject);
  profile.produced_at_round = round;
  std::array<bool, kTraitCount> seen{};
  for (TraitDimension d : {TraitDimension::Competence, TraitDimension::Warmth}) {
    const std::string group_key(dimension_key(d));
    if (!root.contains(group_key)) continue;
    const json& group = root.at(group_key);
    if (!group.is_object()) {
      throw SchemaError(group_key, "group '" + group_key + "' must be an object",
                        raw_copy);
    }
    for (const auto& [key, item] : group.items()) {
      const auto trait = trait_from_key(key);
      if (!trait) {
        throw SchemaError(key, "unknown trait '" + key + "'", raw_copy);
      }
      if (dimension_of(*trait) != d) {
        throw SchemaError(key, "trait '" + key + "' listed under " + group_key,
                          raw_copy);
      }
      profile.rating(*trait) = parse_rating(item, key, raw_copy);
      seen[index_of(*trait)] = true;
    }
  }
  for (const auto& def : trait_definitions()) {
    if (!seen[index_of(def.trait)]) {
      throw SchemaError(def.key, "missing trait '" + def.key + "'", raw_copy);
    }
  }
  return profile;
}

std::string inject_profiles(std::string_view base_prompt,
                            std::span<const TraitProfile> profiles) {
  std::string out(base_prompt);
  if (profiles.empty()) return out;
  out += "\n\n";
  out += kInjectionPreamble;
  out += "\n";
  for (const auto& p : profiles) {
    out += p.subject + ":\n" + render_profile_json(p) + "\n";
  }
  out += kInjectionClosing;
  out += "\n";
  return out;
}

// ---- store ------------------------------------------------------------------

void ProfileStore::seed(TraitProfile profile) {
  profile.produced_at_round = 0;
  const std::string subject = profile.subject;
  history_.emplace_back(0, profile);
  current_[subject] = std::move(profile);
}

bool ProfileStore::accepts_updates_at(int round) const noexcept {
  switch (policy_) {
    case ProfilePolicy::Continuous: return true;
    case ProfilePolicy::FrozenAfterCalibration: return round <= freeze_round_;
    case ProfilePolicy::CrossTaskTransfer: return false;
  }
  return false;
}

UpdateOutcome ProfileStore::update(const std::string& subject,
                                   TraitProfile profile, int round) {
  if (profile.produced_at_round != round) {
    throw DomainError("profile round does not match update round");
  }
  for (auto it = history_.rbegin(); it != history_.rend(); ++it) {
    if (it->second.subject != subject) continue;
    if (round <= it->first) {
      throw OrderError("update for '" + subject + "' at round " +
                       std::to_string(round) + " does not follow round " +
                       std::to_string(it->first));
    }
    break;
  }
  profile.subject = subject;
  switch (policy_) {
    case ProfilePolicy::Continuous:
      history_.emplace_back(round, profile);
      current_[subject] = std::move(profile);
      return UpdateOutcome::Replaced;
    case ProfilePolicy::FrozenAfterCalibration:
      history_.emplace_back(round, profile);
      if (round <= freeze_round_) {
        current_[subject] = std::move(profile);
        return UpdateOutcome::Replaced;
      }
      return UpdateOutcome::RecordedOnly;
    case ProfilePolicy::CrossTaskTransfer:
      ++rejected_;
      return UpdateOutcome::Rejected;
  }
  return UpdateOutcome::Rejected;
}

const TraitProfile* ProfileStore::current(const std::string& subject) const {
  const auto it = current_.find(subject);
  return it == current_.end() ? nullptr : &it->second;
}

std::vector<TraitProfile> ProfileStore::current_profiles() const {
  std::vector<TraitProfile> out;
  out.reserve(current_.size());
  for (const auto& [_, p] : current_) out.push_back(p);
  return out;
}

ProfileStore update_store(ProfileStore store, const std::string& subject,
                          TraitProfile profile, int round) {
  store.update(subject, std::move(profile), round);
  return store;
}

}  // namespace eti
