#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eti_arena/game.hpp"
#include "eti_arena/traits.hpp"

namespace eti {

struct ChatPrompt {
  std::string system;
  std::string user;

  // System text, blank line, user text.
  std::string flatten() const;
  friend bool operator==(const ChatPrompt&, const ChatPrompt&) = default;
};

inline constexpr std::string_view kInferenceSystemPrompt =
    "You are an expert at inferring stable traits from interactions.";
inline constexpr std::string_view kNoInteractionsMarker =
    "No interactions yet.";
inline constexpr std::string_view kInjectionPreamble =
    "Here is some information about your collaborators:";
inline constexpr std::string_view kInjectionClosing =
    "Use this information to make better decisions, coordinate better, and "
    "improve overall outcomes.";

// Rounds older than this are dropped from rendered histories.
inline constexpr std::size_t kHistoryWindow = 50;

// One line per round, e.g.
//   Round 3: You chose Stag. RB intended Stag and the action succeeded.
//   Payoffs: you 5, RB 5.
// (on a single line). Empty history renders as kNoInteractionsMarker.
std::string render_history(std::span<const RoundRecord> history,
                           std::string_view opponent_id,
                           std::size_t window = kHistoryWindow);

// Rules and full payoff matrix, shared by every prompt kind.
std::string describe_game(const PayoffTable& table,
                          std::string_view opponent_id);

// Expects exactly the eight traits; throws DomainError otherwise.
ChatPrompt build_inference_prompt(std::string_view scenario_description,
                                  std::string_view rendered_history,
                                  std::span<const TraitDefinition> definitions,
                                  std::string_view subject);

// The output template embedded in inference prompts.
std::string profile_json_template();

// Canonical grouped JSON: {"competence": {...}, "warmth": {...}}, each trait
// {"rating": int|"N/A", "evidence": string}.
std::string render_profile_json(const TraitProfile& profile);

// Finds the first JSON object in `raw` (prose and code fences around it are
// ignored) and validates it against the grouped schema.
// ParseError: no parseable object. SchemaError: missing/unknown trait or bad
// field. RangeError: rating outside 1..7.
TraitProfile parse_profile(std::string_view raw, std::string subject,
                           int round);

// base_prompt verbatim, then the preamble, each profile, and the closing line.
// Returns base_prompt unchanged for an empty set.
std::string inject_profiles(std::string_view base_prompt,
                            std::span<const TraitProfile> profiles);

enum class ProfilePolicy { Continuous, FrozenAfterCalibration, CrossTaskTransfer };

enum class UpdateOutcome { Replaced, RecordedOnly, Rejected };

class ProfileStore {
 public:
  static ProfileStore continuous() { return ProfileStore(ProfilePolicy::Continuous, 0); }
  static ProfileStore frozen_after(int freeze_round) {
    return ProfileStore(ProfilePolicy::FrozenAfterCalibration, freeze_round);
  }
  static ProfileStore cross_task() {
    return ProfileStore(ProfilePolicy::CrossTaskTransfer, 0);
  }

  ProfilePolicy policy() const noexcept { return policy_; }
  int freeze_round() const noexcept { return freeze_round_; }

  // Installs a profile produced elsewhere as the round-0 current profile.
  void seed(TraitProfile profile);

  // Requires profile.produced_at_round == round (DomainError) and a round
  // strictly after the subject's latest history entry (OrderError).
  //   Continuous: replace current, append history.
  //   FrozenAfterCalibration: replace only while round <= freeze_round;
  //     later profiles are appended to history only.
  //   CrossTaskTransfer: rejected; counted in rejected_updates().
  UpdateOutcome update(const std::string& subject, TraitProfile profile,
                       int round);

  // Whether an update at `round` could change the current profile.
  bool accepts_updates_at(int round) const noexcept;

  const TraitProfile* current(const std::string& subject) const;
  std::vector<TraitProfile> current_profiles() const;  // by subject name
  const std::vector<std::pair<int, TraitProfile>>& history() const noexcept {
    return history_;
  }
  int rejected_updates() const noexcept { return rejected_; }

  friend bool operator==(const ProfileStore&, const ProfileStore&) = default;

 private:
  ProfileStore(ProfilePolicy p, int freeze) : policy_(p), freeze_round_(freeze) {}

  ProfilePolicy policy_;
  int freeze_round_;
  std::map<std::string, TraitProfile> current_;
  std::vector<std::pair<int, TraitProfile>> history_;
  int rejected_ = 0;
};

// Functional form of ProfileStore::update.
ProfileStore update_store(ProfileStore store, const std::string& subject,
                          TraitProfile profile, int round);

}  // namespace eti
