#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace eti {

enum class TraitDimension { Competence, Warmth };

// Fixed trait set, competence group first (matches the grouped JSON layout).
enum class Trait : std::size_t {
  ExecutionAbility,
  Reliability,
  Adaptability,
  Efficiency,
  GoalAlignment,
  Collaboration,
  Trustworthiness,
  Maliciousness,
};

inline constexpr std::size_t kTraitCount = 8;

struct TraitDefinition {
  Trait trait;
  std::string key;           // snake_case JSON key, e.g. "execution_ability"
  std::string display_name;  // e.g. "Execution Ability"
  TraitDimension dimension;
  std::string definition;
};

// Built-in definitions; data/trait_definitions.json carries the same text.
const std::array<TraitDefinition, kTraitCount>& trait_definitions();

inline constexpr int kTraitDefinitionsVersion = 1;

// Loads and validates a definitions data file. Throws DomainError unless it
// holds exactly the eight known traits, four per dimension.
std::array<TraitDefinition, kTraitCount> load_trait_definitions(
    const std::string& path);

constexpr std::size_t index_of(Trait t) noexcept {
  return static_cast<std::size_t>(t);
}
std::string_view trait_key(Trait t);
std::optional<Trait> trait_from_key(std::string_view key);
TraitDimension dimension_of(Trait t);
std::string_view dimension_key(TraitDimension d);  // "competence" / "warmth"

// A 1..7 Likert rating, or N/A when value is empty.
struct TraitRating {
  std::optional<int> value;
  std::string evidence;

  bool applicable() const noexcept { return value.has_value(); }
  friend bool operator==(const TraitRating&, const TraitRating&) = default;
};

struct TraitProfile {
  std::string subject;
  int produced_at_round = 0;
  std::array<TraitRating, kTraitCount> ratings;

  const TraitRating& rating(Trait t) const { return ratings[index_of(t)]; }
  TraitRating& rating(Trait t) { return ratings[index_of(t)]; }

  friend bool operator==(const TraitProfile&, const TraitProfile&) = default;
};

// Profile with every trait N/A, used when inference fails with nothing to
// carry forward.
TraitProfile not_applicable_profile(std::string subject, int round);

}  // namespace eti
