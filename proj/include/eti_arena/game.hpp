#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "eti_arena/payoff.hpp"
#include "eti_arena/rng.hpp"
#include "eti_arena/traits.hpp"

namespace eti {

enum class GameKind { PrisonersDilemma, StagHunt };

// Every action belongs to exactly one game.
enum class Action { Stag, Hare, Silent, Testify };

GameKind game_of(Action a) noexcept;
bool is_cooperative(Action a) noexcept;
Action cooperative_action(GameKind g) noexcept;
Action defect_action(GameKind g) noexcept;
// Cooperative action first.
std::array<Action, 2> actions_of(GameKind g) noexcept;

std::string_view to_string(Action a) noexcept;
std::string_view to_string(GameKind g) noexcept;       // "Stag Hunt"
std::string_view short_name(GameKind g) noexcept;      // "sh" / "pd"
// Case-insensitive; nullopt if the name is not an action of `g`.
std::optional<Action> parse_action(GameKind g, std::string_view name);
// Accepts "sh", "pd", "stag_hunt", "prisoners_dilemma" and display names.
GameKind parse_game(std::string_view name);

struct PayoffPair {
  Payoff agent;
  Payoff opponent;
  friend bool operator==(const PayoffPair&, const PayoffPair&) = default;
};

// (agent action, opponent intended action, opponent success) -> payoffs.
// The agent always executes successfully; "failure" columns refer to the
// opponent's execution draw.
class PayoffTable {
 public:
  // cells[agent_coop ? 0 : 1][opp_coop ? 0 : 1][success ? 0 : 1]
  using Cells = std::array<std::array<std::array<PayoffPair, 2>, 2>, 2>;

  PayoffTable(GameKind game, const Cells& cells) : game_(game), cells_(cells) {}

  static PayoffTable stag_hunt();
  static PayoffTable prisoners_dilemma();
  static PayoffTable standard(GameKind g);

  GameKind game() const noexcept { return game_; }

  // Throws DomainError if either action belongs to another game.
  PayoffPair lookup(Action agent, Action opponent, bool opponent_success) const;

  // Every cell multiplied by `factor` (rounded to thousandths).
  PayoffTable scaled(double factor) const;

 private:
  GameKind game_;
  Cells cells_;
};

// Convenience wrapper with the (agent, opponent) pair signature.
inline PayoffPair payoff(const PayoffTable& table, Action agent,
                         Action opponent, bool opponent_success) {
  return table.lookup(agent, opponent, opponent_success);
}

struct OpponentPolicy {
  double cooperation = 1.0;  // chance of choosing the cooperative action
  double competence = 1.0;   // chance the chosen action executes successfully

  void validate() const;  // throws DomainError outside [0, 1]
  friend bool operator==(const OpponentPolicy&, const OpponentPolicy&) = default;
};

// Opponent parameters, optionally switching to `switched` from `switch_round`
// on (inclusive).
struct SwitchSchedule {
  OpponentPolicy initial;
  std::optional<OpponentPolicy> switched;
  std::optional<int> switch_round;

  static SwitchSchedule fixed(OpponentPolicy p) { return {p, {}, {}}; }
  static SwitchSchedule switching(OpponentPolicy before, OpponentPolicy after,
                                  int at_round) {
    return {before, after, at_round};
  }

  const OpponentPolicy& policy_at(int round) const noexcept;
  void validate(int total_rounds) const;
  friend bool operator==(const SwitchSchedule&, const SwitchSchedule&) = default;
};

struct OpponentDraw {
  Action intended;
  bool success;
};

// Consumes exactly two uniforms: action first, then execution success.
OpponentDraw sample_opponent(const OpponentPolicy& policy, GameKind game,
                             Rng& rng);

struct ProbeResult {
  bool predicted_cooperative = false;
  bool predicted_competent = false;
  std::string raw;
  friend bool operator==(const ProbeResult&, const ProbeResult&) = default;
};

struct RoundRecord {
  int round = 0;  // 1-based
  Action agent_action = Action::Stag;
  Action opponent_intended = Action::Stag;
  bool opponent_success = true;
  Payoff agent_payoff;
  Payoff opponent_payoff;
  std::optional<ProbeResult> probe;
  std::optional<TraitProfile> profile_snapshot;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

// One round against the scripted opponent. Throws DomainError when `round` is
// outside [1, total_rounds] or the action belongs to another game.
RoundRecord step(const PayoffTable& table, const SwitchSchedule& schedule,
                 int round, int total_rounds, Action agent_action, Rng& rng);

}  // namespace eti
