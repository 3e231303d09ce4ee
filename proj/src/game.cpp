#include "eti_arena/game.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>

#include "eti_arena/errors.hpp"

namespace eti {

// ---- Payoff ---------------------------------------------------------------

Payoff Payoff::parse(std::string_view text) {
  std::string_view s = text;
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const auto dot = s.find('.');
  const auto int_part = s.substr(0, dot);
  auto frac_part = dot == std::string_view::npos ? std::string_view{}
                                                 : s.substr(dot + 1);
  const auto digits = [](std::string_view v) {
    return std::all_of(v.begin(), v.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
  };
  if ((int_part.empty() && frac_part.empty()) || !digits(int_part) ||
      !digits(frac_part) || frac_part.size() > 3) {
    throw DomainError("not an exact payoff decimal: '" + std::string(text) + "'");
  }
  std::int64_t whole = 0;
  if (!int_part.empty()) {
    std::from_chars(int_part.data(), int_part.data() + int_part.size(), whole);
  }
  std::int64_t frac = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    frac = frac * 10 + (i < frac_part.size() ? frac_part[i] - '0' : 0);
  }
  const std::int64_t milli = whole * 1000 + frac;
  return from_milli(negative ? -milli : milli);
}

std::string Payoff::to_string() const {
  const std::int64_t mag = milli_ < 0 ? -milli_ : milli_;
  std::string out = milli_ < 0 ? "-" : "";
  out += std::to_string(mag / 1000);
  std::int64_t frac = mag % 1000;
  if (frac != 0) {
    std::string f = std::to_string(frac);
    f.insert(0, 3 - f.size(), '0');
    while (f.back() == '0') f.pop_back();
    out += "." + f;
  }
  return out;
}

// ---- actions ----------------------------------------------------------------

GameKind game_of(Action a) noexcept {
  return (a == Action::Stag || a == Action::Hare) ? GameKind::StagHunt
                                                  : GameKind::PrisonersDilemma;
}

bool is_cooperative(Action a) noexcept {
  return a == Action::Stag || a == Action::Silent;
}

Action cooperative_action(GameKind g) noexcept {
  return g == GameKind::StagHunt ? Action::Stag : Action::Silent;
}

Action defect_action(GameKind g) noexcept {
  return g == GameKind::StagHunt ? Action::Hare : Action::Testify;
}

std::array<Action, 2> actions_of(GameKind g) noexcept {
  return {cooperative_action(g), defect_action(g)};
}

std::string_view to_string(Action a) noexcept {
  switch (a) {
    case Action::Stag: return "Stag";
    case Action::Hare: return "Hare";
    case Action::Silent: return "Silent";
    case Action::Testify: return "Testify";
  }
  return "?";
}

std::string_view to_string(GameKind g) noexcept {
  return g == GameKind::StagHunt ? "Stag Hunt" : "Prisoner's Dilemma";
}

std::string_view short_name(GameKind g) noexcept {
  return g == GameKind::StagHunt ? "sh" : "pd";
}

namespace {
std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}
}  // namespace

std::optional<Action> parse_action(GameKind g, std::string_view name) {
  const auto n = lower(name);
  for (Action a : actions_of(g)) {
    if (lower(to_string(a)) == n) return a;
  }
  return std::nullopt;
}

GameKind parse_game(std::string_view name) {
  const auto n = lower(name);
  if (n == "sh" || n == "stag_hunt" || n == "staghunt" || n == "stag hunt") {
    return GameKind::StagHunt;
  }
  if (n == "pd" || n == "prisoners_dilemma" || n == "prisonersdilemma" ||
      n == "prisoner's dilemma") {
    return GameKind::PrisonersDilemma;
  }
  throw DomainError("unknown game '" + std::string(name) + "'");
}

// ---- payoff tables ----------------------------------------------------------

namespace {
using payoff_literals::operator""_pay;

constexpr PayoffPair cell(Payoff a, Payoff o) { return {a, o}; }
}  // namespace

PayoffTable PayoffTable::stag_hunt() {
  Cells c{};
  // agent Stag
  c[0][0] = {cell(5_pay, 5_pay), cell(0_pay, 0_pay)};
  c[0][1] = {cell(0_pay, 2_pay), cell(0_pay, 0_pay)};
  // agent Hare
  c[1][0] = {cell(2_pay, 0_pay), cell(2_pay, 0_pay)};
  c[1][1] = {cell(2_pay, 2_pay), cell(2_pay, 0_pay)};
  return PayoffTable(GameKind::StagHunt, c);
}

PayoffTable PayoffTable::prisoners_dilemma() {
  Cells c{};
  // agent Silent
  c[0][0] = {cell(-0.5_pay, -0.5_pay), cell(-0.5_pay, -5_pay)};
  c[0][1] = {cell(-10_pay, 0_pay), cell(-0.5_pay, -5_pay)};
  // agent Testify
  c[1][0] = {cell(0_pay, -10_pay), cell(-5_pay, -5_pay)};
  c[1][1] = {cell(-2_pay, -2_pay), cell(-5_pay, -10_pay)};
  return PayoffTable(GameKind::PrisonersDilemma, c);
}

PayoffTable PayoffTable::standard(GameKind g) {
  return g == GameKind::StagHunt ? stag_hunt() : prisoners_dilemma();
}

PayoffPair PayoffTable::lookup(Action agent, Action opponent,
                               bool opponent_success) const {
  if (game_of(agent) != game_ || game_of(opponent) != game_) {
    throw DomainError("action does not belong to " + std::string(to_string(game_)));
  }
  return cells_[is_cooperative(agent) ? 0 : 1][is_cooperative(opponent) ? 0 : 1]
               [opponent_success ? 0 : 1];
}

PayoffTable PayoffTable::scaled(double factor) const {
  Cells c = cells_;
  for (auto& by_opp : c)
    for (auto& by_success : by_opp)
      for (auto& p : by_success) {
        p.agent = Payoff::from_double(p.agent.value() * factor);
        p.opponent = Payoff::from_double(p.opponent.value() * factor);
      }
  return PayoffTable(game_, c);
}

// ---- opponent ---------------------------------------------------------------

void OpponentPolicy::validate() const {
  const auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!ok(cooperation) || !ok(competence)) {
    throw DomainError("opponent probabilities must lie in [0, 1]");
  }
}

const OpponentPolicy& SwitchSchedule::policy_at(int round) const noexcept {
  if (switched && switch_round && round >= *switch_round) return *switched;
  return initial;
}

void SwitchSchedule::validate(int total_rounds) const {
  initial.validate();
  if (switched.has_value() != switch_round.has_value()) {
    throw DomainError("switched policy and switch_round must be given together");
  }
  if (switched) {
    switched->validate();
    if (*switch_round < 1 || *switch_round > total_rounds) {
      throw DomainError("switch_round must lie in [1, rounds]");
    }
  }
}

OpponentDraw sample_opponent(const OpponentPolicy& policy, GameKind game,
                             Rng& rng) {
  const bool cooperate = rng.bernoulli(policy.cooperation);
  const bool success = rng.bernoulli(policy.competence);
  return {cooperate ? cooperative_action(game) : defect_action(game), success};
}

RoundRecord step(const PayoffTable& table, const SwitchSchedule& schedule,
                 int round, int total_rounds, Action agent_action, Rng& rng) {
  if (round < 1 || round > total_rounds) {
    throw DomainError("round " + std::to_string(round) + " outside [1, " +
                      std::to_string(total_rounds) + "]");
  }
  if (game_of(agent_action) != table.game()) {
    throw DomainError("agent action does not belong to the game");
  }
  const auto draw = sample_opponent(schedule.policy_at(round), table.game(), rng);
  const auto pay = table.lookup(agent_action, draw.intended, draw.success);
  RoundRecord r;
  r.round = round;
  r.agent_action = agent_action;
  r.opponent_intended = draw.intended;
  r.opponent_success = draw.success;
  r.agent_payoff = pay.agent;
  r.opponent_payoff = pay.opponent;
  return r;
}

}  // namespace eti
