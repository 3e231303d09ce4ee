#pragma once

#include <array>
#include <vector>

#include "eti_arena/game.hpp"

namespace eti {

// Exact expectation over the four (opponent action, success) outcomes.
double expected_payoff(const PayoffTable& table, Action action,
                       const OpponentPolicy& policy);

// Myopic best response. The scripted opponent ignores history, so the per-round
// optimum is also the repeated-game optimum. Exact ties go to the cooperative
// action.
Action best_response(const PayoffTable& table, const OpponentPolicy& policy);

struct ExpectedPayoffReport {
  GameKind game;
  OpponentPolicy policy;
  std::array<std::pair<Action, double>, 2> per_action;  // cooperative first
  Action best;
};

ExpectedPayoffReport expected_payoff_report(const PayoffTable& table,
                                            const OpponentPolicy& policy);

// Sum over rounds 1..through_round of the best response's expected payoff
// under the policy in effect at each round. The oracle knows the switch round.
double optimal_cumulative(const PayoffTable& table,
                          const SwitchSchedule& schedule, int through_round);

// optimal_cumulative for every prefix 1..rounds.
std::vector<double> optimal_cumulative_series(const PayoffTable& table,
                                              const SwitchSchedule& schedule,
                                              int rounds);

}  // namespace eti
