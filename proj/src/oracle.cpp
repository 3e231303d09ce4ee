#include "eti_arena/oracle.hpp"

#include "eti_arena/errors.hpp"

namespace eti {

double expected_payoff(const PayoffTable& table, Action action,
                       const OpponentPolicy& policy) {
  if (game_of(action) != table.game()) {
    throw DomainError("action does not belong to the table's game");
  }
  const GameKind g = table.game();
  double total = 0.0;
  for (bool coop : {true, false}) {
    const double p_act = coop ? policy.cooperation : 1.0 - policy.cooperation;
    const Action opp = coop ? cooperative_action(g) : defect_action(g);
    for (bool success : {true, false}) {
      const double p_ok = success ? policy.competence : 1.0 - policy.competence;
      total += p_act * p_ok * table.lookup(action, opp, success).agent.value();
    }
  }
  return total;
}

Action best_response(const PayoffTable& table, const OpponentPolicy& policy) {
  const GameKind g = table.game();
  const double coop = expected_payoff(table, cooperative_action(g), policy);
  const double defect = expected_payoff(table, defect_action(g), policy);
  return defect > coop ? defect_action(g) : cooperative_action(g);
}

ExpectedPayoffReport expected_payoff_report(const PayoffTable& table,
                                            const OpponentPolicy& policy) {
  const GameKind g = table.game();
  ExpectedPayoffReport r{g, policy, {}, best_response(table, policy)};
  const auto acts = actions_of(g);
  for (std::size_t i = 0; i < acts.size(); ++i) {
    r.per_action[i] = {acts[i], expected_payoff(table, acts[i], policy)};
  }
  return r;
}

std::vector<double> optimal_cumulative_series(const PayoffTable& table,
                                              const SwitchSchedule& schedule,
                                              int rounds) {
  std::vector<double> out;
  out.reserve(rounds > 0 ? rounds : 0);
  double total = 0.0;
  for (int t = 1; t <= rounds; ++t) {
    const auto& policy = schedule.policy_at(t);
    total += expected_payoff(table, best_response(table, policy), policy);
    out.push_back(total);
  }
  return out;
}

double optimal_cumulative(const PayoffTable& table,
                          const SwitchSchedule& schedule, int through_round) {
  if (through_round < 1) throw DomainError("through_round must be >= 1");
  return optimal_cumulative_series(table, schedule, through_round).back();
}

}  // namespace eti
