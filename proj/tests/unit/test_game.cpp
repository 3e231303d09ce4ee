#include <gtest/gtest.h>

#include <map>
#include <tuple>

#include "eti_arena/errors.hpp"
#include "eti_arena/game.hpp"
#include "eti_arena/rng.hpp"

using namespace eti;
using payoff_literals::operator""_pay;

namespace {

// Reference payoff tables, typed in by hand.
struct Cell {
  Action agent;
  Action opponent;
  bool success;
  double agent_payoff;
  double opponent_payoff;
};

const Cell kStagHunt[] = {
    {Action::Stag, Action::Stag, true, 5, 5},   {Action::Stag, Action::Stag, false, 0, 0},
    {Action::Stag, Action::Hare, true, 0, 2},   {Action::Stag, Action::Hare, false, 0, 0},
    {Action::Hare, Action::Stag, true, 2, 0},   {Action::Hare, Action::Stag, false, 2, 0},
    {Action::Hare, Action::Hare, true, 2, 2},   {Action::Hare, Action::Hare, false, 2, 0},
};

const Cell kPrisoners[] = {
    {Action::Testify, Action::Silent, true, 0, -10},
    {Action::Testify, Action::Silent, false, -5, -5},
    {Action::Testify, Action::Testify, true, -2, -2},
    {Action::Testify, Action::Testify, false, -5, -10},
    {Action::Silent, Action::Silent, true, -0.5, -0.5},
    {Action::Silent, Action::Silent, false, -0.5, -5},
    {Action::Silent, Action::Testify, true, -10, 0},
    {Action::Silent, Action::Testify, false, -0.5, -5},
};

}  // namespace

TEST(PayoffTable, StagHuntMatchesReferenceTable) {
  const auto t = PayoffTable::stag_hunt();
  for (const auto& c : kStagHunt) {
    const auto p = t.lookup(c.agent, c.opponent, c.success);
    EXPECT_EQ(p.agent, Payoff::from_double(c.agent_payoff));
    EXPECT_EQ(p.opponent, Payoff::from_double(c.opponent_payoff));
  }
}

TEST(PayoffTable, PrisonersDilemmaMatchesReferenceTable) {
  const auto t = PayoffTable::prisoners_dilemma();
  for (const auto& c : kPrisoners) {
    const auto p = t.lookup(c.agent, c.opponent, c.success);
    EXPECT_EQ(p.agent, Payoff::from_double(c.agent_payoff));
    EXPECT_EQ(p.opponent, Payoff::from_double(c.opponent_payoff));
  }
}

TEST(PayoffTable, SpecExamples) {
  const auto sh = PayoffTable::stag_hunt();
  const auto pd = PayoffTable::prisoners_dilemma();
  EXPECT_EQ(payoff(sh, Action::Stag, Action::Stag, true), (PayoffPair{5_pay, 5_pay}));
  EXPECT_EQ(payoff(sh, Action::Hare, Action::Hare, false), (PayoffPair{2_pay, 0_pay}));
  EXPECT_EQ(payoff(pd, Action::Silent, Action::Testify, true), (PayoffPair{-10_pay, 0_pay}));
  EXPECT_EQ(payoff(pd, Action::Testify, Action::Silent, false), (PayoffPair{-5_pay, -5_pay}));
}

TEST(PayoffTable, CrossGameActionsAreRejected) {
  const auto sh = PayoffTable::stag_hunt();
  EXPECT_THROW(sh.lookup(Action::Silent, Action::Stag, true), DomainError);
  EXPECT_THROW(sh.lookup(Action::Stag, Action::Testify, true), DomainError);
  const auto pd = PayoffTable::prisoners_dilemma();
  EXPECT_THROW(pd.lookup(Action::Hare, Action::Silent, false), DomainError);
}

TEST(PayoffTable, ScaledMultipliesEveryCell) {
  const auto t = PayoffTable::prisoners_dilemma().scaled(2.0);
  EXPECT_EQ(t.lookup(Action::Silent, Action::Silent, true).agent, -1_pay);
  EXPECT_EQ(t.lookup(Action::Silent, Action::Testify, true).agent, -20_pay);
}

TEST(Payoff, ExactDecimalArithmeticAndText) {
  Payoff sum;
  for (int i = 0; i < 50; ++i) sum += -0.5_pay;
  EXPECT_EQ(sum, -25_pay);
  EXPECT_EQ((-0.5_pay).to_string(), "-0.5");
  EXPECT_EQ((5_pay).to_string(), "5");
  EXPECT_EQ(Payoff::from_milli(12125).to_string(), "12.125");
  EXPECT_EQ(Payoff::from_milli(-10).to_string(), "-0.01");
  EXPECT_EQ(Payoff::parse("-0.5"), -0.5_pay);
  EXPECT_EQ(Payoff::parse("12.125"), Payoff::from_milli(12125));
  EXPECT_THROW(Payoff::parse("abc"), DomainError);
  EXPECT_THROW(Payoff::parse("1.2345"), DomainError);
  EXPECT_THROW(Payoff::parse(""), DomainError);
}

TEST(Payoff, TextRoundTrip) {
  for (std::int64_t m = -20000; m <= 20000; m += 37) {
    const auto p = Payoff::from_milli(m);
    EXPECT_EQ(Payoff::parse(p.to_string()), p) << m;
  }
}

TEST(Actions, NamesAndMembership) {
  EXPECT_EQ(parse_action(GameKind::StagHunt, "stag"), Action::Stag);
  EXPECT_EQ(parse_action(GameKind::StagHunt, "HARE"), Action::Hare);
  EXPECT_EQ(parse_action(GameKind::StagHunt, "Silent"), std::nullopt);
  EXPECT_EQ(parse_action(GameKind::PrisonersDilemma, "testify"), Action::Testify);
  EXPECT_TRUE(is_cooperative(Action::Stag));
  EXPECT_TRUE(is_cooperative(Action::Silent));
  EXPECT_FALSE(is_cooperative(Action::Hare));
  EXPECT_FALSE(is_cooperative(Action::Testify));
  EXPECT_EQ(actions_of(GameKind::PrisonersDilemma)[0], Action::Silent);
  EXPECT_EQ(parse_game("sh"), GameKind::StagHunt);
  EXPECT_EQ(parse_game("Prisoner's Dilemma"), GameKind::PrisonersDilemma);
  EXPECT_THROW(parse_game("chess"), DomainError);
}

TEST(Schedule, SwitchIsInclusive) {
  const auto s = SwitchSchedule::switching({1, 1}, {1, 0}, 25);
  EXPECT_EQ(s.policy_at(24), (OpponentPolicy{1, 1}));
  EXPECT_EQ(s.policy_at(25), (OpponentPolicy{1, 0}));
  EXPECT_EQ(s.policy_at(50), (OpponentPolicy{1, 0}));
  EXPECT_NO_THROW(s.validate(50));
  EXPECT_THROW(s.validate(20), DomainError);
  EXPECT_THROW(SwitchSchedule::fixed({1.5, 1}).validate(50), DomainError);
  EXPECT_THROW(SwitchSchedule::fixed({0.5, -0.1}).validate(50), DomainError);
}

TEST(Sampling, DegeneratePolicies) {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto a = sample_opponent({1, 1}, GameKind::StagHunt, rng);
    EXPECT_EQ(a.intended, Action::Stag);
    EXPECT_TRUE(a.success);
    const auto b = sample_opponent({0, 0}, GameKind::PrisonersDilemma, rng);
    EXPECT_EQ(b.intended, Action::Testify);
    EXPECT_FALSE(b.success);
  }
}

TEST(Sampling, ActionDrawPrecedesSuccessDraw) {
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 500; ++i) {
    const auto d = sample_opponent({0.3, 0.6}, GameKind::StagHunt, a);
    const bool coop = b.uniform() < 0.3;
    const bool ok = b.uniform() < 0.6;
    EXPECT_EQ(d.intended, coop ? Action::Stag : Action::Hare);
    EXPECT_EQ(d.success, ok);
  }
}

TEST(Sampling, EmpiricalFrequencyNearParameter) {
  Rng rng(2024);
  int coop = 0;
  int success = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto d = sample_opponent({0.85, 0.85}, GameKind::StagHunt, rng);
    coop += d.intended == Action::Stag;
    success += d.success;
  }
  EXPECT_NEAR(coop / double(n), 0.85, 0.02);
  EXPECT_NEAR(success / double(n), 0.85, 0.02);
}

TEST(Step, SpecExamples) {
  Rng rng(1);
  const auto sh = PayoffTable::stag_hunt();
  const auto r = step(sh, SwitchSchedule::fixed({1, 1}), 3, 50, Action::Stag, rng);
  EXPECT_EQ(r.round, 3);
  EXPECT_EQ(r.agent_payoff, 5_pay);
  EXPECT_EQ(r.opponent_payoff, 5_pay);

  const auto pd = PayoffTable::prisoners_dilemma();
  const auto sw = SwitchSchedule::switching({1, 1}, {0, 1}, 25);
  const auto q = step(pd, sw, 25, 50, Action::Silent, rng);
  EXPECT_EQ(q.opponent_intended, Action::Testify);
  EXPECT_EQ(q.agent_payoff, -10_pay);
  EXPECT_EQ(q.opponent_payoff, 0_pay);

  const auto f = step(sh, SwitchSchedule::fixed({1, 0}), 1, 50, Action::Stag, rng);
  EXPECT_EQ(f.agent_payoff, 0_pay);
  EXPECT_EQ(f.opponent_payoff, 0_pay);
}

TEST(Step, RoundOutOfBounds) {
  Rng rng(1);
  const auto sh = PayoffTable::stag_hunt();
  EXPECT_THROW(step(sh, SwitchSchedule::fixed({1, 1}), 0, 50, Action::Stag, rng), DomainError);
  EXPECT_THROW(step(sh, SwitchSchedule::fixed({1, 1}), 51, 50, Action::Stag, rng), DomainError);
  EXPECT_THROW(step(sh, SwitchSchedule::fixed({1, 1}), 1, 50, Action::Silent, rng), DomainError);
}

TEST(Step, ReproducibleForSameSeedAndActions) {
  const auto pd = PayoffTable::prisoners_dilemma();
  const auto sched = SwitchSchedule::fixed({0.5, 0.5});
  Rng a(derive_seed(11, 3));
  Rng b(derive_seed(11, 3));
  for (int t = 1; t <= 50; ++t) {
    const Action act = t % 3 ? Action::Silent : Action::Testify;
    EXPECT_EQ(step(pd, sched, t, 50, act, a), step(pd, sched, t, 50, act, b));
  }
}

TEST(Seeds, DerivedSeedsDiffer) {
  std::map<std::uint64_t, int> seen;
  for (std::uint64_t s = 0; s < 4; ++s) {
    for (std::uint64_t k = 0; k < 100; ++k) seen[derive_seed(s, k)]++;
  }
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_EQ(derive_seed(5, 6), derive_seed(5, 6));
}
