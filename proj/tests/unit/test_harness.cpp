#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "eti_arena/errors.hpp"
#include "eti_arena/harness.hpp"
#include "eti_arena/oracle.hpp"

using namespace eti;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small(GameKind g, OpponentPolicy p, AgentMode mode, int rounds = 12,
                       int reps = 3) {
  ExperimentConfig cfg;
  cfg.game = g;
  cfg.schedule = SwitchSchedule::fixed(p);
  cfg.mode = mode;
  cfg.rounds = rounds;
  cfg.repetitions = reps;
  cfg.seed = 2024;
  return cfg;
}

// Wraps the mock and throws from the n-th call on.
class FailingBackend final : public GenerationBackend {
 public:
  FailingBackend(long fail_at, bool transport) : fail_at_(fail_at), transport_(transport) {}
  Completion complete(const ChatPrompt& prompt, const DecodingParams& params) override {
    if (++calls_ >= fail_at_) {
      if (transport_) throw TransportError("HTTP 500");
      return {"garbage", 1, 1};
    }
    return mock_.complete(prompt, params);
  }
  std::size_t max_concurrency() const noexcept override { return 1; }
  std::string name() const override { return "failing"; }

 private:
  MockFrequencyBackend mock_{1};
  long fail_at_;
  bool transport_;
  long calls_ = 0;
};


fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("eti_arena_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(RunGame, DeterministicForSeed) {
  MockFrequencyBackend mock(1);
  const auto cfg = small(GameKind::StagHunt, {0.85, 0.15}, AgentMode::ETI);
  const auto a = run_game(cfg, 1, mock);
  const auto b = run_game(cfg, 1, mock);
  EXPECT_EQ(a, b);
  EXPECT_EQ(runlog_to_jsonl(a), runlog_to_jsonl(b));
  const auto c = run_game(cfg, 2, mock);
  EXPECT_NE(a.run_seed, c.run_seed);
  EXPECT_EQ(a.run_seed, derive_seed(cfg.seed, 1));
}

TEST(RunGame, StagHuntCooperatorPayoffMatchesSimulation) {
  MockFrequencyBackend mock(1);
  const auto cfg = small(GameKind::StagHunt, {1, 1}, AgentMode::ETI, 50, 1);
  const auto run = run_game(cfg, 0, mock);
  ASSERT_TRUE(run.complete());
  ASSERT_EQ(run.rounds.size(), 50u);
  // Mock plays Hare with no evidence, then Stag forever against a sure cooperator.
  EXPECT_EQ(run.rounds[0].agent_action, Action::Hare);
  double total = 0;
  for (const auto& r : run.rounds) {
    if (r.round > 1) EXPECT_EQ(r.agent_action, Action::Stag);
    total += r.agent_payoff.value();
  }
  EXPECT_DOUBLE_EQ(total, 2.0 + 5.0 * 49);
}

TEST(RunGame, EtiFlowRecordsSnapshotsAndAccounting) {
  MockFrequencyBackend mock(1);
  auto cfg = small(GameKind::PrisonersDilemma, {0, 1}, AgentMode::ETI, 6, 1);
  cfg.final_profile = true;
  const auto run = run_game(cfg, 0, mock);
  ASSERT_EQ(run.profile_history.size(), 6u);
  for (const auto& r : run.rounds) {
    ASSERT_TRUE(r.profile_snapshot);
    EXPECT_EQ(r.profile_snapshot->produced_at_round, r.round);
    ASSERT_TRUE(r.probe);
  }
  // The round-1 profile comes from an empty history.
  EXPECT_EQ(run.rounds[0].profile_snapshot->rating(Trait::Collaboration).value, 4);
  ASSERT_TRUE(run.final_profile);
  EXPECT_EQ(run.final_profile->produced_at_round, 7);
  // inference + decision + probe per round, plus the final inference.
  EXPECT_EQ(run.accounting.calls, 6 * 3 + 1);
  long captured = 0;
  for (const auto& [round, ex] : run.transcript) captured += static_cast<long>(ex.size());
  EXPECT_EQ(captured, run.accounting.calls);

  const auto base = run_game(small(GameKind::PrisonersDilemma, {0, 1}, AgentMode::BaselineCoT, 6, 1), 0, mock);
  EXPECT_EQ(base.accounting.calls, 6 * 2);
  for (const auto& r : base.rounds) EXPECT_FALSE(r.profile_snapshot);
  EXPECT_TRUE(base.profile_history.empty());
}

TEST(RunGame, FailuresEndTheRun) {
  const auto cfg = small(GameKind::StagHunt, {1, 1}, AgentMode::BaselineCoT, 10, 1);
  FailingBackend transport(7, true);
  const auto t = run_game(cfg, 0, transport);
  EXPECT_FALSE(t.complete());
  EXPECT_EQ(t.failure.rfind("transport: ", 0), 0u);
  EXPECT_EQ(t.truncated_at, 4);
  EXPECT_EQ(t.rounds.size(), 3u);

  FailingBackend garbage(3, false);
  const auto g = run_game(cfg, 0, garbage);
  EXPECT_FALSE(g.complete());
  EXPECT_EQ(g.failure.rfind("agent output: ", 0), 0u);
  EXPECT_EQ(g.truncated_at, 2);
}

TEST(Condition, FailedRunsAreFlagged) {
  const auto cfg = small(GameKind::StagHunt, {1, 1}, AgentMode::BaselineCoT, 5, 4);
  FailingBackend backend(25, true);  // runs 0 and 1 finish, 2 fails, 3 fails at once
  const auto r = run_condition(cfg, backend);
  EXPECT_EQ(r.summary.n_runs, 2);
  EXPECT_EQ(r.summary.n_failed, 2);
  EXPECT_TRUE(r.summary.unreliable);
  EXPECT_EQ(r.summary.exclusions.size(), 2u);
}

TEST(Grid, EightConditionsInOrder) {
  const auto grid = expand_grid(small(GameKind::StagHunt, {1, 1}, AgentMode::ETI));
  ASSERT_EQ(grid.size(), 8u);
  EXPECT_EQ(grid[0].schedule.initial, (OpponentPolicy{1, 1}));
  EXPECT_EQ(grid[3].schedule.initial, (OpponentPolicy{0, 0}));
  EXPECT_EQ(grid[5].schedule.initial, (OpponentPolicy{0.85, 0.15}));
  EXPECT_EQ(grid[0].condition_label(), "sh_eti_px1_pi1");
  EXPECT_EQ(grid[7].condition_label(), "sh_eti_px0.15_pi0.15");
}

TEST(Warmup, FrozenStoreAndFreshHistory) {
  MockFrequencyBackend mock(1);
  const auto base = small(GameKind::StagHunt, {1, 1}, AgentMode::ETI, 10, 2);
  const auto r = run_warmup_experiment(base, mock);
  ASSERT_EQ(r.calibration.runs.size(), 2u);
  EXPECT_EQ(r.calibration.runs[0].rounds.size(), static_cast<std::size_t>(kCalibrationRounds));
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& stage1 = r.calibration.runs[k];
    const auto& stage2 = r.warmup.runs[k];
    ASSERT_TRUE(stage1.final_profile);
    ASSERT_TRUE(stage2.seed_profile);
    EXPECT_EQ(stage2.seed_profile->ratings, stage1.final_profile->ratings);
    ASSERT_EQ(stage2.rounds.size(), 10u);
    for (const auto& rec : stage2.rounds) {
      EXPECT_EQ(*rec.profile_snapshot, *stage2.seed_profile);
    }
    EXPECT_EQ(stage2.profile_history.size(), 1u);
    // Informed prior: Stag from the first round.
    EXPECT_EQ(stage2.rounds[0].agent_action, Action::Stag);
  }
  EXPECT_EQ(r.continuous.runs[0].rounds[0].agent_action, Action::Hare);
  EXPECT_EQ(r.baseline.runs[0].config.mode, AgentMode::BaselineCoT);
  EXPECT_NE(r.warmup.condition, r.continuous.condition);
}

TEST(CrossTask, SeededProfileIsNeverUpdated) {
  MockFrequencyBackend mock(1);
  const auto base = small(GameKind::StagHunt, {1, 1}, AgentMode::ETI, 8, 2);
  const auto r = run_crosstask_experiment(base, GameKind::StagHunt, GameKind::PrisonersDilemma, mock);
  EXPECT_EQ(r.source.runs[0].config.game, GameKind::StagHunt);
  EXPECT_EQ(r.transfer.runs[0].config.game, GameKind::PrisonersDilemma);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& t = r.transfer.runs[k];
    ASSERT_TRUE(t.seed_profile);
    EXPECT_EQ(t.seed_profile->subject, r.source.runs[k].final_profile->subject);
    EXPECT_EQ(t.seed_profile->ratings, r.source.runs[k].final_profile->ratings);
    for (const auto& rec : t.rounds) EXPECT_EQ(*rec.profile_snapshot, *t.seed_profile);
  }
  EXPECT_EQ(r.in_task.runs[0].config.profile_policy.kind, ProfilePolicy::Continuous);
  EXPECT_EQ(r.baseline.runs[0].config.mode, AgentMode::BaselineCoT);
  EXPECT_THROW(run_crosstask_experiment(base, GameKind::StagHunt, GameKind::StagHunt, mock),
               DomainError);
}

TEST(Adaptability, SwitchFlipsTheOptimum) {
  MockFrequencyBackend mock(1);
  const auto base = small(GameKind::StagHunt, {1, 1}, AgentMode::ETI, 30, 2);
  const auto r = run_adaptability_experiment(base, {0, 1}, mock, 15);
  const auto& run = r.switched.runs[0];
  EXPECT_EQ(run.rounds[13].opponent_intended, Action::Stag);
  EXPECT_EQ(run.rounds[14].opponent_intended, Action::Hare);
  // Identical seeds: rounds before the switch match the control run.
  for (int t = 0; t < 14; ++t) {
    EXPECT_EQ(run.rounds[t].agent_action, r.control.runs[0].rounds[t].agent_action);
  }
  EXPECT_EQ(r.switched_pre.rounds.front(), 1);
  EXPECT_EQ(r.switched_pre.rounds.back(), 14);
  EXPECT_EQ(r.switched_post.rounds.front(), 15);
  EXPECT_THROW(run_adaptability_experiment(base, {0, 1}, mock, 30), DomainError);
  EXPECT_THROW(run_adaptability_experiment(base, {0, 1}, mock, 1), DomainError);
}

TEST(Persistence, JsonlRoundTrip) {
  MockFrequencyBackend mock(1);
  auto cfg = small(GameKind::PrisonersDilemma, {0.85, 0.15}, AgentMode::ETI, 6, 1);
  cfg.final_profile = true;
  const auto run = run_game(cfg, 0, mock);
  const auto text = runlog_to_jsonl(run);
  EXPECT_EQ(runlog_from_jsonl(text), run);
  EXPECT_EQ(text.find("wall_seconds\":0"), std::string::npos);

  auto j = nlohmann::json::parse(text.substr(0, text.find('\n')));
  EXPECT_EQ(j["type"], "header");
  EXPECT_EQ(j["schema_version"], kRunLogSchemaVersion);
  j["schema_version"] = 99;
  const auto bumped = j.dump() + text.substr(text.find('\n'));
  EXPECT_THROW(runlog_from_jsonl(bumped), SchemaVersionError);
}

TEST(Persistence, ConditionLayoutAndExport) {
  MockFrequencyBackend mock(4);
  const auto cfg = small(GameKind::StagHunt, {1, 1}, AgentMode::ETI, 5, 25);
  const auto r = run_condition(cfg, mock);
  const auto out = temp_dir("layout");
  write_condition(out, r);
  const auto dir = out / r.condition;
  int runs = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    runs += e.path().extension() == ".jsonl";
  }
  EXPECT_EQ(runs, 25);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "rounds.csv"));
  EXPECT_TRUE(fs::exists(dir / "series.csv"));

  const auto back = read_condition_dir(dir);
  ASSERT_EQ(back.size(), 25u);
  EXPECT_EQ(back, r.runs);
  EXPECT_EQ(find_condition_dirs(out), std::vector<fs::path>{dir});

  std::ifstream rounds(dir / "rounds.csv");
  std::string header;
  std::getline(rounds, header);
  EXPECT_EQ(header.rfind("condition,run_id,run_index,round,agent_action", 0), 0u);
  long lines = 0;
  for (std::string l; std::getline(rounds, l);) ++lines;
  EXPECT_EQ(lines, 25 * 5);

  fs::remove(dir / "series.csv");
  const auto s = export_csv(dir);
  EXPECT_EQ(s.n_runs, 25);
  EXPECT_TRUE(fs::exists(dir / "series.csv"));
  std::ifstream summary(dir / "summary.json");
  const auto j = nlohmann::json::parse(summary);
  EXPECT_EQ(config_from_json(j["config"]), cfg);
  fs::remove_all(out);
}

TEST(Config, RoundTripAndUnknownFields) {
  auto cfg = small(GameKind::PrisonersDilemma, {0.85, 0.15}, AgentMode::ETI);
  cfg.schedule = SwitchSchedule::switching({1, 1}, {0, 1}, 5);
  cfg.profile_policy = {ProfilePolicy::FrozenAfterCalibration, 3, "somewhere"};
  cfg.live.api_key = "must-not-appear";
  cfg.transcript = false;
  const auto j = config_to_json(cfg);
  EXPECT_EQ(j.dump().find("must-not-appear"), std::string::npos);
  auto back = config_from_json(j);
  back.live.api_key = cfg.live.api_key;
  EXPECT_EQ(back, cfg);

  auto bad = j;
  bad["colour"] = "blue";
  EXPECT_THROW(config_from_json(bad), DomainError);
  EXPECT_EQ(cfg.condition_label(), "pd_eti_px1_pi1_sw5_px0_pi1_frozen3");
}

TEST(Config, Validation) {
  auto cfg = small(GameKind::StagHunt, {1, 1}, AgentMode::BaselineCoT);
  cfg.profile_policy.kind = ProfilePolicy::CrossTaskTransfer;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = small(GameKind::StagHunt, {1, 1}, AgentMode::ETI);
  cfg.rounds = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg.rounds = 5;
  cfg.schedule = SwitchSchedule::switching({1, 1}, {0, 0}, 9);
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(Accounting, TokensSumOverCalls) {
  MockFrequencyBackend mock(1);
  const auto run = run_game(small(GameKind::StagHunt, {0, 0}, AgentMode::ETI, 4, 1), 0, mock);
  long prompt = 0, completion = 0;
  for (const auto& [round, exchanges] : run.transcript) {
    for (const auto& e : exchanges) {
      const auto c = mock.complete(e.prompt, {});
      prompt += c.prompt_tokens;
      completion += c.completion_tokens;
      EXPECT_EQ(c.text, e.response);
    }
  }
  EXPECT_EQ(run.accounting.prompt_tokens, prompt);
  EXPECT_EQ(run.accounting.completion_tokens, completion);
  EXPECT_FALSE(run.accounting.wall_seconds);
}
