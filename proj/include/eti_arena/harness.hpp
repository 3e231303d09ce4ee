#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eti_arena/experiment.hpp"
#include "eti_arena/metrics.hpp"

namespace eti {

inline constexpr int kRunLogSchemaVersion = 1;

// Builds the backend named by the config (live settings from the environment).
std::unique_ptr<GenerationBackend> make_backend(const ExperimentConfig& cfg);

// Effective parallelism for a condition: the backend hint, lowered by
// ETI_ARENA_CONCURRENCY when set.
std::size_t effective_concurrency(const GenerationBackend& backend);

// One run. Per round t: (ETI) infer a profile from rounds < t and update the
// store; decide; probe (if enabled); step the opponent. The rng is seeded
// with derive_seed(cfg.seed, run_index). Agent or transport failures end the
// run with status Failed instead of throwing.
RunLog run_game(const ExperimentConfig& cfg, int run_index,
                GenerationBackend& backend,
                const TraitProfile* seed_profile = nullptr);

struct ConditionResult {
  std::string condition;
  std::vector<RunLog> runs;
  MetricsSummary summary;
};

// seed_profiles, when non-empty, provides the handed-over profile for run k.
ConditionResult run_condition(const ExperimentConfig& cfg,
                              GenerationBackend& backend,
                              const std::vector<TraitProfile>& seed_profiles = {});

// Writes <out>/<condition>/run_<k>.jsonl, summary.json, rounds.csv, series.csv.
void write_condition(const std::filesystem::path& out, const ConditionResult& r);

// Main-experiment grid: corners {0,1}^2 plus noisy {0.15,0.85}^2.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base);

struct WarmupResult {
  ConditionResult calibration;  // stage 1, 25 rounds
  ConditionResult warmup;       // stage 2, frozen profile, fresh history
  ConditionResult continuous;
  ConditionResult baseline;
};
inline constexpr int kCalibrationRounds = 25;
WarmupResult run_warmup_experiment(const ExperimentConfig& base,
                                   GenerationBackend& backend);

struct CrossTaskResult {
  ConditionResult source;    // stage 1 in the source game
  ConditionResult transfer;  // stage 2 in the target game, seeded, no updates
  ConditionResult in_task;   // continuous ETI in the target game
  ConditionResult baseline;  // baseline in the target game
};
CrossTaskResult run_crosstask_experiment(const ExperimentConfig& base,
                                         GameKind source, GameKind target,
                                         GenerationBackend& backend);

struct AdaptabilityResult {
  ConditionResult switched;
  ConditionResult control;  // same seed, no switch
  int switch_round = 0;
  MetricsSummary switched_pre;
  MetricsSummary switched_post;
  MetricsSummary control_pre;
  MetricsSummary control_post;
};
// `after` takes effect at switch_round; requires base.rounds > switch_round.
AdaptabilityResult run_adaptability_experiment(const ExperimentConfig& base,
                                               const OpponentPolicy& after,
                                               GenerationBackend& backend,
                                               int switch_round = 25);

// ---------------------------------------------------------------------------
// Persistence. Line-delimited JSON: a header with the config, one line per
// profile-history entry and per round, then a footer.

std::string runlog_to_jsonl(const RunLog& log);
RunLog runlog_from_jsonl(std::string_view text);  // SchemaVersionError on mismatch
void write_runlog(const std::filesystem::path& path, const RunLog& log);
RunLog read_runlog(const std::filesystem::path& path);

// run_*.jsonl files of a condition directory, in run-index order.
std::vector<RunLog> read_condition_dir(const std::filesystem::path& dir);
// Condition directories under `root` (those containing run_*.jsonl).
std::vector<std::filesystem::path> find_condition_dirs(
    const std::filesystem::path& root);

// One row per (condition, run, round).
std::string rounds_csv(std::span<const RunLog> runs, const std::string& condition);
// One row per round of the summary series.
std::string series_csv(const MetricsSummary& s);
// Rewrites summary.json, rounds.csv and series.csv from the run logs in `dir`.
MetricsSummary export_csv(const std::filesystem::path& dir);

}  // namespace eti
