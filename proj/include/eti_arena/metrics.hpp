#pragma once

#include <climits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eti_arena/experiment.hpp"
#include "eti_arena/stats.hpp"

namespace eti {

struct GroundTruthTraits {
  bool cooperative;  // p_x > 0.5
  bool competent;    // p_i > 0.5
};

GroundTruthTraits ground_truth(const OpponentPolicy& policy) noexcept;

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;

  void add(bool predicted, bool truth) noexcept;
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
  // 2PR/(P+R) with `true` as the positive class. 0 when P+R is 0 or when
  // precision or recall is undefined; 1 when neither stream has a positive.
  double f1() const noexcept;
};

// Throws DomainError on length mismatch.
double f1(const std::vector<bool>& predictions, const std::vector<bool>& truths);

// Inclusive round range.
struct RoundWindow {
  int first = 1;
  int last = INT_MAX;
  bool contains(int round) const noexcept {
    return round >= first && round <= last;
  }
};

ConfusionCounts choice_confusion(const RunLog& run, RoundWindow window = {});
// Positive class: cooperative action. Truth: best response under the policy in
// effect at each round.
double choice_optimality_f1(const RunLog& run, RoundWindow window = {});

// D(t) = (V_opt(t) - V_actual(t)) / |V_opt(t)|, cumulative from window.first;
// nullopt where |V_opt(t)| < 1e-9. Index i corresponds to round window.first+i.
std::vector<std::optional<double>> payoff_deviation(const RunLog& run,
                                                    RoundWindow window = {});

inline constexpr double kDeviationEpsilon = 1e-9;

// Per-round CI across runs; every row must have the same length.
std::vector<CiPoint> mean_ci95(const std::vector<std::vector<double>>& per_run);

struct TraitProbeCounts {
  ConfusionCounts cooperative;
  ConfusionCounts competent;
  int scored = 0;
  int missing = 0;
};
TraitProbeCounts trait_probe_counts(const RunLog& run, RoundWindow window = {});

struct MetricsSummary {
  std::string condition;
  RoundWindow window;
  int n_runs = 0;  // complete runs used
  int n_failed = 0;
  bool unreliable = false;  // more than 20% of runs failed
  std::vector<std::string> exclusions;

  double trait_f1_cooperative = 0.0;  // pooled over rounds and runs
  double trait_f1_competent = 0.0;
  int probes_scored = 0;
  int probes_missing = 0;

  double choice_f1 = 0.0;  // mean of per-run F1
  double choice_f1_pooled = 0.0;
  std::vector<double> choice_f1_per_run;

  std::vector<int> rounds;  // round numbers of the series below
  std::vector<std::optional<CiPoint>> deviation_series;
  std::vector<double> choice_f1_series;  // pooled across runs per round
  std::vector<std::optional<CiPoint>> optimal_rate_series;  // share of runs choosing optimally
  std::vector<double> trait_f1_cooperative_series;
  std::vector<double> trait_f1_competent_series;

  std::optional<CiPoint> final_deviation;
  std::vector<double> final_deviation_per_run;
};

MetricsSummary summarize(std::span<const RunLog> runs, RoundWindow window = {});
nlohmann::json summary_to_json(const MetricsSummary& s);

// A test is absent when either side has fewer than two values (e.g. the
// deviation is undefined for every run).
struct ConditionComparison {
  std::optional<WelchResult> choice_f1;
  std::optional<WelchResult> final_deviation;
};
ConditionComparison compare_conditions(const MetricsSummary& a,
                                       const MetricsSummary& b);

}  // namespace eti
