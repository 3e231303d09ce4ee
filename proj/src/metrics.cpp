#include "eti_arena/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eti_arena/errors.hpp"
#include "eti_arena/oracle.hpp"

namespace eti {

using nlohmann::json;

GroundTruthTraits ground_truth(const OpponentPolicy& policy) noexcept {
  return {policy.cooperation > 0.5, policy.competence > 0.5};
}

void ConfusionCounts::add(bool predicted, bool truth) noexcept {
  if (predicted && truth) {
    ++tp;
  } else if (predicted) {
    ++fp;
  } else if (truth) {
    ++fn;
  } else {
    ++tn;
  }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

double ConfusionCounts::f1() const noexcept {
  if (tp + fp + fn == 0) return 1.0;  // no positives anywhere: nothing missed
  if (tp == 0) return 0.0;            // P or R is 0 (or undefined)
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double f1(const std::vector<bool>& predictions, const std::vector<bool>& truths) {
  if (predictions.size() != truths.size()) {
    throw DomainError("f1: prediction and truth lengths differ");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    c.add(predictions[i], truths[i]);
  }
  return c.f1();
}

namespace {

PayoffTable table_for(const RunLog& run) {
  return PayoffTable::standard(run.config.game);
}

}  // namespace

ConfusionCounts choice_confusion(const RunLog& run, RoundWindow window) {
  const auto table = table_for(run);
  ConfusionCounts c;
  for (const auto& r : run.rounds) {
    if (!window.contains(r.round)) continue;
    const Action best = best_response(table, run.config.schedule.policy_at(r.round));
    c.add(is_cooperative(r.agent_action), is_cooperative(best));
  }
  return c;
}

double choice_optimality_f1(const RunLog& run, RoundWindow window) {
  return choice_confusion(run, window).f1();
}

std::vector<std::optional<double>> payoff_deviation(const RunLog& run,
                                                    RoundWindow window) {
  const auto table = table_for(run);
  std::vector<std::optional<double>> out;
  double optimal = 0.0;
  double actual = 0.0;
  for (const auto& r : run.rounds) {
    if (!window.contains(r.round)) continue;
    const auto& policy = run.config.schedule.policy_at(r.round);
    optimal += expected_payoff(table, best_response(table, policy), policy);
    actual += r.agent_payoff.value();
    if (std::fabs(optimal) < kDeviationEpsilon) {
      out.push_back(std::nullopt);
    } else {
      out.push_back((optimal - actual) / std::fabs(optimal));
    }
  }
  return out;
}

std::vector<CiPoint> mean_ci95(const std::vector<std::vector<double>>& per_run) {
  if (per_run.size() < 2) {
    throw DomainError("a 95% confidence interval needs at least two runs");
  }
  const std::size_t len = per_run.front().size();
  for (const auto& row : per_run) {
    if (row.size() != len) throw DomainError("runs have different lengths");
  }
  std::vector<CiPoint> out;
  out.reserve(len);
  std::vector<double> column(per_run.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t k = 0; k < per_run.size(); ++k) column[k] = per_run[k][t];
    out.push_back(mean_ci95(std::span<const double>(column)));
  }
  return out;
}

TraitProbeCounts trait_probe_counts(const RunLog& run, RoundWindow window) {
  TraitProbeCounts c;
  for (const auto& r : run.rounds) {
    if (!window.contains(r.round)) continue;
    if (!r.probe) {
      ++c.missing;
      continue;
    }
    const auto truth = ground_truth(run.config.schedule.policy_at(r.round));
    c.cooperative.add(r.probe->predicted_cooperative, truth.cooperative);
    c.competent.add(r.probe->predicted_competent, truth.competent);
    ++c.scored;
  }
  return c;
}

namespace {

std::optional<CiPoint> ci_or_point(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  if (v.size() == 1) return CiPoint{v[0], v[0], v[0], 1};
  return mean_ci95(std::span<const double>(v));
}

}  // namespace

MetricsSummary summarize(std::span<const RunLog> runs, RoundWindow window) {
  MetricsSummary s;
  s.window = window;
  std::vector<const RunLog*> ok;
  for (const auto& run : runs) {
    if (s.condition.empty()) s.condition = run.config.condition_label();
    if (run.complete()) {
      ok.push_back(&run);
    } else {
      ++s.n_failed;
      s.exclusions.push_back(run.run_id + ": " + run.failure);
    }
  }
  s.n_runs = static_cast<int>(ok.size());
  s.unreliable = !runs.empty() &&
                 static_cast<double>(s.n_failed) > 0.2 * static_cast<double>(runs.size());
  if (ok.empty()) return s;

  const int total_rounds = ok.front()->config.rounds;
  const int first = std::max(1, window.first);
  const int last = std::min(total_rounds, window.last);
  for (int t = first; t <= last; ++t) s.rounds.push_back(t);
  const RoundWindow w{first, last};

  ConfusionCounts pooled_choice;
  ConfusionCounts pooled_coop;
  ConfusionCounts pooled_comp;
  const std::size_t len = s.rounds.size();
  std::vector<std::vector<double>> dev_by_round(len);
  std::vector<std::vector<double>> optimal_by_round(len);
  std::vector<ConfusionCounts> choice_by_round(len);
  std::vector<ConfusionCounts> coop_by_round(len);
  std::vector<ConfusionCounts> comp_by_round(len);
  std::vector<double> final_dev;

  for (const RunLog* run : ok) {
    const auto choice = choice_confusion(*run, w);
    pooled_choice += choice;
    s.choice_f1_per_run.push_back(choice.f1());

    const auto probes = trait_probe_counts(*run, w);
    pooled_coop += probes.cooperative;
    pooled_comp += probes.competent;
    s.probes_scored += probes.scored;
    s.probes_missing += probes.missing;

    const auto dev = payoff_deviation(*run, w);
    for (std::size_t i = 0; i < dev.size() && i < len; ++i) {
      if (dev[i]) dev_by_round[i].push_back(*dev[i]);
    }
    if (!dev.empty() && dev.back()) {
      final_dev.push_back(*dev.back());
    }

    const auto table = PayoffTable::standard(run->config.game);
    for (const auto& r : run->rounds) {
      if (!w.contains(r.round)) continue;
      const auto i = static_cast<std::size_t>(r.round - first);
      const auto& policy = run->config.schedule.policy_at(r.round);
      const Action best = best_response(table, policy);
      choice_by_round[i].add(is_cooperative(r.agent_action), is_cooperative(best));
      optimal_by_round[i].push_back(r.agent_action == best ? 1.0 : 0.0);
      if (r.probe) {
        const auto truth = ground_truth(policy);
        coop_by_round[i].add(r.probe->predicted_cooperative, truth.cooperative);
        comp_by_round[i].add(r.probe->predicted_competent, truth.competent);
      }
    }
  }

  s.trait_f1_cooperative = pooled_coop.f1();
  s.trait_f1_competent = pooled_comp.f1();
  s.choice_f1_pooled = pooled_choice.f1();
  s.choice_f1 = std::accumulate(s.choice_f1_per_run.begin(),
                                s.choice_f1_per_run.end(), 0.0) /
                static_cast<double>(s.choice_f1_per_run.size());
  for (std::size_t i = 0; i < len; ++i) {
    s.deviation_series.push_back(ci_or_point(dev_by_round[i]));
    s.choice_f1_series.push_back(choice_by_round[i].f1());
    s.optimal_rate_series.push_back(ci_or_point(optimal_by_round[i]));
    s.trait_f1_cooperative_series.push_back(coop_by_round[i].f1());
    s.trait_f1_competent_series.push_back(comp_by_round[i].f1());
  }
  s.final_deviation_per_run = final_dev;
  s.final_deviation = ci_or_point(final_dev);
  return s;
}

namespace {

json ci_json(const std::optional<CiPoint>& p) {
  if (!p) return nullptr;
  return json{{"mean", p->mean}, {"lo", p->lo}, {"hi", p->hi}, {"n", p->n}};
}

}  // namespace

json summary_to_json(const MetricsSummary& s) {
  json dev = json::array();
  for (std::size_t i = 0; i < s.rounds.size(); ++i) {
    json row = ci_json(s.deviation_series[i]);
    if (row.is_null()) row = json{{"mean", nullptr}};
    row["round"] = s.rounds[i];
    row["choice_f1"] = s.choice_f1_series[i];
    row["optimal_rate"] = ci_json(s.optimal_rate_series[i]);
    row["trait_f1_cooperative"] = s.trait_f1_cooperative_series[i];
    row["trait_f1_competent"] = s.trait_f1_competent_series[i];
    dev.push_back(std::move(row));
  }
  return json{
      {"condition", s.condition},
      {"window", {{"first", s.window.first},
                  {"last", s.rounds.empty() ? s.window.first : s.rounds.back()}}},
      {"n_runs", s.n_runs},
      {"n_failed", s.n_failed},
      {"unreliable", s.unreliable},
      {"exclusions", s.exclusions},
      {"trait_f1", {{"cooperative", s.trait_f1_cooperative},
                    {"competent", s.trait_f1_competent}}},
      {"probes_scored", s.probes_scored},
      {"probes_missing", s.probes_missing},
      {"choice_f1", s.choice_f1},
      {"choice_f1_pooled", s.choice_f1_pooled},
      {"choice_f1_per_run", s.choice_f1_per_run},
      {"final_deviation", ci_json(s.final_deviation)},
      {"final_deviation_per_run", s.final_deviation_per_run},
      {"series", std::move(dev)},
  };
}

ConditionComparison compare_conditions(const MetricsSummary& a,
                                       const MetricsSummary& b) {
  const auto test = [](const std::vector<double>& x,
                       const std::vector<double>& y) -> std::optional<WelchResult> {
    if (x.size() < 2 || y.size() < 2) return std::nullopt;
    return welch_t_test(x, y);
  };
  return {test(a.choice_f1_per_run, b.choice_f1_per_run),
          test(a.final_deviation_per_run, b.final_deviation_per_run)};
}

}  // namespace eti
