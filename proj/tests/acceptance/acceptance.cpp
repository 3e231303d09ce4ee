// Acceptance gate: one PASS/FAIL line per primary criterion, mock backend only.
// Exit status is non-zero when any gated criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "eti_arena/analysis.hpp"
#include "eti_arena/errors.hpp"
#include "eti_arena/harness.hpp"
#include "eti_arena/metrics.hpp"
#include "eti_arena/oracle.hpp"
#include "support/profile_fuzz.hpp"

using namespace eti;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kPayoffTol = 0.0;
constexpr int kMcSamples = 100000;
constexpr double kMcGapFactor = 3.0;
constexpr double kChoiceF1Min = 0.9;
constexpr double kDeviationTol = 1e-12;
constexpr double kTraitF1Min = 0.95;
constexpr double kWelchTol = 1e-6;
constexpr double kIrlsTol = 0.15;
constexpr double kSeparableAucMin = 0.99;
constexpr double kPermutedAucTol = 0.07;
constexpr int kFuzzCases = 500;

constexpr int kRuns = 25;
constexpr int kRounds = 50;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& what) { notes.push_back(what); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ExperimentConfig mock_config(GameKind g, OpponentPolicy p, AgentMode mode) {
  ExperimentConfig cfg;
  cfg.game = g;
  cfg.schedule = SwitchSchedule::fixed(p);
  cfg.mode = mode;
  cfg.rounds = kRounds;
  cfg.repetitions = kRuns;
  cfg.seed = 20240601;
  return cfg;
}

std::string policy_name(GameKind g, OpponentPolicy p) {
  std::ostringstream s;
  s << short_name(g) << "(" << p.cooperation << "," << p.competence << ")";
  return s.str();
}

// ---- 1 ----------------------------------------------------------------------

struct Cell {
  Action agent;
  Action opponent;
  bool success;
  double a;
  double o;
};

Outcome payoff_tables() {
  Outcome out;
  const std::vector<Cell> sh{
      {Action::Stag, Action::Stag, true, 5, 5},   {Action::Stag, Action::Stag, false, 0, 0},
      {Action::Stag, Action::Hare, true, 0, 2},   {Action::Stag, Action::Hare, false, 0, 0},
      {Action::Hare, Action::Stag, true, 2, 0},   {Action::Hare, Action::Stag, false, 2, 0},
      {Action::Hare, Action::Hare, true, 2, 2},   {Action::Hare, Action::Hare, false, 2, 0}};
  const std::vector<Cell> pd{
      {Action::Testify, Action::Silent, true, 0, -10},
      {Action::Testify, Action::Silent, false, -5, -5},
      {Action::Testify, Action::Testify, true, -2, -2},
      {Action::Testify, Action::Testify, false, -5, -10},
      {Action::Silent, Action::Silent, true, -0.5, -0.5},
      {Action::Silent, Action::Silent, false, -0.5, -5},
      {Action::Silent, Action::Testify, true, -10, 0},
      {Action::Silent, Action::Testify, false, -0.5, -5}};
  int cells = 0;
  for (const auto& [table, expected] :
       {std::pair{PayoffTable::stag_hunt(), sh}, std::pair{PayoffTable::prisoners_dilemma(), pd}}) {
    for (const auto& c : expected) {
      const auto got = table.lookup(c.agent, c.opponent, c.success);
      ++cells;
      out.check(std::fabs(got.agent.value() - c.a) <= kPayoffTol &&
                    std::fabs(got.opponent.value() - c.o) <= kPayoffTol,
                std::string(to_string(c.agent)) + "/" + std::string(to_string(c.opponent)) +
                    (c.success ? "/success" : "/failure"));
    }
  }
  out.note(std::to_string(cells) + " cells");
  return out;
}

// ---- 2 ----------------------------------------------------------------------

Outcome oracle_equivalence() {
  Outcome out;
  int compared = 0;
  int skipped = 0;
  for (GameKind g : {GameKind::StagHunt, GameKind::PrisonersDilemma}) {
    const auto table = PayoffTable::standard(g);
    const auto acts = actions_of(g);
    for (int i = 0; i <= 4; ++i) {
      for (int j = 0; j <= 4; ++j) {
        const OpponentPolicy policy{i / 4.0, j / 4.0};
        // Shared opponent draws for both actions; SE of the paired difference.
        Rng rng(derive_seed(7, static_cast<std::uint64_t>(i * 5 + j)));
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int s = 0; s < kMcSamples; ++s) {
          const auto d = sample_opponent(policy, g, rng);
          const double diff = table.lookup(acts[0], d.intended, d.success).agent.value() -
                              table.lookup(acts[1], d.intended, d.success).agent.value();
          sum += diff;
          sum_sq += diff * diff;
        }
        const double mean = sum / kMcSamples;
        const double var = std::max(0.0, sum_sq / kMcSamples - mean * mean);
        const double se = std::sqrt(var / kMcSamples);
        const double gap = expected_payoff(table, acts[0], policy) -
                           expected_payoff(table, acts[1], policy);
        const Action analytic = best_response(table, policy);
        if (std::fabs(gap) > kMcGapFactor * se && std::fabs(gap) > 0.0) {
          ++compared;
          const Action mc = mean >= 0 ? acts[0] : acts[1];
          out.check(mc == analytic, "Monte Carlo disagrees at " + policy_name(g, policy));
        } else {
          ++skipped;
        }
        if (g == GameKind::StagHunt) {
          const double lhs = 5.0 * policy.cooperation * policy.competence;
          const Action law = lhs >= 2.0 ? Action::Stag : Action::Hare;
          out.check(law == analytic, "threshold law at " + policy_name(g, policy));
        }
      }
    }
  }
  out.note(std::to_string(compared) + " points compared, " + std::to_string(skipped) +
           " within noise");
  return out;
}

// ---- 3 ----------------------------------------------------------------------

// The mock's deterministic trajectory against a deterministic opponent,
// replayed from its counting rule without the harness or prompt parsing.
std::vector<Action> mock_trajectory(GameKind g, OpponentPolicy p, int rounds) {
  const auto table = PayoffTable::standard(g);
  std::vector<Action> out;
  for (int t = 1; t <= rounds; ++t) {
    const int n = t - 1;
    const auto est = estimate_from_counts(n, static_cast<int>(p.cooperation) * n,
                                          static_cast<int>(p.competence) * n);
    out.push_back(best_response(table, {est.cooperation, est.competence}));
  }
  return out;
}

Outcome deterministic_optimum() {
  Outcome out;
  MockFrequencyBackend mock;
  for (GameKind g : {GameKind::StagHunt, GameKind::PrisonersDilemma}) {
    const auto table = PayoffTable::standard(g);
    for (OpponentPolicy p : {OpponentPolicy{1, 1}, OpponentPolicy{1, 0}, OpponentPolicy{0, 1},
                             OpponentPolicy{0, 0}}) {
      const Action best = best_response(table, p);
      const auto expected = mock_trajectory(g, p, kRounds);
      int expected_misses = 0;
      int last_miss = 0;
      for (int t = 1; t <= kRounds; ++t) {
        if (expected[t - 1] != best) {
          ++expected_misses;
          last_miss = t;
        }
      }
      const auto r = run_condition(mock_config(g, p, AgentMode::BaselineCoT), mock);
      bool trajectories_match = r.summary.n_runs == kRuns;
      for (const auto& run : r.runs) {
        for (std::size_t t = 0; t < run.rounds.size(); ++t) {
          trajectories_match = trajectories_match && run.rounds[t].agent_action == expected[t];
        }
      }
      const std::string name = policy_name(g, p);
      out.check(trajectories_match, name + " observed misses differ from simulated policy");
      out.check(r.summary.choice_f1_pooled >= kChoiceF1Min,
                name + " choice F1 " + fmt("%.3f", r.summary.choice_f1_pooled) + " < 0.9");
      if (g == GameKind::StagHunt && last_miss < 5) {
        const auto& d = r.summary.final_deviation;
        out.check(d && std::fabs(d->mean) <= kDeviationTol,
                  name + " D(50) = " + (d ? fmt("%.4f", d->mean) : std::string("undefined")) +
                      " != 0");
      }
      out.note(name + ": best " + std::string(to_string(best)) + ", misses/run " +
               std::to_string(expected_misses) + " (simulated), F1 " +
               fmt("%.3f", r.summary.choice_f1_pooled) + ", D(50) " +
               (r.summary.final_deviation ? fmt("%.4f", r.summary.final_deviation->mean)
                                          : std::string("undefined")));
    }
  }
  return out;
}

// ---- 4 ----------------------------------------------------------------------

Outcome trait_probes() {
  Outcome out;
  MockFrequencyBackend mock;
  for (GameKind g : {GameKind::StagHunt, GameKind::PrisonersDilemma}) {
    const auto r = run_condition(mock_config(g, {0.85, 0.85}, AgentMode::ETI), mock);
    const std::string name = policy_name(g, {0.85, 0.85});
    out.check(r.summary.trait_f1_cooperative >= kTraitF1Min, name + " cooperative F1");
    out.check(r.summary.trait_f1_competent >= kTraitF1Min, name + " competent F1");
    out.note(name + ": cooperative " + fmt("%.3f", r.summary.trait_f1_cooperative) +
             ", competent " + fmt("%.3f", r.summary.trait_f1_competent));
  }
  return out;
}

// ---- 5 ----------------------------------------------------------------------

Outcome warmup_contract() {
  Outcome out;
  MockFrequencyBackend mock;
  const auto r =
      run_warmup_experiment(mock_config(GameKind::StagHunt, {0.85, 0.85}, AgentMode::ETI), mock);
  static const std::regex round_line(R"(Round (\d+): You chose)");
  int prompts = 0;
  for (const auto& run : r.warmup.runs) {
    out.check(run.complete(), run.run_id + " failed");
    out.check(run.rounds.size() == static_cast<std::size_t>(kRounds), run.run_id + " length");
    out.check(run.seed_profile.has_value(), run.run_id + " has no seed profile");
    if (!run.seed_profile) continue;
    for (const auto& rec : run.rounds) {
      out.check(rec.profile_snapshot && *rec.profile_snapshot == *run.seed_profile,
                run.run_id + " store changed at round " + std::to_string(rec.round));
    }
    out.check(run.profile_history.size() == 1, run.run_id + " store history grew");
    // Every prompt of round t may only show rounds < t of this stage.
    for (const auto& [round, exchanges] : run.transcript) {
      for (const auto& e : exchanges) {
        ++prompts;
        const std::string& text = e.prompt.user;
        for (auto it = std::sregex_iterator(text.begin(), text.end(), round_line);
             it != std::sregex_iterator(); ++it) {
          const int shown = std::stoi((*it)[1].str());
          out.check(shown < round, run.run_id + " round " + std::to_string(round) +
                                       " prompt shows round " + std::to_string(shown));
        }
        if (round == 1) {
          out.check(text.find(kNoInteractionsMarker) != std::string::npos,
                    run.run_id + " round 1 prompt carries history");
        }
      }
    }
  }
  out.note(std::to_string(r.warmup.runs.size()) + " stage-2 runs, " + std::to_string(prompts) +
           " prompts scanned");
  return out;
}

// ---- 6 ----------------------------------------------------------------------

Outcome adaptability() {
  Outcome out;
  MockFrequencyBackend mock;
  constexpr int kSwitch = 25;
  const auto r = run_adaptability_experiment(
      mock_config(GameKind::StagHunt, {1, 1}, AgentMode::ETI), {1, 0}, mock, kSwitch);
  const auto& cfg = r.switched.runs.front().config;
  const auto table = PayoffTable::standard(cfg.game);
  int flip = 0;
  for (int t = 2; t <= kRounds; ++t) {
    if (best_response(table, cfg.schedule.policy_at(t)) !=
        best_response(table, cfg.schedule.policy_at(t - 1))) {
      out.check(flip == 0, "truth flips more than once");
      flip = t;
    }
  }
  out.check(flip == kSwitch, "truth flips at round " + std::to_string(flip));
  auto pre = summary_to_json(r.switched_pre);
  auto control = summary_to_json(r.control_pre);
  pre.erase("condition");
  control.erase("condition");
  pre.erase("config");
  control.erase("config");
  out.check(pre == control, "pre-switch metrics differ from control");
  for (std::size_t k = 0; k < r.switched.runs.size(); ++k) {
    const auto& a = r.switched.runs[k].rounds;
    const auto& b = r.control.runs[k].rounds;
    for (int t = 0; t < kSwitch - 1; ++t) {
      out.check(a[t] == b[t], "run " + std::to_string(k) + " differs before the switch");
    }
  }
  out.note("truth flips at round " + std::to_string(flip) + ", post-switch choice F1 " +
           fmt("%.3f", r.switched_post.choice_f1_pooled));
  return out;
}

// ---- 7 ----------------------------------------------------------------------

std::pair<Eigen::MatrixXd, std::vector<bool>> planted(int n, double b0, double b1,
                                                      std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, 2);
  std::vector<bool> y;
  for (int i = 0; i < n; ++i) {
    const double u1 = std::max(rng.uniform(), 1e-300);
    const double v = std::sqrt(-2 * std::log(u1)) * std::cos(2 * M_PI * rng.uniform());
    x(i, 0) = 1;
    x(i, 1) = v;
    y.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(-(b0 + b1 * v))));
  }
  return {x, y};
}

Outcome statistics() {
  Outcome out;
  Rng rng(31);
  double worst_p = 0.0;
  for (int c = 0; c < 50; ++c) {
    std::vector<double> a, b;
    const int na = 2 + static_cast<int>(rng.uniform() * 40);
    const int nb = 2 + static_cast<int>(rng.uniform() * 40);
    for (int i = 0; i < na; ++i) a.push_back(rng.uniform() * 3);
    for (int i = 0; i < nb; ++i) b.push_back(rng.uniform() * 2 + rng.uniform());
    const auto moments = [](const std::vector<double>& v) {
      double m = 0, s = 0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      for (double x : v) s += (x - m) * (x - m);
      return std::pair{m, s / static_cast<double>(v.size() - 1)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const double sa = va / na, sb = vb / nb;
    const double t = (ma - mb) / std::sqrt(sa + sb);
    const double df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1) + sb * sb / (nb - 1));
    const double ref = 2 * boost::math::cdf(boost::math::complement(
                               boost::math::students_t(df), std::fabs(t)));
    worst_p = std::max(worst_p, std::fabs(welch_t_test(a, b).p - ref));
  }
  out.check(worst_p <= kWelchTol, "Welch p error " + fmt("%.2e", worst_p));

  const std::vector<std::string> names{"intercept", "x"};
  const auto [x, y] = planted(10000, 2.0, -1.0, 42);
  const auto fit = logistic_fit(x, names, y, {0.0, 1e-10, 100});
  out.check(std::fabs(fit.coefficient("intercept") - 2.0) <= kIrlsTol &&
                std::fabs(fit.coefficient("x") + 1.0) <= kIrlsTol,
            "IRLS recovery");

  int auc_bad = 0;
  for (int c = 0; c < 100; ++c) {
    const int n = 4 + static_cast<int>(rng.uniform() * 50);
    std::vector<double> s;
    std::vector<bool> l;
    for (int i = 0; i < n; ++i) {
      s.push_back(std::round(rng.uniform() * 8) / 8);
      l.push_back(i < 2 ? i == 0 : rng.uniform() < 0.5);
    }
    double num = 0, den = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (!l[i] || l[j]) continue;
        den += 1;
        num += s[i] > s[j] ? 1 : (s[i] == s[j] ? 0.5 : 0);
      }
    }
    auc_bad += std::fabs(auc(s, l) - num / den) > 1e-12;
  }
  out.check(auc_bad == 0, std::to_string(auc_bad) + " AUC mismatches");

  // Separable: the label is the sign of the feature.
  Eigen::MatrixXd xs = x.topRows(1000);
  std::vector<bool> ys;
  for (int i = 0; i < 1000; ++i) ys.push_back(xs(i, 1) > 0);
  const auto sep = cross_validated_scores(xs, names, ys, 5, 1);
  out.check(sep.mean_auc > kSeparableAucMin, "separable CV AUC " + fmt("%.3f", sep.mean_auc));
  std::vector<bool> shuffled;
  for (int i = 0; i < 1000; ++i) shuffled.push_back(rng.uniform() < 0.5);
  const auto perm = cross_validated_scores(xs, names, shuffled, 5, 1);
  out.check(std::fabs(perm.mean_auc - 0.5) <= kPermutedAucTol,
            "permuted CV AUC " + fmt("%.3f", perm.mean_auc));

  out.note("Welch max |dp| " + fmt("%.1e", worst_p) + ", IRLS (" +
           fmt("%.3f", fit.coefficient("intercept")) + ", " + fmt("%.3f", fit.coefficient("x")) +
           "), CV AUC " + fmt("%.3f", sep.mean_auc) + " / " + fmt("%.3f", perm.mean_auc));
  return out;
}

// ---- 8 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  Outcome out;
  const auto root = fs::temp_directory_path() / "eti_arena_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<ExperimentConfig> configs{
      mock_config(GameKind::StagHunt, {0.85, 0.15}, AgentMode::ETI),
      mock_config(GameKind::PrisonersDilemma, {1, 1}, AgentMode::BaselineCoT)};
  for (const char* pass : {"a", "b"}) {
    MockFrequencyBackend mock;
    for (const auto& cfg : configs) write_condition(root / pass, run_condition(cfg, mock));
  }
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto twin = root / "b" / fs::relative(e.path(), root / "a");
    out.check(fs::exists(twin) && slurp(e.path()) == slurp(twin),
              fs::relative(e.path(), root / "a").string() + " differs");
  }
  int files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "b")) files_b += e.is_regular_file();
  out.check(files == files_b, "file sets differ");
  out.note(std::to_string(files) + " files compared");
  fs::remove_all(root);
  return out;
}

// ---- 9 ----------------------------------------------------------------------

Outcome parser_robustness() {
  Outcome out;
  Rng rng(9001);
  int accepted = 0;
  int rejected = 0;
  for (int i = 0; i < kFuzzCases; ++i) {
    const auto c = testing::make_fuzz_case(rng);
    const std::string tag = c.kind + " #" + std::to_string(i);
    try {
      const auto p = parse_profile(c.payload, "RB", 1);
      ++accepted;
      bool schema_ok = c.expect == testing::Expect::Accept;
      for (std::size_t t = 0; t < kTraitCount; ++t) {
        const auto& r = p.ratings[t];
        schema_ok = schema_ok && r.value == c.ratings[t] &&
                    (!r.value || (*r.value >= 1 && *r.value <= 7 && !r.evidence.empty()));
      }
      out.check(schema_ok, tag + " accepted an invalid profile");
    } catch (const RangeError& e) {
      ++rejected;
      out.check(c.expect == testing::Expect::Range && e.trait() == c.trait, tag + " RangeError");
    } catch (const SchemaError& e) {
      ++rejected;
      out.check((c.expect == testing::Expect::Schema ||
                 c.expect == testing::Expect::ParseOrSchema) &&
                    (c.trait.empty() || e.trait() == c.trait),
                tag + " SchemaError");
    } catch (const ParseError&) {
      ++rejected;
      out.check(c.expect == testing::Expect::Parse || c.expect == testing::Expect::ParseOrSchema,
                tag + " ParseError");
    } catch (const std::exception& e) {
      out.check(false, tag + " unexpected " + e.what());
    }
  }
  out.note(std::to_string(accepted) + " accepted, " + std::to_string(rejected) + " rejected");
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"payoff-table conformance", 1, payoff_tables},
      {"oracle equivalence", 30, oracle_equivalence},
      {"deterministic-optimum identity", 10, deterministic_optimum},
      {"trait-probe ground truth", 10, trait_probes},
      {"frozen/warm-up contract", 10, warmup_contract},
      {"adaptability slicing", 10, adaptability},
      {"statistics oracles", 60, statistics},
      {"determinism", 10, determinism},
      {"parser robustness", 5, parser_robustness},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("threw: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    if (!in_time) o.check(false, "over budget " + fmt("%.0f s", c.budget_seconds));
    failed += !o.pass;
    std::printf("%s [%d] %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", index, c.name, secs);
    for (const auto& n : o.notes) std::printf("       %s\n", n.c_str());
  }
  std::printf("SKIP [10] live trend reproduction (needs %s; run the grid with --backend live "
              "and compare with `eti_arena metrics --compare`)\n",
              std::string(kEnvApiBase).c_str());
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
