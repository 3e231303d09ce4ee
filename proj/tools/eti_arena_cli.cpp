#include <climits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eti_arena/analysis.hpp"
#include "eti_arena/errors.hpp"
#include "eti_arena/harness.hpp"

namespace fs = std::filesystem;
using namespace eti;

namespace {

struct Common {
  std::string config;
  std::string out = "results";
  std::optional<std::uint64_t> seed;
  std::optional<int> repetitions;
  std::optional<int> rounds;
  std::string backend;
};

void add_common(CLI::App* cmd, Common& c, bool with_config = true) {
  if (with_config) cmd->add_option("--config", c.config, "Base config (JSON)");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Experiment seed");
  cmd->add_option("--repetitions", c.repetitions, "Runs per condition");
  cmd->add_option("--rounds", c.rounds, "Rounds per run");
  cmd->add_option("--backend", c.backend, "mock or live")
      ->check(CLI::IsMember({"mock", "live"}));
}

ExperimentConfig base_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.repetitions) cfg.repetitions = *c.repetitions;
  if (c.rounds) cfg.rounds = *c.rounds;
  if (c.backend == "mock") cfg.backend = BackendKind::Mock;
  if (c.backend == "live") cfg.backend = BackendKind::Live;
  cfg.validate();
  return cfg;
}

void print_summary(const MetricsSummary& s) {
  std::printf("%-44s runs %3d failed %2d%s  choice F1 %.3f  trait F1 coop %.3f comp %.3f",
              s.condition.c_str(), s.n_runs, s.n_failed, s.unreliable ? " (unreliable)" : "",
              s.choice_f1, s.trait_f1_cooperative, s.trait_f1_competent);
  if (s.final_deviation) {
    std::printf("  D(final) %.4f [%.4f, %.4f]", s.final_deviation->mean,
                s.final_deviation->lo, s.final_deviation->hi);
  }
  std::printf("\n");
}

void print_comparison(const char* label, const MetricsSummary& a, const MetricsSummary& b) {
  const auto cmp = compare_conditions(a, b);
  const auto show = [](const std::optional<WelchResult>& w) {
    char buf[64];
    if (!w) return std::string("n/a");
    std::snprintf(buf, sizeof buf, "t=%.3f p=%.4g", w->t, w->p);
    return std::string(buf);
  };
  std::printf("%s: choice F1 %s; final deviation %s\n", label, show(cmp.choice_f1).c_str(),
              show(cmp.final_deviation).c_str());
}

void finish(const fs::path& out, const ConditionResult& r) {
  write_condition(out, r);
  print_summary(r.summary);
}

void write_slices(const fs::path& dir, const AdaptabilityResult& r) {
  nlohmann::json j{{"switch_round", r.switch_round},
                   {"switched_pre", summary_to_json(r.switched_pre)},
                   {"switched_post", summary_to_json(r.switched_post)},
                   {"control_pre", summary_to_json(r.control_pre)},
                   {"control_post", summary_to_json(r.control_post)}};
  std::ofstream(dir / "slices.json") << j.dump(2) << "\n";
}

std::pair<Trait, Trait> parse_interaction(const std::string& spec) {
  const auto sep = spec.find(':');
  if (sep == std::string::npos) {
    throw DomainError("interaction '" + spec + "' must look like trait_a:trait_b");
  }
  const auto a = trait_from_key(spec.substr(0, sep));
  const auto b = trait_from_key(spec.substr(sep + 1));
  if (!a || !b) throw DomainError("unknown trait in interaction '" + spec + "'");
  return {*a, *b};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repeated-game arena for trait-inference agents"};
  app.require_subcommand(1);

  Common run_opts;
  std::string run_config;
  auto* run = app.add_subcommand("run", "Run one condition from a config file");
  run->add_option("config", run_config, "Config file (JSON)")->required();
  add_common(run, run_opts, false);

  Common grid_opts;
  std::string grid_game;
  std::string grid_mode;
  auto* grid = app.add_subcommand("grid", "Run the 8-condition main grid for a game and mode");
  grid->add_option("game", grid_game, "sh or pd")->required();
  grid->add_option("mode", grid_mode, "eti or baseline")->required();
  add_common(grid, grid_opts);

  Common warm_opts;
  std::string warm_game = "sh";
  double warm_px = 1.0;
  double warm_pi = 1.0;
  bool warm_all = false;
  auto* warm = app.add_subcommand("warmup", "Warm-up vs continuous vs baseline");
  warm->add_option("--game", warm_game, "sh or pd")->capture_default_str();
  warm->add_option("--px", warm_px, "Opponent cooperation")->capture_default_str();
  warm->add_option("--pi", warm_pi, "Opponent competence")->capture_default_str();
  warm->add_flag("--all", warm_all, "Run every grid condition");
  add_common(warm, warm_opts);

  Common xt_opts;
  double xt_px = 1.0;
  double xt_pi = 1.0;
  auto* xt = app.add_subcommand("crosstask", "Profile transfer SH->PD and PD->SH");
  xt->add_option("--px", xt_px, "Opponent cooperation")->capture_default_str();
  xt->add_option("--pi", xt_pi, "Opponent competence")->capture_default_str();
  add_common(xt, xt_opts);

  Common ad_opts;
  std::string ad_game = "sh";
  double ad_px = 1.0;
  double ad_pi = 1.0;
  double ad_after_px = 1.0;
  double ad_after_pi = 0.0;
  int ad_switch = 25;
  std::string ad_mode = "eti";
  auto* ad = app.add_subcommand("adapt", "Mid-game opponent switch");
  ad->add_option("--game", ad_game, "sh or pd")->capture_default_str();
  ad->add_option("--mode", ad_mode, "eti or baseline")->capture_default_str();
  ad->add_option("--px", ad_px, "Cooperation before the switch")->capture_default_str();
  ad->add_option("--pi", ad_pi, "Competence before the switch")->capture_default_str();
  ad->add_option("--after-px", ad_after_px, "Cooperation after")->capture_default_str();
  ad->add_option("--after-pi", ad_after_pi, "Competence after")->capture_default_str();
  ad->add_option("--switch-round", ad_switch, "First round of the new policy")
      ->capture_default_str();
  add_common(ad, ad_opts);

  std::string metrics_dir;
  int window_first = 1;
  int window_last = INT_MAX;
  std::vector<std::string> compare;
  auto* metrics = app.add_subcommand("metrics", "Summarize condition directories");
  metrics->add_option("dir", metrics_dir, "Experiment or condition directory")->required();
  metrics->add_option("--first", window_first, "First round of the window");
  metrics->add_option("--last", window_last, "Last round of the window");
  metrics->add_option("--compare", compare, "Two condition names to compare (Welch)")
      ->expected(2);

  std::string analyze_dir;
  std::string target_name;
  std::vector<std::string> interactions;
  double ridge = LogisticOptions{}.ridge;
  int cv_folds = 0;
  std::string csv_out;
  auto* analyze = app.add_subcommand("analyze", "Logistic regression of events on traits");
  analyze->add_option("dir", analyze_dir, "Experiment or condition directory")->required();
  analyze->add_option("--target", target_name,
                      "next_defect, next_cooperate or next_optimal")
      ->required();
  analyze->add_option("--interaction", interactions, "trait_a:trait_b (repeatable)");
  analyze->add_option("--ridge", ridge, "L2 penalty")->capture_default_str();
  analyze->add_option("--cv", cv_folds, "Also report k-fold cross-validated AUC/F1");
  analyze->add_option("--csv", csv_out, "Write the coefficient table as CSV");

  std::string export_dir;
  auto* exp = app.add_subcommand("export", "Rewrite summary.json and CSVs from run logs");
  exp->add_option("dir", export_dir, "Experiment or condition directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = load_config(run_config);
      if (run_opts.seed) cfg.seed = *run_opts.seed;
      if (run_opts.repetitions) cfg.repetitions = *run_opts.repetitions;
      if (run_opts.rounds) cfg.rounds = *run_opts.rounds;
      if (run_opts.backend == "mock") cfg.backend = BackendKind::Mock;
      if (run_opts.backend == "live") cfg.backend = BackendKind::Live;
      auto backend = make_backend(cfg);
      finish(run_opts.out, run_condition(cfg, *backend));
    } else if (*grid) {
      auto base = base_config(grid_opts);
      base.game = parse_game(grid_game);
      base.mode = parse_mode(grid_mode);
      auto backend = make_backend(base);
      for (const auto& cfg : expand_grid(base)) finish(grid_opts.out, run_condition(cfg, *backend));
    } else if (*warm) {
      auto base = base_config(warm_opts);
      base.game = parse_game(warm_game);
      base.mode = AgentMode::ETI;
      std::vector<ExperimentConfig> configs;
      if (warm_all) {
        configs = expand_grid(base);
      } else {
        base.schedule = SwitchSchedule::fixed({warm_px, warm_pi});
        configs.push_back(base);
      }
      auto backend = make_backend(base);
      for (const auto& cfg : configs) {
        const auto r = run_warmup_experiment(cfg, *backend);
        for (const auto* c : {&r.calibration, &r.warmup, &r.continuous, &r.baseline}) {
          finish(warm_opts.out, *c);
        }
        print_comparison("warm-up vs continuous", r.warmup.summary, r.continuous.summary);
      }
    } else if (*xt) {
      auto base = base_config(xt_opts);
      base.mode = AgentMode::ETI;
      base.schedule = SwitchSchedule::fixed({xt_px, xt_pi});
      auto backend = make_backend(base);
      for (auto [src, dst] : {std::pair{GameKind::StagHunt, GameKind::PrisonersDilemma},
                              std::pair{GameKind::PrisonersDilemma, GameKind::StagHunt}}) {
        const auto r = run_crosstask_experiment(base, src, dst, *backend);
        for (const auto* c : {&r.source, &r.transfer, &r.in_task, &r.baseline}) {
          finish(xt_opts.out, *c);
        }
        print_comparison("transfer vs in-task", r.transfer.summary, r.in_task.summary);
      }
    } else if (*ad) {
      auto base = base_config(ad_opts);
      base.game = parse_game(ad_game);
      base.mode = parse_mode(ad_mode);
      base.schedule = SwitchSchedule::fixed({ad_px, ad_pi});
      auto backend = make_backend(base);
      const auto r = run_adaptability_experiment(base, {ad_after_px, ad_after_pi}, *backend,
                                                 ad_switch);
      finish(ad_opts.out, r.switched);
      finish(ad_opts.out, r.control);
      write_slices(fs::path(ad_opts.out) / r.switched.condition, r);
      std::printf("post-switch choice F1: switched %.3f, control %.3f\n",
                  r.switched_post.choice_f1, r.control_post.choice_f1);
    } else if (*metrics) {
      std::map<std::string, MetricsSummary> by_name;
      for (const auto& dir : find_condition_dirs(metrics_dir)) {
        const auto runs = read_condition_dir(dir);
        auto s = summarize(runs, {window_first, window_last});
        print_summary(s);
        by_name[dir.filename().string()] = std::move(s);
      }
      if (by_name.empty()) throw DomainError("no condition directories under " + metrics_dir);
      if (compare.size() == 2) {
        const auto a = by_name.find(compare[0]);
        const auto b = by_name.find(compare[1]);
        if (a == by_name.end() || b == by_name.end()) {
          throw DomainError("--compare names must be condition directories");
        }
        print_comparison((compare[0] + " vs " + compare[1]).c_str(), a->second, b->second);
      }
    } else if (*analyze) {
      std::vector<RunLog> runs;
      for (const auto& dir : find_condition_dirs(analyze_dir)) {
        auto part = read_condition_dir(dir);
        std::move(part.begin(), part.end(), std::back_inserter(runs));
      }
      std::vector<std::pair<Trait, Trait>> pairs;
      for (const auto& s : interactions) pairs.push_back(parse_interaction(s));
      const auto target = parse_target(target_name);
      const auto [x, y] = build_features(runs, target, pairs);
      LogisticOptions opts;
      opts.ridge = ridge;
      const auto fit = logistic_fit(x, y, opts);
      std::cout << format_report(fit, to_string(target));
      if (!csv_out.empty()) std::ofstream(csv_out) << report_csv(fit, to_string(target));
      if (cv_folds > 0) {
        const auto cv = cross_validated_scores(x.values, x.names, y, cv_folds, 0);
        std::printf("\n%d-fold CV: mean AUC %.3f, mean F1 %.3f\n", cv_folds, cv.mean_auc,
                    cv.mean_f1);
      }
    } else if (*exp) {
      const auto dirs = find_condition_dirs(export_dir);
      if (dirs.empty()) throw DomainError("no condition directories under " + export_dir);
      for (const auto& dir : dirs) print_summary(export_csv(dir));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
