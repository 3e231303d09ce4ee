#include "eti_arena/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "eti_arena/errors.hpp"
#include "eti_arena/live_backend.hpp"
#include "eti_arena/oracle.hpp"
#include "eti_arena/rng.hpp"

namespace eti {

namespace fs = std::filesystem;
using nlohmann::json;

std::unique_ptr<GenerationBackend> make_backend(const ExperimentConfig& cfg) {
  if (cfg.backend == BackendKind::Mock) {
    return std::make_unique<MockFrequencyBackend>();
  }
  LiveBackendConfig live = cfg.live;
  live.apply_env();
  if (live.api_base.empty()) {
    throw DomainError("live backend needs " + std::string(kEnvApiBase));
  }
  return std::make_unique<ChatCompletionBackend>(std::move(live));
}

std::size_t effective_concurrency(const GenerationBackend& backend) {
  std::size_t n = std::max<std::size_t>(1, backend.max_concurrency());
  if (const char* env = std::getenv(std::string(kEnvConcurrency).c_str())) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) {
      n = std::min(n, static_cast<std::size_t>(v));
    }
  }
  return n;
}

// ---- single run ---------------------------------------------------------------

namespace {

ProfileStore make_store(const ProfilePolicyConfig& p) {
  switch (p.kind) {
    case ProfilePolicy::Continuous:
      return ProfileStore::continuous();
    case ProfilePolicy::FrozenAfterCalibration:
      return ProfileStore::frozen_after(p.freeze_round);
    case ProfilePolicy::CrossTaskTransfer:
      return ProfileStore::cross_task();
  }
  return ProfileStore::continuous();
}

std::string run_id_for(const ExperimentConfig& cfg, int run_index) {
  return cfg.condition_label() + "/run_" + std::to_string(run_index);
}

}  // namespace

RunLog run_game(const ExperimentConfig& cfg, int run_index, GenerationBackend& backend,
                const TraitProfile* seed_profile) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  RunLog log;
  log.config = cfg;
  log.run_index = run_index;
  log.run_id = run_id_for(cfg, run_index);
  log.run_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(run_index));

  const PayoffTable table = PayoffTable::standard(cfg.game);
  Rng rng(log.run_seed);
  ProfileStore store = make_store(cfg.profile_policy);
  const bool eti_mode = cfg.mode == AgentMode::ETI;
  if (seed_profile != nullptr) {
    if (!eti_mode) throw DomainError("seed profiles need ETI mode");
    store.seed(*seed_profile);
    log.seed_profile = store.current(seed_profile->subject) != nullptr
                           ? *store.current(seed_profile->subject)
                           : *seed_profile;
  }

  CallLog calls;
  calls.capture_transcript = cfg.transcript_enabled();
  calls.max_transcript_bytes = cfg.transcript_max_bytes;
  const auto drain = [&](int round) {
    if (calls.pending.empty()) return;
    auto& slot = log.transcript[round];
    for (auto& e : calls.pending) slot.push_back(std::move(e));
    calls.pending.clear();
  };

  int round = 1;
  try {
    for (; round <= cfg.rounds; ++round) {
      const AgentView view{table, log.rounds, eti_mode ? &store : nullptr, cfg.opponent_id};
      if (eti_mode && store.accepts_updates_at(round)) {
        auto inferred = infer_profile(view, round, store.current(cfg.opponent_id), backend,
                                      cfg.decoding, calls);
        if (inferred.fell_back) ++log.accounting.inference_fallbacks;
        store.update(cfg.opponent_id, std::move(inferred.profile), round);
      }
      const auto decision = decide_action(cfg.mode, view, backend, cfg.decoding, calls);
      std::optional<ProbeResult> probe;
      if (cfg.probe_enabled) {
        probe = probe_traits(cfg.mode, view, backend, cfg.decoding, calls);
        if (!probe) ++log.accounting.probes_missing;
      }
      RoundRecord rec = step(table, cfg.schedule, round, cfg.rounds, decision.action, rng);
      rec.probe = std::move(probe);
      if (eti_mode) {
        if (const auto* current = store.current(cfg.opponent_id)) {
          rec.profile_snapshot = *current;
        }
      }
      log.rounds.push_back(std::move(rec));
      drain(round);
    }
    if (cfg.final_profile) {
      const AgentView view{table, log.rounds, nullptr, cfg.opponent_id};
      const TraitProfile* previous = eti_mode ? store.current(cfg.opponent_id) : nullptr;
      auto inferred = infer_profile(view, cfg.rounds + 1, previous, backend, cfg.decoding,
                                    calls);
      if (inferred.fell_back) ++log.accounting.inference_fallbacks;
      log.final_profile = std::move(inferred.profile);
      drain(cfg.rounds + 1);
    }
  } catch (const AgentOutputError& e) {
    log.status = RunStatus::Failed;
    log.failure = std::string("agent output: ") + e.what();
    log.truncated_at = round;
    drain(round);
  } catch (const TransportError& e) {
    log.status = RunStatus::Failed;
    log.failure = std::string("transport: ") + e.what();
    log.truncated_at = round;
    drain(round);
  }

  log.profile_history = store.history();
  log.accounting.calls = calls.calls;
  log.accounting.prompt_tokens = calls.prompt_tokens;
  log.accounting.completion_tokens = calls.completion_tokens;
  log.accounting.rejected_updates = store.rejected_updates();
  log.accounting.transcript_truncated = calls.transcript_truncated;
  if (cfg.record_timing) {
    log.accounting.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return log;
}

// ---- conditions ---------------------------------------------------------------

namespace {

RunLog aborted_run(const ExperimentConfig& cfg, int run_index, const std::string& why) {
  RunLog log;
  log.config = cfg;
  log.run_index = run_index;
  log.run_id = run_id_for(cfg, run_index);
  log.run_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(run_index));
  log.status = RunStatus::Failed;
  log.failure = why;
  log.truncated_at = 1;
  return log;
}

// A null seed with a non-empty abort reason marks a run that must not start.
ConditionResult run_seeded(const ExperimentConfig& cfg, GenerationBackend& backend,
                           const std::vector<std::optional<TraitProfile>>& seeds,
                           const std::vector<std::string>& aborts) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.repetitions);
  ConditionResult result;
  result.condition = cfg.condition_label();
  result.runs.resize(n);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        const int idx = static_cast<int>(k);
        if (k < aborts.size() && !aborts[k].empty()) {
          result.runs[k] = aborted_run(cfg, idx, aborts[k]);
          continue;
        }
        const TraitProfile* seed =
            k < seeds.size() && seeds[k] ? &*seeds[k] : nullptr;
        result.runs[k] = run_game(cfg, idx, backend, seed);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t threads = std::min(n, effective_concurrency(backend));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  result.summary = summarize(result.runs);
  return result;
}

// Final profiles of a persisted source: a run file, or a condition directory
// whose run k feeds run k.
std::vector<std::optional<TraitProfile>> load_source_profiles(const std::string& source,
                                                              int repetitions) {
  const fs::path path(source);
  std::vector<RunLog> runs;
  if (fs::is_directory(path)) {
    runs = read_condition_dir(path);
  } else if (fs::is_regular_file(path)) {
    runs.push_back(read_runlog(path));
  } else {
    throw DomainError("source run '" + source + "' does not exist");
  }
  std::vector<std::optional<TraitProfile>> out;
  for (int k = 0; k < repetitions; ++k) {
    const auto& run = runs.size() == 1 ? runs.front() : runs.at(static_cast<std::size_t>(k) %
                                                                 runs.size());
    if (!run.final_profile) {
      throw DomainError("source run '" + run.run_id + "' has no final profile");
    }
    out.push_back(run.final_profile);
  }
  return out;
}

}  // namespace

ConditionResult run_condition(const ExperimentConfig& cfg, GenerationBackend& backend,
                              const std::vector<TraitProfile>& seed_profiles) {
  std::vector<std::optional<TraitProfile>> seeds;
  if (!seed_profiles.empty()) {
    if (seed_profiles.size() != static_cast<std::size_t>(cfg.repetitions)) {
      throw DomainError("need one seed profile per repetition");
    }
    seeds.assign(seed_profiles.begin(), seed_profiles.end());
  } else if (cfg.profile_policy.kind != ProfilePolicy::Continuous &&
             !cfg.profile_policy.source_run.empty()) {
    seeds = load_source_profiles(cfg.profile_policy.source_run, cfg.repetitions);
  }
  return run_seeded(cfg, backend, seeds, {});
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base) {
  static constexpr double kCorners[] = {1.0, 0.0};
  static constexpr double kNoisy[] = {0.85, 0.15};
  std::vector<ExperimentConfig> out;
  for (const auto* levels : {kCorners, kNoisy}) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        ExperimentConfig cfg = base;
        cfg.name.clear();
        cfg.schedule = SwitchSchedule::fixed({levels[i], levels[j]});
        out.push_back(std::move(cfg));
      }
    }
  }
  return out;
}

namespace {

ExperimentConfig staged(const ExperimentConfig& base, std::string suffix) {
  ExperimentConfig cfg = base;
  cfg.name.clear();
  cfg.profile_policy = {};
  cfg.final_profile = false;
  cfg.name = cfg.condition_label() + suffix;
  return cfg;
}

std::vector<std::string> stage_one_aborts(const ConditionResult& stage1) {
  std::vector<std::string> aborts;
  for (const auto& run : stage1.runs) {
    aborts.push_back(run.complete() && run.final_profile
                         ? std::string()
                         : "stage-1 run " + run.run_id + " failed");
  }
  return aborts;
}

std::vector<std::optional<TraitProfile>> stage_one_profiles(const ConditionResult& stage1) {
  std::vector<std::optional<TraitProfile>> seeds;
  for (const auto& run : stage1.runs) seeds.push_back(run.final_profile);
  return seeds;
}

}  // namespace

WarmupResult run_warmup_experiment(const ExperimentConfig& base,
                                   GenerationBackend& backend) {
  if (base.mode != AgentMode::ETI) throw DomainError("warm-up needs an ETI base config");
  WarmupResult r;

  ExperimentConfig calibration = staged(base, "_warmup_stage1");
  calibration.rounds = kCalibrationRounds;
  calibration.final_profile = true;
  calibration.schedule = SwitchSchedule::fixed(base.schedule.initial);
  r.calibration = run_seeded(calibration, backend, {}, {});

  ExperimentConfig warm = staged(base, "_warmup_stage2");
  warm.profile_policy = {ProfilePolicy::FrozenAfterCalibration, 0, calibration.name};
  r.warmup = run_seeded(warm, backend, stage_one_profiles(r.calibration),
                        stage_one_aborts(r.calibration));

  r.continuous = run_seeded(staged(base, ""), backend, {}, {});
  ExperimentConfig baseline = base;
  baseline.mode = AgentMode::BaselineCoT;
  r.baseline = run_seeded(staged(baseline, ""), backend, {}, {});
  return r;
}

CrossTaskResult run_crosstask_experiment(const ExperimentConfig& base, GameKind source,
                                         GameKind target, GenerationBackend& backend) {
  if (source == target) throw DomainError("cross-task transfer needs two different games");
  if (base.mode != AgentMode::ETI) throw DomainError("cross-task needs an ETI base config");
  const std::string direction =
      std::string(short_name(source)) + "_to_" + std::string(short_name(target));
  CrossTaskResult r;

  ExperimentConfig src = base;
  src.game = source;
  src = staged(src, "_" + direction + "_source");
  src.final_profile = true;
  r.source = run_seeded(src, backend, {}, {});

  ExperimentConfig tgt = base;
  tgt.game = target;
  ExperimentConfig transfer = staged(tgt, "_" + direction + "_transfer");
  transfer.profile_policy = {ProfilePolicy::CrossTaskTransfer, 0, src.name};
  r.transfer = run_seeded(transfer, backend, stage_one_profiles(r.source),
                          stage_one_aborts(r.source));

  r.in_task = run_seeded(staged(tgt, "_" + direction + "_in_task"), backend, {}, {});
  tgt.mode = AgentMode::BaselineCoT;
  r.baseline = run_seeded(staged(tgt, "_" + direction + "_baseline"), backend, {}, {});
  return r;
}

AdaptabilityResult run_adaptability_experiment(const ExperimentConfig& base,
                                               const OpponentPolicy& after,
                                               GenerationBackend& backend,
                                               int switch_round) {
  if (switch_round < 2 || base.rounds <= switch_round) {
    throw DomainError("switch round must lie inside the run (2 <= round < rounds)");
  }
  AdaptabilityResult r;
  r.switch_round = switch_round;

  ExperimentConfig switched = base;
  switched.name.clear();
  switched.schedule = SwitchSchedule::switching(base.schedule.initial, after, switch_round);
  r.switched = run_seeded(switched, backend, {}, {});

  ExperimentConfig control = base;
  control.name.clear();
  control.schedule = SwitchSchedule::fixed(base.schedule.initial);
  control.name = control.condition_label() + "_control";
  r.control = run_seeded(control, backend, {}, {});

  const RoundWindow pre{1, switch_round - 1};
  const RoundWindow post{switch_round, base.rounds};
  r.switched_pre = summarize(r.switched.runs, pre);
  r.switched_post = summarize(r.switched.runs, post);
  r.control_pre = summarize(r.control.runs, pre);
  r.control_post = summarize(r.control.runs, post);
  return r;
}

// ---- persistence --------------------------------------------------------------

namespace {

json profile_to_json(const TraitProfile& p) {
  json ratings = json::object();
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    const auto& r = p.ratings[i];
    ratings[std::string(trait_key(static_cast<Trait>(i)))] = {
        {"rating", r.value ? json(*r.value) : json(nullptr)}, {"evidence", r.evidence}};
  }
  return {{"subject", p.subject}, {"produced_at_round", p.produced_at_round},
          {"ratings", std::move(ratings)}};
}

TraitProfile profile_from_json(const json& j) {
  TraitProfile p;
  p.subject = j.at("subject").get<std::string>();
  p.produced_at_round = j.at("produced_at_round").get<int>();
  const auto& ratings = j.at("ratings");
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    const auto& r = ratings.at(std::string(trait_key(static_cast<Trait>(i))));
    auto& out = p.ratings[i];
    if (!r.at("rating").is_null()) out.value = r.at("rating").get<int>();
    out.evidence = r.at("evidence").get<std::string>();
  }
  return p;
}

json optional_profile(const std::optional<TraitProfile>& p) {
  return p ? profile_to_json(*p) : json(nullptr);
}

std::optional<TraitProfile> optional_profile_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return profile_from_json(j);
}

json round_to_json(const RoundRecord& r) {
  json j{{"type", "round"},
         {"round", r.round},
         {"agent_action", to_string(r.agent_action)},
         {"opponent_intended", to_string(r.opponent_intended)},
         {"opponent_success", r.opponent_success},
         {"agent_payoff", r.agent_payoff.value()},
         {"opponent_payoff", r.opponent_payoff.value()}};
  if (r.probe) {
    j["probe"] = {{"cooperative", r.probe->predicted_cooperative},
                  {"competent", r.probe->predicted_competent},
                  {"raw", r.probe->raw}};
  }
  if (r.profile_snapshot) j["profile_snapshot"] = profile_to_json(*r.profile_snapshot);
  return j;
}

Action action_field(GameKind game, const json& j, const char* key) {
  const auto name = j.at(key).get<std::string>();
  const auto a = parse_action(game, name);
  if (!a) throw DomainError("'" + name + "' is not an action of " + std::string(to_string(game)));
  return *a;
}

RoundRecord round_from_json(const json& j, GameKind game) {
  RoundRecord r;
  r.round = j.at("round").get<int>();
  r.agent_action = action_field(game, j, "agent_action");
  r.opponent_intended = action_field(game, j, "opponent_intended");
  r.opponent_success = j.at("opponent_success").get<bool>();
  r.agent_payoff = Payoff::from_double(j.at("agent_payoff").get<double>());
  r.opponent_payoff = Payoff::from_double(j.at("opponent_payoff").get<double>());
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    r.probe = ProbeResult{p.at("cooperative").get<bool>(), p.at("competent").get<bool>(),
                          p.at("raw").get<std::string>()};
  }
  if (j.contains("profile_snapshot")) {
    r.profile_snapshot = profile_from_json(j.at("profile_snapshot"));
  }
  return r;
}

json accounting_to_json(const RunAccounting& a) {
  json j{{"calls", a.calls},
         {"prompt_tokens", a.prompt_tokens},
         {"completion_tokens", a.completion_tokens},
         {"inference_fallbacks", a.inference_fallbacks},
         {"probes_missing", a.probes_missing},
         {"rejected_updates", a.rejected_updates},
         {"transcript_truncated", a.transcript_truncated}};
  if (a.wall_seconds) j["wall_seconds"] = *a.wall_seconds;
  return j;
}

RunAccounting accounting_from_json(const json& j) {
  RunAccounting a;
  a.calls = j.at("calls").get<long>();
  a.prompt_tokens = j.at("prompt_tokens").get<long>();
  a.completion_tokens = j.at("completion_tokens").get<long>();
  a.inference_fallbacks = j.at("inference_fallbacks").get<int>();
  a.probes_missing = j.at("probes_missing").get<int>();
  a.rejected_updates = j.at("rejected_updates").get<int>();
  a.transcript_truncated = j.at("transcript_truncated").get<bool>();
  if (j.contains("wall_seconds")) a.wall_seconds = j.at("wall_seconds").get<double>();
  return a;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DomainError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DomainError("failed writing '" + path.string() + "'");
}

}  // namespace

std::string runlog_to_jsonl(const RunLog& log) {
  std::string out;
  const auto emit = [&](const json& j) {
    out += j.dump();
    out += '\n';
  };
  emit({{"type", "header"},
        {"schema_version", kRunLogSchemaVersion},
        {"run_id", log.run_id},
        {"run_index", log.run_index},
        {"run_seed", log.run_seed},
        {"config", config_to_json(log.config)},
        {"seed_profile", optional_profile(log.seed_profile)}});
  for (const auto& [round, profile] : log.profile_history) {
    emit({{"type", "profile"}, {"round", round}, {"profile", profile_to_json(profile)}});
  }
  for (const auto& r : log.rounds) emit(round_to_json(r));
  for (const auto& [round, exchanges] : log.transcript) {
    json list = json::array();
    for (const auto& e : exchanges) {
      list.push_back({{"kind", e.kind},
                      {"system", e.prompt.system},
                      {"user", e.prompt.user},
                      {"response", e.response}});
    }
    emit({{"type", "transcript"}, {"round", round}, {"exchanges", std::move(list)}});
  }
  json footer{{"type", "footer"},
              {"status", log.complete() ? "complete" : "failed"},
              {"final_profile", optional_profile(log.final_profile)},
              {"accounting", accounting_to_json(log.accounting)}};
  if (!log.complete()) {
    footer["failure"] = log.failure;
    footer["truncated_at"] = log.truncated_at ? json(*log.truncated_at) : json(nullptr);
  }
  emit(footer);
  return out;
}

RunLog runlog_from_jsonl(std::string_view text) {
  RunLog log;
  bool header = false;
  bool footer = false;
  std::size_t pos = 0;
  int line_no = 0;
  try {
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      const auto line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (!header) {
        if (type != "header") throw DomainError("run log does not start with a header");
        const int version = j.at("schema_version").get<int>();
        if (version != kRunLogSchemaVersion) {
          throw SchemaVersionError(version, kRunLogSchemaVersion);
        }
        log.run_id = j.at("run_id").get<std::string>();
        log.run_index = j.at("run_index").get<int>();
        log.run_seed = j.at("run_seed").get<std::uint64_t>();
        log.config = config_from_json(j.at("config"));
        log.seed_profile = optional_profile_from(j.at("seed_profile"));
        header = true;
      } else if (footer) {
        throw DomainError("content after the footer");
      } else if (type == "profile") {
        log.profile_history.emplace_back(j.at("round").get<int>(),
                                         profile_from_json(j.at("profile")));
      } else if (type == "round") {
        log.rounds.push_back(round_from_json(j, log.config.game));
      } else if (type == "transcript") {
        auto& slot = log.transcript[j.at("round").get<int>()];
        for (const auto& e : j.at("exchanges")) {
          slot.push_back(Exchange{e.at("kind").get<std::string>(),
                                  {e.at("system").get<std::string>(),
                                   e.at("user").get<std::string>()},
                                  e.at("response").get<std::string>()});
        }
      } else if (type == "footer") {
        const auto status = j.at("status").get<std::string>();
        log.status = status == "complete" ? RunStatus::Complete : RunStatus::Failed;
        log.final_profile = optional_profile_from(j.at("final_profile"));
        log.accounting = accounting_from_json(j.at("accounting"));
        if (!log.complete()) {
          log.failure = j.at("failure").get<std::string>();
          if (!j.at("truncated_at").is_null()) {
            log.truncated_at = j.at("truncated_at").get<int>();
          }
        }
        footer = true;
      } else {
        throw DomainError("unknown record type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    throw DomainError("malformed run log at line " + std::to_string(line_no) + ": " +
                      e.what());
  }
  if (!header) throw DomainError("run log is empty");
  if (!footer) throw DomainError("run log has no footer");
  return log;
}

void write_runlog(const fs::path& path, const RunLog& log) {
  write_file(path, runlog_to_jsonl(log));
}

RunLog read_runlog(const fs::path& path) { return runlog_from_jsonl(read_file(path)); }

namespace {

std::optional<int> run_file_index(const fs::path& p) {
  const auto name = p.filename().string();
  if (name.rfind("run_", 0) != 0 || p.extension() != ".jsonl") return std::nullopt;
  const auto digits = name.substr(4, name.size() - 4 - 6);
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                     [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  return std::stoi(digits);
}

}  // namespace

std::vector<RunLog> read_condition_dir(const fs::path& dir) {
  std::vector<std::pair<int, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (auto idx = run_file_index(entry.path())) files.emplace_back(*idx, entry.path());
  }
  if (files.empty()) throw DomainError("no run_*.jsonl files in '" + dir.string() + "'");
  std::sort(files.begin(), files.end());
  std::vector<RunLog> runs;
  for (const auto& [idx, path] : files) runs.push_back(read_runlog(path));
  return runs;
}

std::vector<fs::path> find_condition_dirs(const fs::path& root) {
  std::vector<fs::path> out;
  const auto has_runs = [](const fs::path& d) {
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.is_regular_file() && run_file_index(e.path())) return true;
    }
    return false;
  };
  if (fs::is_directory(root) && has_runs(root)) out.push_back(root);
  if (fs::is_directory(root)) {
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_directory() && has_runs(e.path())) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---- CSV ----------------------------------------------------------------------

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string rounds_csv(std::span<const RunLog> runs, const std::string& condition) {
  std::ostringstream out;
  out << "condition,run_id,run_index,round,agent_action,agent_cooperative,optimal_action,"
         "optimal_cooperative,opponent_intended,opponent_success,agent_payoff,"
         "opponent_payoff,cumulative_payoff,cumulative_optimal,deviation,"
         "probe_cooperative,probe_competent,truth_cooperative,truth_competent\n";
  for (const auto& run : runs) {
    const auto table = PayoffTable::standard(run.config.game);
    const auto deviation = payoff_deviation(run);
    double cum = 0.0;
    double cum_opt = 0.0;
    for (std::size_t i = 0; i < run.rounds.size(); ++i) {
      const auto& r = run.rounds[i];
      const auto& policy = run.config.schedule.policy_at(r.round);
      const Action best = best_response(table, policy);
      cum += r.agent_payoff.value();
      cum_opt += expected_payoff(table, best, policy);
      const auto truth = ground_truth(policy);
      out << csv_field(condition) << ',' << csv_field(run.run_id) << ',' << run.run_index
          << ',' << r.round << ',' << to_string(r.agent_action) << ','
          << is_cooperative(r.agent_action) << ',' << to_string(best) << ','
          << is_cooperative(best) << ',' << to_string(r.opponent_intended) << ','
          << r.opponent_success << ',' << r.agent_payoff.to_string() << ','
          << r.opponent_payoff.to_string() << ',' << num(cum) << ',' << num(cum_opt) << ','
          << (i < deviation.size() && deviation[i] ? num(*deviation[i]) : "") << ','
          << (r.probe ? (r.probe->predicted_cooperative ? "1" : "0") : "") << ','
          << (r.probe ? (r.probe->predicted_competent ? "1" : "0") : "") << ','
          << truth.cooperative << ',' << truth.competent << '\n';
    }
  }
  return out.str();
}

std::string series_csv(const MetricsSummary& s) {
  std::ostringstream out;
  out << "condition,round,n,deviation_mean,deviation_lo,deviation_hi,optimal_rate_mean,"
         "optimal_rate_lo,optimal_rate_hi,choice_f1,trait_f1_cooperative,"
         "trait_f1_competent\n";
  const auto ci = [](const std::optional<CiPoint>& p) {
    if (!p) return std::string(",,");
    return num(p->mean) + ',' + num(p->lo) + ',' + num(p->hi);
  };
  for (std::size_t i = 0; i < s.rounds.size(); ++i) {
    const auto& dev = s.deviation_series[i];
    out << csv_field(s.condition) << ',' << s.rounds[i] << ',' << (dev ? dev->n : 0) << ','
        << ci(dev) << ',' << ci(s.optimal_rate_series[i]) << ','
        << num(s.choice_f1_series[i]) << ',' << num(s.trait_f1_cooperative_series[i])
        << ',' << num(s.trait_f1_competent_series[i]) << '\n';
  }
  return out.str();
}

namespace {

void write_outputs(const fs::path& dir, std::span<const RunLog> runs,
                   const MetricsSummary& summary) {
  json j = summary_to_json(summary);
  if (!runs.empty()) j["config"] = config_to_json(runs.front().config);
  write_file(dir / "summary.json", j.dump(2) + "\n");
  write_file(dir / "rounds.csv", rounds_csv(runs, summary.condition));
  write_file(dir / "series.csv", series_csv(summary));
}

}  // namespace

void write_condition(const fs::path& out, const ConditionResult& r) {
  const fs::path dir = out / r.condition;
  fs::create_directories(dir);
  for (const auto& run : r.runs) {
    write_runlog(dir / ("run_" + std::to_string(run.run_index) + ".jsonl"), run);
  }
  write_outputs(dir, r.runs, r.summary);
}

MetricsSummary export_csv(const fs::path& dir) {
  const auto runs = read_condition_dir(dir);
  auto summary = summarize(runs);
  write_outputs(dir, runs, summary);
  return summary;
}

}  // namespace eti
