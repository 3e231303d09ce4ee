#include "eti_arena/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "eti_arena/errors.hpp"

namespace eti {

using nlohmann::json;

namespace {

std::string compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string policy_label(const OpponentPolicy& p) {
  return "px" + compact(p.cooperation) + "_pi" + compact(p.competence);
}

std::string_view policy_kind_key(ProfilePolicy p) {
  switch (p) {
    case ProfilePolicy::Continuous:
      return "continuous";
    case ProfilePolicy::FrozenAfterCalibration:
      return "frozen";
    case ProfilePolicy::CrossTaskTransfer:
      return "cross_task";
  }
  return "continuous";
}

ProfilePolicy parse_policy_kind(const std::string& s) {
  if (s == "continuous") return ProfilePolicy::Continuous;
  if (s == "frozen") return ProfilePolicy::FrozenAfterCalibration;
  if (s == "cross_task") return ProfilePolicy::CrossTaskTransfer;
  throw DomainError("unknown profile policy '" + s + "'");
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  const std::set<std::string_view> allowed(known);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw DomainError("unknown field '" + key + "' in " + std::string(where));
    }
  }
}

json policy_json(const OpponentPolicy& p) {
  return {{"cooperation", p.cooperation}, {"competence", p.competence}};
}

OpponentPolicy policy_from(const json& j, std::string_view where) {
  reject_unknown(j, {"cooperation", "competence"}, where);
  OpponentPolicy p;
  p.cooperation = j.value("cooperation", 1.0);
  p.competence = j.value("competence", 1.0);
  return p;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (rounds < 1) throw DomainError("rounds must be at least 1");
  if (repetitions < 1) throw DomainError("repetitions must be at least 1");
  schedule.validate(rounds);
  decoding.validate();
  if (profile_policy.kind != ProfilePolicy::Continuous && mode != AgentMode::ETI) {
    throw DomainError("profile policies other than continuous need ETI mode");
  }
  if (profile_policy.freeze_round < 0) {
    throw DomainError("freeze_round must be non-negative");
  }
  if (profile_policy.kind == ProfilePolicy::CrossTaskTransfer &&
      profile_policy.source_run.empty()) {
    throw DomainError("cross-task transfer needs a source_run");
  }
  if (opponent_id.empty()) throw DomainError("opponent_id must not be empty");
  if (transcript_max_bytes == 0) {
    throw DomainError("transcript_max_bytes must be positive");
  }
}

std::string ExperimentConfig::condition_label() const {
  if (!name.empty()) return name;
  std::string label = std::string(short_name(game)) + "_" +
                      std::string(to_string(mode)) + "_" +
                      policy_label(schedule.initial);
  if (schedule.switched && schedule.switch_round) {
    label += "_sw" + std::to_string(*schedule.switch_round) + "_" +
             policy_label(*schedule.switched);
  }
  switch (profile_policy.kind) {
    case ProfilePolicy::Continuous:
      break;
    case ProfilePolicy::FrozenAfterCalibration:
      label += "_frozen" + std::to_string(profile_policy.freeze_round);
      break;
    case ProfilePolicy::CrossTaskTransfer:
      label += "_transfer";
      break;
  }
  return label;
}

json config_to_json(const ExperimentConfig& cfg) {
  json schedule{{"initial", policy_json(cfg.schedule.initial)}};
  if (cfg.schedule.switched && cfg.schedule.switch_round) {
    schedule["switched"] = policy_json(*cfg.schedule.switched);
    schedule["switch_round"] = *cfg.schedule.switch_round;
  }
  json policy{{"kind", policy_kind_key(cfg.profile_policy.kind)}};
  if (cfg.profile_policy.kind == ProfilePolicy::FrozenAfterCalibration) {
    policy["freeze_round"] = cfg.profile_policy.freeze_round;
  }
  if (!cfg.profile_policy.source_run.empty()) {
    policy["source_run"] = cfg.profile_policy.source_run;
  }
  // The API key is never written out.
  json live{{"model", cfg.live.model},
            {"timeout_seconds", cfg.live.timeout_seconds},
            {"max_retries", cfg.live.max_retries},
            {"concurrency", cfg.live.concurrency}};
  if (!cfg.live.api_base.empty()) live["api_base"] = cfg.live.api_base;
  json j{
      {"name", cfg.name},
      {"game", short_name(cfg.game)},
      {"schedule", std::move(schedule)},
      {"mode", to_string(cfg.mode)},
      {"profile_policy", std::move(policy)},
      {"rounds", cfg.rounds},
      {"repetitions", cfg.repetitions},
      {"seed", cfg.seed},
      {"backend", cfg.backend == BackendKind::Mock ? "mock" : "live"},
      {"live", std::move(live)},
      {"decoding", {{"temperature", cfg.decoding.temperature},
                    {"top_p", cfg.decoding.top_p},
                    {"top_k", cfg.decoding.top_k},
                    {"min_p", cfg.decoding.min_p}}},
      {"probe_enabled", cfg.probe_enabled},
      {"transcript", cfg.transcript ? json(*cfg.transcript) : json(nullptr)},
      {"transcript_max_bytes", cfg.transcript_max_bytes},
      {"final_profile", cfg.final_profile},
      {"record_timing", cfg.record_timing},
      {"opponent_id", cfg.opponent_id},
  };
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw DomainError("config must be a JSON object");
  reject_unknown(j,
                 {"name", "game", "schedule", "mode", "profile_policy", "rounds",
                  "repetitions", "seed", "backend", "live", "decoding",
                  "probe_enabled", "transcript", "transcript_max_bytes",
                  "final_profile", "record_timing", "opponent_id"},
                 "config");
  ExperimentConfig cfg;
  try {
    cfg.name = j.value("name", cfg.name);
    if (j.contains("game")) cfg.game = parse_game(j.at("game").get<std::string>());
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      reject_unknown(s, {"initial", "switched", "switch_round"}, "schedule");
      SwitchSchedule sched;
      if (s.contains("initial")) sched.initial = policy_from(s.at("initial"), "schedule.initial");
      if (s.contains("switched")) {
        sched.switched = policy_from(s.at("switched"), "schedule.switched");
      }
      if (s.contains("switch_round")) sched.switch_round = s.at("switch_round").get<int>();
      if (sched.switched.has_value() != sched.switch_round.has_value()) {
        throw DomainError("schedule needs both 'switched' and 'switch_round'");
      }
      cfg.schedule = sched;
    }
    if (j.contains("mode")) cfg.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("profile_policy")) {
      const auto& p = j.at("profile_policy");
      reject_unknown(p, {"kind", "freeze_round", "source_run"}, "profile_policy");
      cfg.profile_policy.kind = parse_policy_kind(p.value("kind", std::string("continuous")));
      cfg.profile_policy.freeze_round = p.value("freeze_round", 0);
      cfg.profile_policy.source_run = p.value("source_run", std::string());
    }
    cfg.rounds = j.value("rounds", cfg.rounds);
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("backend")) {
      const auto b = j.at("backend").get<std::string>();
      if (b == "mock") {
        cfg.backend = BackendKind::Mock;
      } else if (b == "live") {
        cfg.backend = BackendKind::Live;
      } else {
        throw DomainError("unknown backend '" + b + "'");
      }
    }
    if (j.contains("live")) {
      const auto& l = j.at("live");
      reject_unknown(l, {"api_base", "model", "timeout_seconds", "max_retries", "concurrency"},
                     "live");
      cfg.live.api_base = l.value("api_base", cfg.live.api_base);
      cfg.live.model = l.value("model", cfg.live.model);
      cfg.live.timeout_seconds = l.value("timeout_seconds", cfg.live.timeout_seconds);
      cfg.live.max_retries = l.value("max_retries", cfg.live.max_retries);
      cfg.live.concurrency = l.value("concurrency", cfg.live.concurrency);
    }
    if (j.contains("decoding")) {
      const auto& d = j.at("decoding");
      reject_unknown(d, {"temperature", "top_p", "top_k", "min_p"}, "decoding");
      cfg.decoding.temperature = d.value("temperature", cfg.decoding.temperature);
      cfg.decoding.top_p = d.value("top_p", cfg.decoding.top_p);
      cfg.decoding.top_k = d.value("top_k", cfg.decoding.top_k);
      cfg.decoding.min_p = d.value("min_p", cfg.decoding.min_p);
    }
    cfg.probe_enabled = j.value("probe_enabled", cfg.probe_enabled);
    if (j.contains("transcript") && !j.at("transcript").is_null()) {
      cfg.transcript = j.at("transcript").get<bool>();
    }
    cfg.transcript_max_bytes = j.value("transcript_max_bytes", cfg.transcript_max_bytes);
    cfg.final_profile = j.value("final_profile", cfg.final_profile);
    cfg.record_timing = j.value("record_timing", cfg.record_timing);
    cfg.opponent_id = j.value("opponent_id", cfg.opponent_id);
  } catch (const json::exception& e) {
    throw DomainError(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace eti
