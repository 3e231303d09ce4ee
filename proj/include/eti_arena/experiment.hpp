#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eti_arena/agents.hpp"
#include "eti_arena/eti.hpp"
#include "eti_arena/game.hpp"
#include "eti_arena/live_backend.hpp"

namespace eti {

enum class BackendKind { Mock, Live };

struct ProfilePolicyConfig {
  ProfilePolicy kind = ProfilePolicy::Continuous;
  int freeze_round = 0;     // FrozenAfterCalibration only
  std::string source_run;   // run_<k>.jsonl file or a condition directory
  friend bool operator==(const ProfilePolicyConfig&,
                         const ProfilePolicyConfig&) = default;
};

struct ExperimentConfig {
  std::string name;  // condition label; derived from the fields when empty
  GameKind game = GameKind::StagHunt;
  SwitchSchedule schedule = SwitchSchedule::fixed({1.0, 1.0});
  AgentMode mode = AgentMode::ETI;
  ProfilePolicyConfig profile_policy;
  int rounds = 50;
  int repetitions = 25;
  std::uint64_t seed = 0;
  BackendKind backend = BackendKind::Mock;
  LiveBackendConfig live;  // endpoint/key come from the environment
  DecodingParams decoding;
  bool probe_enabled = true;
  std::optional<bool> transcript;  // default: on for mock, off for live
  std::size_t transcript_max_bytes = 256 * 1024;
  bool final_profile = false;  // extra inference over the full history at the end
  bool record_timing = false;  // wall-clock makes logs non-reproducible
  std::string opponent_id = std::string(kDefaultOpponentId);

  void validate() const;
  std::string condition_label() const;
  bool transcript_enabled() const {
    return transcript.value_or(backend == BackendKind::Mock);
  }
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Missing fields take their defaults; unknown fields are an error.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

enum class RunStatus { Complete, Failed };

struct RunAccounting {
  long calls = 0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  int inference_fallbacks = 0;
  int probes_missing = 0;
  int rejected_updates = 0;
  bool transcript_truncated = false;
  std::optional<double> wall_seconds;
  friend bool operator==(const RunAccounting&, const RunAccounting&) = default;
};

struct RunLog {
  ExperimentConfig config;
  std::string run_id;
  int run_index = 0;
  std::uint64_t run_seed = 0;
  std::vector<RoundRecord> rounds;
  std::vector<std::pair<int, TraitProfile>> profile_history;
  std::optional<TraitProfile> seed_profile;
  std::optional<TraitProfile> final_profile;
  std::map<int, std::vector<Exchange>> transcript;  // keyed by round
  RunStatus status = RunStatus::Complete;
  std::string failure;
  std::optional<int> truncated_at;
  RunAccounting accounting;

  bool complete() const noexcept { return status == RunStatus::Complete; }
  friend bool operator==(const RunLog&, const RunLog&) = default;
};

}  // namespace eti
