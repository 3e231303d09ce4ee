#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eti_arena/eti.hpp"
#include "eti_arena/game.hpp"

namespace eti {

// Qwen3-8B recommended defaults; the mock ignores them.
struct DecodingParams {
  double temperature = 0.6;
  double top_p = 0.95;
  int top_k = 20;
  double min_p = 0.0;

  void validate() const;
  friend bool operator==(const DecodingParams&, const DecodingParams&) = default;
};

struct Completion {
  std::string text;
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

// Text-generation contract. Implementations are stateless from the caller's
// point of view: everything the model sees is in the prompt.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual Completion complete(const ChatPrompt& prompt,
                              const DecodingParams& params) = 0;
  // Upper bound on concurrent complete() calls the harness may issue.
  virtual std::size_t max_concurrency() const noexcept = 0;
  virtual std::string name() const = 0;
};

enum class AgentMode { BaselineCoT, ETI };

std::string_view to_string(AgentMode m) noexcept;  // "baseline" / "eti"
AgentMode parse_mode(std::string_view s);

struct Exchange {
  std::string kind;  // "decision", "probe", "inference" (+ "-retry")
  ChatPrompt prompt;
  std::string response;
  friend bool operator==(const Exchange&, const Exchange&) = default;
};

// Per-run accounting of backend calls. Transcript capture stops once
// max_transcript_bytes is reached.
struct CallLog {
  bool capture_transcript = false;
  std::size_t max_transcript_bytes = 256 * 1024;

  long calls = 0;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  std::size_t transcript_bytes = 0;
  bool transcript_truncated = false;
  std::vector<Exchange> pending;  // drained into the round record by the harness

  Completion call(GenerationBackend& backend, std::string kind,
                  const ChatPrompt& prompt, const DecodingParams& params);
};

inline constexpr std::string_view kDefaultOpponentId = "RB";
inline constexpr std::string_view kDefaultAgentId = "Agent A";

// Everything an agent sees at one decision point.
struct AgentView {
  const PayoffTable& table;
  std::span<const RoundRecord> history;  // rounds strictly before the current
  const ProfileStore* store = nullptr;   // required in ETI mode, absent otherwise
  std::string opponent_id = std::string(kDefaultOpponentId);
};

ChatPrompt build_decision_prompt(AgentMode mode, const AgentView& view);
ChatPrompt build_probe_prompt(AgentMode mode, const AgentView& view);
ChatPrompt build_agent_inference_prompt(const AgentView& view);

// Last "ANSWER: <action>" line naming an action of `game`.
std::optional<Action> extract_action(GameKind game, std::string_view text);
// Both "COOPERATIVE: yes|no" and "COMPETENT: yes|no" must be present.
std::optional<std::pair<bool, bool>> extract_probe(std::string_view text);

struct DecisionResult {
  Action action;
  std::string rationale;
};

inline constexpr int kDecisionRetries = 2;
inline constexpr int kProbeRetries = 2;
inline constexpr int kInferenceRetries = 1;

// Throws DomainError on a mode/store mismatch and AgentOutputError when no
// valid action appears after kDecisionRetries retries.
DecisionResult decide_action(AgentMode mode, const AgentView& view,
                             GenerationBackend& backend,
                             const DecodingParams& params, CallLog& log);

// Measurement only: the result is never fed back into any prompt. Returns
// nullopt (probe missing) when parsing fails after kProbeRetries retries.
std::optional<ProbeResult> probe_traits(AgentMode mode, const AgentView& view,
                                        GenerationBackend& backend,
                                        const DecodingParams& params,
                                        CallLog& log);

struct InferenceResult {
  TraitProfile profile;
  bool fell_back = false;  // previous (or N/A) profile carried forward
};

// One retry with an error-describing reprompt, then falls back to `previous`
// relabelled to `round`, or to an all-N/A profile.
InferenceResult infer_profile(const AgentView& view, int round,
                              const TraitProfile* previous,
                              GenerationBackend& backend,
                              const DecodingParams& params, CallLog& log);

// ---------------------------------------------------------------------------
// Offline frequency agent.

struct FrequencyEstimate {
  int observations = 0;
  int cooperative = 0;
  int successful = 0;
  double cooperation = 0.5;
  double competence = 0.5;
};

// Laplace-smoothed estimates (count + 2*prior) / (n + 2); the default prior
// of 0.5 gives (count + 1) / (n + 2).
FrequencyEstimate estimate_from_counts(int observations, int cooperative,
                                       int successful, double prior_cooperation = 0.5,
                                       double prior_competence = 0.5);
FrequencyEstimate estimate_from_history(std::span<const RoundRecord> history);

// Prior means implied by a profile: average of (rating-1)/6 over the rated
// traits of each dimension, maliciousness reverse-keyed. 0.5 if none rated.
std::pair<double, double> profile_prior(const TraitProfile& profile);

Action mock_decision(const PayoffTable& table, const FrequencyEstimate& est);
// Ties (exactly 0.5) resolve to true.
std::pair<bool, bool> mock_probe(const FrequencyEstimate& est);
// Warmth ratings round(1 + 6*cooperation) (maliciousness mirrored), competence
// ratings round(1 + 6*competence).
TraitProfile mock_profile(const FrequencyEstimate& est, std::string subject,
                          int round);

// Deterministic backend that reads the rendered history (and any injected
// profile) back out of the prompt and answers like the frequency agent.
class MockFrequencyBackend final : public GenerationBackend {
 public:
  explicit MockFrequencyBackend(std::size_t concurrency = 0);
  Completion complete(const ChatPrompt& prompt,
                      const DecodingParams& params) override;
  std::size_t max_concurrency() const noexcept override { return concurrency_; }
  std::string name() const override { return "mock"; }

 private:
  std::size_t concurrency_;
};

}  // namespace eti
