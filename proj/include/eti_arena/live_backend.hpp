#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <json.hpp>

#include "eti_arena/agents.hpp"

namespace eti {

inline constexpr std::string_view kEnvApiBase = "ETI_ARENA_API_BASE";
inline constexpr std::string_view kEnvApiKey = "ETI_ARENA_API_KEY";
inline constexpr std::string_view kEnvConcurrency = "ETI_ARENA_CONCURRENCY";

struct LiveBackendConfig {
  std::string api_base;  // e.g. "http://localhost:8000/v1"
  std::string api_key;
  std::string model = "Qwen/Qwen3-8B";
  double timeout_seconds = 120.0;
  int max_retries = 3;
  std::size_t concurrency = 4;

  // Fills api_base, api_key and concurrency from the environment, keeping the
  // current values for unset variables.
  void apply_env();
  friend bool operator==(const LiveBackendConfig&,
                         const LiveBackendConfig&) = default;
};

// OpenAI-style chat-completion request body.
nlohmann::json build_chat_request(const LiveBackendConfig& cfg,
                                  const ChatPrompt& prompt,
                                  const DecodingParams& params);
// choices[0].message.content plus usage counts; throws TransportError on a
// body that does not have that shape.
Completion parse_chat_response(std::string_view body);

// POSTs to <api_base>/chat/completions. Transport failures, 429 and 5xx are
// retried with exponential backoff; anything else throws TransportError.
class ChatCompletionBackend final : public GenerationBackend {
 public:
  explicit ChatCompletionBackend(LiveBackendConfig cfg);
  Completion complete(const ChatPrompt& prompt,
                      const DecodingParams& params) override;
  std::size_t max_concurrency() const noexcept override {
    return cfg_.concurrency;
  }
  std::string name() const override { return "live"; }

 private:
  LiveBackendConfig cfg_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace eti
