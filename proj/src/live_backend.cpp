#include "eti_arena/live_backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "eti_arena/errors.hpp"

namespace eti {

using nlohmann::json;

void LiveBackendConfig::apply_env() {
  if (const char* v = std::getenv(std::string(kEnvApiBase).c_str()); v && *v) {
    api_base = v;
  }
  if (const char* v = std::getenv(std::string(kEnvApiKey).c_str()); v && *v) {
    api_key = v;
  }
  if (const char* v = std::getenv(std::string(kEnvConcurrency).c_str()); v && *v) {
    const long n = std::strtol(v, nullptr, 10);
    if (n > 0) concurrency = static_cast<std::size_t>(n);
  }
}

json build_chat_request(const LiveBackendConfig& cfg, const ChatPrompt& prompt,
                        const DecodingParams& params) {
  return json{
      {"model", cfg.model},
      {"messages",
       json::array({json{{"role", "system"}, {"content", prompt.system}},
                    json{{"role", "user"}, {"content", prompt.user}}})},
      {"temperature", params.temperature},
      {"top_p", params.top_p},
      {"top_k", params.top_k},
      {"min_p", params.min_p},
  };
}

Completion parse_chat_response(std::string_view body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw TransportError("chat response is not JSON");
  try {
    Completion c;
    const auto& content = j.at("choices").at(0).at("message").at("content");
    c.text = content.is_null() ? std::string{} : content.get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      c.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
      c.completion_tokens = j["usage"].value("completion_tokens", 0L);
    }
    return c;
  } catch (const json::exception& e) {
    throw TransportError(std::string("unexpected chat response shape: ") +
                         e.what());
  }
}

ChatCompletionBackend::ChatCompletionBackend(LiveBackendConfig cfg)
    : cfg_(std::move(cfg)) {
  if (cfg_.api_base.empty()) {
    throw TransportError(std::string(kEnvApiBase) + " is not set");
  }
  // Split "http://host:port/v1" into the client address and the path prefix.
  const auto scheme_end = cfg_.api_base.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = cfg_.api_base.find('/', host_start);
  scheme_host_port_ = cfg_.api_base.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos
                     ? std::string{}
                     : cfg_.api_base.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') {
    path_prefix_.pop_back();
  }
  if (cfg_.concurrency == 0) cfg_.concurrency = 1;
}

Completion ChatCompletionBackend::complete(const ChatPrompt& prompt,
                                           const DecodingParams& params) {
  httplib::Client client(scheme_host_port_);
  if (!client.is_valid()) {
    throw TransportError("unsupported endpoint " + cfg_.api_base);
  }
  const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
  const auto usecs = static_cast<time_t>(
      (cfg_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  if (!cfg_.api_key.empty()) client.set_bearer_token_auth(cfg_.api_key);

  const std::string body = build_chat_request(cfg_, prompt, params).dump();
  const std::string path = path_prefix_ + "/chat/completions";
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          static_cast<long>(250 * std::pow(2.0, attempt - 1))));
    }
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return parse_chat_response(res->body);
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) break;
  }
  throw TransportError("chat completion failed (" + last_error + ") at " +
                       cfg_.api_base);
}

}  // namespace eti
