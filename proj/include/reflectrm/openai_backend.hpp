#pragma once

// HTTP client for OpenAI-compatible chat-completions and completions
// endpoints (vLLM, SGLang, llama.cpp server, hosted APIs) that return
// sampled-token log-probabilities.

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "reflectrm/backend.hpp"

namespace reflectrm {

enum class ApiFlavor { kChat, kCompletions };

struct BackendConfig {
  std::string endpoint_url = "http://127.0.0.1:8000/v1";  // base URL, path suffix appended per flavor
  std::string model_name;
  std::string auth_token;  // never read from config files
  std::size_t max_in_flight = 8;
  std::chrono::milliseconds request_timeout{120'000};
  int retry_budget = 3;
  ApiFlavor api = ApiFlavor::kChat;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{8'000};

  void validate() const;
};

class OpenAIBackend : public Backend {
 public:
  explicit OpenAIBackend(BackendConfig config);

  Completion generate(const std::string& prompt, const SamplingParams& params) override;

  /// Runs up to max_in_flight requests at once.
  std::vector<Completion> generate_batch(std::span<const std::string> prompts,
                                         const SamplingParams& params) override;

  nlohmann::json build_request_body(const std::string& prompt, const SamplingParams& params) const;

  /// Throws LogprobsUnsupported when logprobs were requested but are absent,
  /// BackendUnavailable when the body is not a completion response.
  static Completion parse_response(const nlohmann::json& body, ApiFlavor api, bool want_logprobs);

  /// Highest number of simultaneously outstanding requests observed.
  std::size_t peak_in_flight() const;

  const BackendConfig& config() const { return config_; }

 private:
  struct Endpoint {
    std::string scheme_host_port;
    std::string path;
  };

  Completion send_once(const std::string& body, bool want_logprobs, bool& retryable);
  void acquire_slot();
  void release_slot();

  BackendConfig config_;
  Endpoint endpoint_;
  mutable std::mutex gate_mu_;
  std::condition_variable gate_cv_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
};

}  // namespace reflectrm
