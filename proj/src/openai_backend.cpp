#include "reflectrm/openai_backend.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "httplib.h"

namespace reflectrm {

using json = nlohmann::json;

namespace {

constexpr double kLogprobFloor = -1e4;

double sanitize_logprob(double v) {
  if (std::isnan(v)) return kLogprobFloor;
  return std::clamp(v, kLogprobFloor, 0.0);
}

bool is_transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::chrono::milliseconds full_jitter(std::chrono::milliseconds base, std::chrono::milliseconds cap, int attempt) {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  const double ceiling =
      std::min(static_cast<double>(cap.count()), static_cast<double>(base.count()) * std::ldexp(1.0, attempt));
  std::uniform_real_distribution<double> dist(0.0, std::max(ceiling, 0.0));
  return std::chrono::milliseconds(static_cast<long long>(dist(rng)));
}

std::vector<TokenScore> chat_logprobs(const json& choice) {
  const auto lp = choice.find("logprobs");
  if (lp == choice.end() || lp->is_null()) throw LogprobsUnsupported("response carries no logprobs");
  const auto content = lp->find("content");
  if (content == lp->end() || !content->is_array()) throw LogprobsUnsupported("logprobs.content missing");
  std::vector<TokenScore> out;
  out.reserve(content->size());
  for (const auto& t : *content) {
    const auto v = t.find("logprob");
    if (v == t.end() || !v->is_number()) throw LogprobsUnsupported("token entry without numeric logprob");
    out.push_back({t.value("token", std::string{}), sanitize_logprob(v->get<double>())});
  }
  return out;
}

std::vector<TokenScore> legacy_logprobs(const json& choice) {
  const auto lp = choice.find("logprobs");
  if (lp == choice.end() || lp->is_null()) throw LogprobsUnsupported("response carries no logprobs");
  const auto values = lp->find("token_logprobs");
  if (values == lp->end() || !values->is_array()) throw LogprobsUnsupported("logprobs.token_logprobs missing");
  const auto tokens = lp->find("tokens");
  std::vector<TokenScore> out;
  out.reserve(values->size());
  for (std::size_t i = 0; i < values->size(); ++i) {
    const auto& v = (*values)[i];
    if (!v.is_number()) throw LogprobsUnsupported("non-numeric token logprob");
    std::string token;
    if (tokens != lp->end() && tokens->is_array() && i < tokens->size() && (*tokens)[i].is_string()) {
      token = (*tokens)[i].get<std::string>();
    }
    out.push_back({std::move(token), sanitize_logprob(v.get<double>())});
  }
  return out;
}

}  // namespace

void BackendConfig::validate() const {
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (retry_budget < 0) throw ConfigError("retry_budget must be >= 0");
  if (!endpoint_url.starts_with("http://") && !endpoint_url.starts_with("https://")) {
    throw ConfigError("endpoint must be an http:// or https:// URL: " + endpoint_url);
  }
  if (model_name.empty()) throw ConfigError("model name is required");
}

OpenAIBackend::OpenAIBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.endpoint_url.find("://") + 3;
  const auto path_begin = config_.endpoint_url.find('/', scheme_end);
  std::string base_path;
  if (path_begin == std::string::npos) {
    endpoint_.scheme_host_port = config_.endpoint_url;
  } else {
    endpoint_.scheme_host_port = config_.endpoint_url.substr(0, path_begin);
    base_path = config_.endpoint_url.substr(path_begin);
  }
  while (!base_path.empty() && base_path.back() == '/') base_path.pop_back();
  endpoint_.path = base_path + (config_.api == ApiFlavor::kChat ? "/chat/completions" : "/completions");
}

json OpenAIBackend::build_request_body(const std::string& prompt, const SamplingParams& params) const {
  json body;
  body["model"] = config_.model_name;
  if (config_.api == ApiFlavor::kChat) {
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
    if (params.want_logprobs) body["logprobs"] = true;
  } else {
    body["prompt"] = prompt;
    if (params.want_logprobs) body["logprobs"] = 1;
  }
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_tokens;
  body["stream"] = false;
  if (params.seed) body["seed"] = *params.seed;
  return body;
}

Completion OpenAIBackend::parse_response(const json& body, ApiFlavor api, bool want_logprobs) {
  const auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) {
    throw BackendUnavailable("response has no choices");
  }
  const auto& choice = choices->front();
  Completion c;
  if (api == ApiFlavor::kChat) {
    const auto msg = choice.find("message");
    if (msg == choice.end() || !msg->is_object()) throw BackendUnavailable("chat choice has no message");
    const auto content = msg->find("content");
    if (content != msg->end() && content->is_string()) c.text = content->get<std::string>();
  } else {
    c.text = choice.value("text", std::string{});
  }
  const auto fr = choice.find("finish_reason");
  c.finish_reason = FinishReason::kStop;
  if (fr != choice.end() && fr->is_string()) {
    try {
      c.finish_reason = finish_reason_from_string(fr->get<std::string>());
    } catch (const std::invalid_argument&) {
      c.finish_reason = FinishReason::kStop;
    }
  }
  if (want_logprobs) {
    c.token_scores = api == ApiFlavor::kChat ? chat_logprobs(choice) : legacy_logprobs(choice);
    if (c.token_scores.empty() && !c.text.empty()) throw LogprobsUnsupported("empty logprob list");
  }
  return c;
}

void OpenAIBackend::acquire_slot() {
  std::unique_lock lock(gate_mu_);
  gate_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void OpenAIBackend::release_slot() {
  {
    std::lock_guard lock(gate_mu_);
    --in_flight_;
  }
  gate_cv_.notify_one();
}

std::size_t OpenAIBackend::peak_in_flight() const {
  std::lock_guard lock(gate_mu_);
  return peak_;
}

Completion OpenAIBackend::send_once(const std::string& body, bool want_logprobs, bool& retryable) {
  httplib::Client client(endpoint_.scheme_host_port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.request_timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.request_timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  if (!config_.auth_token.empty()) client.set_bearer_token_auth(config_.auth_token);

  acquire_slot();
  auto res = client.Post(endpoint_.path, body, "application/json");
  release_slot();

  if (!res) {
    retryable = true;
    throw BackendUnavailable("request to " + endpoint_.scheme_host_port + endpoint_.path +
                             " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    retryable = is_transient_status(res->status);
    throw BackendUnavailable("HTTP " + std::to_string(res->status) + " from " + endpoint_.path + ": " +
                             res->body.substr(0, 200));
  }
  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::exception& e) {
    retryable = false;
    throw BackendUnavailable(std::string("unparseable response body: ") + e.what());
  }
  retryable = false;
  return parse_response(parsed, config_.api, want_logprobs);
}

Completion OpenAIBackend::generate(const std::string& prompt, const SamplingParams& params) {
  params.validate();
  const std::string body = build_request_body(prompt, params).dump();
  for (int attempt = 0;; ++attempt) {
    bool retryable = false;
    try {
      return send_once(body, params.want_logprobs, retryable);
    } catch (const BackendUnavailable& e) {
      if (!retryable || attempt >= config_.retry_budget) {
        throw BackendUnavailable(std::string(e.what()) + " (after " + std::to_string(attempt + 1) + " attempt(s))");
      }
    }
    std::this_thread::sleep_for(full_jitter(config_.backoff_base, config_.backoff_cap, attempt));
  }
}

std::vector<Completion> OpenAIBackend::generate_batch(std::span<const std::string> prompts,
                                                      const SamplingParams& params) {
  if (prompts.empty()) throw std::invalid_argument("generate_batch: empty prompt list");
  std::vector<Completion> out(prompts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      try {
        out[i] = generate(prompts[i], params);
      } catch (const Error&) {
        out[i] = failure_from_current_exception();
      }
    }
  };
  const std::size_t n_workers = std::min(prompts.size(), config_.max_in_flight);
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return out;
}

}  // namespace reflectrm
