#pragma once

// Deterministic backend that replays canned completions from a script.
//
// Script records are keyed either by prompt kind ("response_preference",
// "analysis_preference"; consumed first-in first-out, so the n-th request of
// a kind receives the n-th entry of that kind) or by prompt hash
// ("hash:<16 hex digits>"; never consumed, cycling when several entries
// share one hash). Hash keys take precedence over kind queues.

#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "reflectrm/backend.hpp"

namespace reflectrm {

struct ScriptEntry {
  std::string key;
  std::string text;
  std::vector<double> logprobs;
  FinishReason finish_reason = FinishReason::kStop;
};

class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::vector<ScriptEntry> entries);

  /// JSONL, one {key, text, logprobs, finish_reason} object per line.
  static std::vector<ScriptEntry> load_script(const std::filesystem::path& path);

  static std::string hash_key(std::string_view prompt);

  Completion generate(const std::string& prompt, const SamplingParams& params) override;
  std::vector<Completion> generate_batch(std::span<const std::string> prompts,
                                         const SamplingParams& params) override;

  /// Rewinds every queue and cycle to the start of the script.
  void reset();
  std::size_t calls() const;
  std::size_t remaining(std::string_view kind_key) const;

 private:
  Completion serve_locked(const std::string& prompt, const SamplingParams& params);

  std::vector<ScriptEntry> entries_;
  mutable std::mutex mu_;
  std::map<std::string, std::deque<std::size_t>, std::less<>> queues_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> hashed_;
  std::map<std::string, std::size_t, std::less<>> hash_cursor_;
  std::size_t calls_ = 0;
};

}  // namespace reflectrm
