#pragma once

// Text generation with per-token log-probabilities.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reflectrm/core.hpp"

namespace reflectrm {

struct SamplingParams {
  double temperature = 1.0;
  int max_tokens = 1024;
  bool want_logprobs = true;
  std::optional<std::uint64_t> seed;

  void validate() const;
};

enum class FinishReason { kStop, kLength, kError };

enum class FailureKind { kNone, kUnavailable, kLogprobsUnsupported };

std::string_view to_string(FinishReason r);
FinishReason finish_reason_from_string(std::string_view s);

struct Completion {
  std::string text;
  std::vector<TokenScore> token_scores;
  FinishReason finish_reason = FinishReason::kStop;
  // Populated only when finish_reason == kError.
  FailureKind failure = FailureKind::kNone;
  std::string error;

  bool failed() const { return finish_reason == FinishReason::kError; }
};

/// Rethrows the typed error carried by a failed batch item.
void throw_if_failed(const Completion& c);

class Backend {
 public:
  virtual ~Backend() = default;

  /// Throws BackendUnavailable or LogprobsUnsupported.
  virtual Completion generate(const std::string& prompt, const SamplingParams& params) = 0;

  /// Output i answers prompts[i]. Failures are reported per item through
  /// finish_reason == kError; the call itself only throws on an empty list.
  /// The default implementation runs the prompts sequentially.
  virtual std::vector<Completion> generate_batch(std::span<const std::string> prompts,
                                                 const SamplingParams& params);

 protected:
  static Completion failure_from_current_exception();
};

}  // namespace reflectrm
