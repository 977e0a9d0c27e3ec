#include "reflectrm/backend.hpp"

#include <cmath>
#include <exception>

namespace reflectrm {

void SamplingParams::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be a finite value >= 0");
  }
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
}

std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kError: return "error";
  }
  return "error";
}

FinishReason finish_reason_from_string(std::string_view s) {
  if (s == "stop" || s == "eos" || s == "stop_sequence") return FinishReason::kStop;
  if (s == "length" || s == "max_tokens") return FinishReason::kLength;
  if (s == "error") return FinishReason::kError;
  throw std::invalid_argument("unknown finish_reason: " + std::string(s));
}

void throw_if_failed(const Completion& c) {
  if (!c.failed()) return;
  if (c.failure == FailureKind::kLogprobsUnsupported) throw LogprobsUnsupported(c.error);
  throw BackendUnavailable(c.error.empty() ? "generation failed" : c.error);
}

Completion Backend::failure_from_current_exception() {
  Completion c;
  c.finish_reason = FinishReason::kError;
  try {
    throw;
  } catch (const LogprobsUnsupported& e) {
    c.failure = FailureKind::kLogprobsUnsupported;
    c.error = e.what();
  } catch (const std::exception& e) {
    c.failure = FailureKind::kUnavailable;
    c.error = e.what();
  }
  return c;
}

std::vector<Completion> Backend::generate_batch(std::span<const std::string> prompts,
                                                const SamplingParams& params) {
  if (prompts.empty()) throw std::invalid_argument("generate_batch: empty prompt list");
  std::vector<Completion> out;
  out.reserve(prompts.size());
  for (const auto& prompt : prompts) {
    try {
      out.push_back(generate(prompt, params));
    } catch (const Error&) {
      out.push_back(failure_from_current_exception());
    }
  }
  return out;
}

}  // namespace reflectrm
