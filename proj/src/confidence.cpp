#include "reflectrm/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace reflectrm {

void ConfidenceParams::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("confidence fraction must lie in (0, 1]");
  }
}

std::size_t bottom_count(std::size_t length, double fraction) {
  // The epsilon absorbs representation error, e.g. 0.1 * 30 must give 3.
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(length) + 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(length, 1));
}

std::vector<double> bottom_tokens(std::span<const double> logprobs, double fraction) {
  if (logprobs.empty()) throw EmptySequence("bottom_tokens: empty log-probability sequence");
  const std::size_t k = bottom_count(logprobs.size(), fraction);

  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(logprobs.size());
  for (std::size_t i = 0; i < logprobs.size(); ++i) keyed.emplace_back(logprobs[i], i);
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(k), keyed.end());

  std::vector<double> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(keyed[i].first);
  return out;
}

double confidence_score(std::span<const double> logprobs, double fraction) {
  const auto bottom = bottom_tokens(logprobs, fraction);
  const double sum = std::accumulate(bottom.begin(), bottom.end(), 0.0);
  return sum / static_cast<double>(bottom.size());
}

double confidence(const JudgmentOutput& output, const ConfidenceParams& params) {
  std::vector<double> logprobs;
  logprobs.reserve(output.token_scores.size());
  for (const auto& t : output.token_scores) logprobs.push_back(t.logprob);
  return confidence_score(logprobs, params.fraction);
}

std::size_t select_anchor(std::span<const JudgmentOutput> outputs) {
  if (outputs.empty()) throw EmptySequence("select_anchor: no outputs");
  std::size_t best = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (!outputs[i].confidence) {
      throw std::invalid_argument("select_anchor: output " + std::to_string(i) + " has no confidence");
    }
    if (*outputs[i].confidence > *outputs[best].confidence) best = i;
  }
  return best;
}

}  // namespace reflectrm
