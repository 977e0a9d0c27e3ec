#pragma once

// Bottom-fraction log-probability confidence and anchor selection.
//
// The confidence of a generated sequence is the mean log-probability of its
// k lowest-probability tokens, k = max(1, floor(fraction * L)).

#include <cstddef>
#include <span>
#include <vector>

#include "reflectrm/core.hpp"

namespace reflectrm {

struct ConfidenceParams {
  double fraction = 0.10;

  void validate() const;  // requires 0 < fraction <= 1
};

/// Number of tokens in the bottom set for a sequence of `length` tokens.
std::size_t bottom_count(std::size_t length, double fraction);

/// The k smallest values in ascending order; equal values at the boundary are
/// taken in order of earliest position. Throws EmptySequence on empty input.
std::vector<double> bottom_tokens(std::span<const double> logprobs, double fraction);

/// Mean of bottom_tokens(logprobs, fraction), summed in ascending order.
double confidence_score(std::span<const double> logprobs, double fraction);

double confidence(const JudgmentOutput& output, const ConfidenceParams& params);

/// Index of the highest-confidence output; ties go to the lowest index.
/// Throws EmptySequence on an empty list and std::invalid_argument when an
/// output has no confidence.
std::size_t select_anchor(std::span<const JudgmentOutput> outputs);

}  // namespace reflectrm
