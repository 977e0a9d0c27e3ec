#pragma once

// Two-stage judgment.
//
//   1. Sample N response-preference rollouts, score each with bottom-fraction
//      log-probability confidence and take the most confident as the anchor.
//   2. Ask the judge, once per non-anchor rollout, whether that rollout's
//      analysis beats the anchor's (critique order drawn at random). The
//      rollouts that beat the anchor form the winner group; their
//      predictions are majority-voted. An empty group or a tied vote adds the
//      anchor to the group and votes again.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "reflectrm/backend.hpp"
#include "reflectrm/confidence.hpp"
#include "reflectrm/core.hpp"

namespace reflectrm {

enum class ReflectionFallback { kAnchorWins };

struct PipelineConfig {
  int n_rollouts = 8;
  SamplingParams sampling;
  ConfidenceParams confidence;
  std::uint64_t rng_seed = 0;
  int parse_retry_budget = 2;
  ReflectionFallback reflection_fallback = ReflectionFallback::kAnchorWins;

  void validate() const;
};

/// N parsed, confidence-scored rollouts. A slot whose generation does not
/// parse (or has no token log-probabilities) is resampled up to
/// parse_retry_budget times; RolloutExhausted when it never parses.
/// Backend failures propagate as BackendUnavailable / LogprobsUnsupported.
std::vector<JudgmentOutput> stage1_rollouts(Backend& backend, const PreferenceInstance& instance,
                                            const PipelineConfig& config);

/// Display order for the comparison of `candidate_index` against the anchor.
/// A pure function of (rng_seed, instance id, candidate index).
CritiqueOrder reflection_order(const PipelineConfig& config, std::string_view instance_id,
                               std::size_t candidate_index);

/// One verdict per non-anchor rollout, in ascending candidate order. Empty
/// when there is a single rollout.
std::vector<ReflectionVerdict> stage2_reflect(Backend& backend, const PreferenceInstance& instance,
                                              std::span<const JudgmentOutput> outputs, std::size_t anchor_index,
                                              const PipelineConfig& config);

/// Candidate indices whose verdict preferred the candidate, ascending.
std::vector<std::size_t> winner_group(std::span<const ReflectionVerdict> verdicts);

struct VoteResult {
  Side prediction = Side::kFirst;
  bool anchor_included = false;
  VoteCounts counts;
};

VoteResult final_vote(std::span<const std::size_t> group, std::span<const JudgmentOutput> outputs,
                      std::size_t anchor_index);

/// Stage 2 onward for already-sampled rollouts and a chosen anchor.
InferenceTrace judge_with_anchor(Backend& backend, const PreferenceInstance& instance,
                                 std::vector<JudgmentOutput> rollouts, std::size_t anchor_index,
                                 const PipelineConfig& config);

InferenceTrace judge(Backend& backend, const PreferenceInstance& instance, const PipelineConfig& config);

/// Recomputes the final prediction from a trace's own winner group, anchor and
/// rollout predictions.
VoteResult revote(const InferenceTrace& trace);

}  // namespace reflectrm
