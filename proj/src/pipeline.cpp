#include "reflectrm/pipeline.hpp"

#include <algorithm>
#include <string>

#include "reflectrm/prompts.hpp"
#include "reflectrm/rng.hpp"

namespace reflectrm {

void PipelineConfig::validate() const {
  if (n_rollouts < 1) throw ConfigError("n_rollouts must be >= 1");
  if (parse_retry_budget < 0) throw ConfigError("parse_retry_budget must be >= 0");
  sampling.validate();
  confidence.validate();
}

namespace {

// nullopt when the completion must be resampled.
std::optional<JudgmentOutput> try_parse_rollout(Completion&& c, const ConfidenceParams& params) {
  if (c.token_scores.empty()) return std::nullopt;
  try {
    auto parsed = parse_judgment(c.text);
    JudgmentOutput out;
    out.analysis = std::move(parsed.analysis);
    out.prediction = parsed.prediction;
    out.raw_text = std::move(c.text);
    out.token_scores = std::move(c.token_scores);
    out.confidence = confidence(out, params);
    return out;
  } catch (const MalformedOutput&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<JudgmentOutput> stage1_rollouts(Backend& backend, const PreferenceInstance& instance,
                                            const PipelineConfig& config) {
  config.validate();
  instance.validate();
  const auto n = static_cast<std::size_t>(config.n_rollouts);
  const std::string prompt = render_response_preference(instance.query, instance.response_1, instance.response_2);

  std::vector<std::optional<JudgmentOutput>> slots(n);
  std::vector<std::size_t> pending(n);
  for (std::size_t i = 0; i < n; ++i) pending[i] = i;

  for (int attempt = 0; !pending.empty(); ++attempt) {
    if (attempt > config.parse_retry_budget) {
      throw RolloutExhausted("instance '" + instance.id + "': rollout " + std::to_string(pending.front()) +
                             " produced no parseable output in " + std::to_string(attempt) + " attempt(s)");
    }
    const std::vector<std::string> prompts(pending.size(), prompt);
    auto completions = backend.generate_batch(prompts, config.sampling);
    std::vector<std::size_t> still_pending;
    for (std::size_t j = 0; j < pending.size(); ++j) {
      throw_if_failed(completions[j]);
      slots[pending[j]] = try_parse_rollout(std::move(completions[j]), config.confidence);
      if (!slots[pending[j]]) still_pending.push_back(pending[j]);
    }
    pending = std::move(still_pending);
  }

  std::vector<JudgmentOutput> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

CritiqueOrder reflection_order(const PipelineConfig& config, std::string_view instance_id,
                               std::size_t candidate_index) {
  const auto bits = derive_seed(config.rng_seed, instance_id, RngStream::kReflectionOrder, candidate_index);
  return (bits & 1U) != 0 ? CritiqueOrder::kAnchorFirst : CritiqueOrder::kCandidateFirst;
}

std::vector<ReflectionVerdict> stage2_reflect(Backend& backend, const PreferenceInstance& instance,
                                              std::span<const JudgmentOutput> outputs, std::size_t anchor_index,
                                              const PipelineConfig& config) {
  if (anchor_index >= outputs.size()) throw std::out_of_range("stage2_reflect: anchor index out of range");
  std::vector<ReflectionVerdict> verdicts;
  if (outputs.size() < 2) return verdicts;

  std::vector<std::string> prompts;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (i == anchor_index) continue;
    ReflectionVerdict v;
    v.candidate_index = i;
    v.permutation = reflection_order(config, instance.id, i);
    const auto& candidate = outputs[i].analysis;
    const auto& anchor = outputs[anchor_index].analysis;
    const bool candidate_first = v.permutation == CritiqueOrder::kCandidateFirst;
    prompts.push_back(render_analysis_preference(instance.query, instance.response_1, instance.response_2,
                                                 candidate_first ? candidate : anchor,
                                                 candidate_first ? anchor : candidate));
    verdicts.push_back(std::move(v));
  }

  std::vector<std::size_t> pending(verdicts.size());
  for (std::size_t j = 0; j < pending.size(); ++j) pending[j] = j;

  for (int attempt = 0; !pending.empty() && attempt <= config.parse_retry_budget; ++attempt) {
    std::vector<std::string> batch;
    batch.reserve(pending.size());
    for (auto j : pending) batch.push_back(prompts[j]);
    auto completions = backend.generate_batch(batch, config.sampling);
    std::vector<std::size_t> still_pending;
    for (std::size_t k = 0; k < pending.size(); ++k) {
      throw_if_failed(completions[k]);
      auto& v = verdicts[pending[k]];
      try {
        auto parsed = parse_reflection(completions[k].text, v.permutation);
        v.meta_analysis = std::move(parsed.meta_analysis);
        v.preferred = parsed.preferred;
      } catch (const MalformedOutput&) {
        still_pending.push_back(pending[k]);
      }
    }
    pending = std::move(still_pending);
  }

  for (auto j : pending) {
    // reflection_fallback has a single mode: the anchor keeps its place.
    verdicts[j].preferred = Preferred::kAnchor;
    verdicts[j].meta_analysis.clear();
    verdicts[j].fallback = true;
  }
  return verdicts;
}

std::vector<std::size_t> winner_group(std::span<const ReflectionVerdict> verdicts) {
  std::vector<std::size_t> group;
  for (const auto& v : verdicts) {
    if (v.preferred == Preferred::kCandidate) group.push_back(v.candidate_index);
  }
  std::sort(group.begin(), group.end());
  group.erase(std::unique(group.begin(), group.end()), group.end());
  return group;
}

VoteResult final_vote(std::span<const std::size_t> group, std::span<const JudgmentOutput> outputs,
                      std::size_t anchor_index) {
  if (anchor_index >= outputs.size()) throw std::out_of_range("final_vote: anchor index out of range");
  VoteResult r;
  for (auto i : group) {
    if (i >= outputs.size()) throw std::out_of_range("final_vote: group index out of range");
    (outputs[i].prediction == Side::kFirst ? r.counts.first : r.counts.second) += 1;
  }
  if (group.empty() || r.counts.tied()) {
    // One extra vote turns an even tie (or an empty group) into a strict
    // majority, so the vote is repeated exactly once.
    r.anchor_included = true;
    (outputs[anchor_index].prediction == Side::kFirst ? r.counts.first : r.counts.second) += 1;
  }
  r.prediction = r.counts.first > r.counts.second ? Side::kFirst : Side::kSecond;
  return r;
}

InferenceTrace judge_with_anchor(Backend& backend, const PreferenceInstance& instance,
                                 std::vector<JudgmentOutput> rollouts, std::size_t anchor_index,
                                 const PipelineConfig& config) {
  InferenceTrace trace;
  trace.instance_id = instance.id;
  trace.anchor_index = anchor_index;
  trace.verdicts = stage2_reflect(backend, instance, rollouts, anchor_index, config);
  trace.winner_group = winner_group(trace.verdicts);
  const auto vote = final_vote(trace.winner_group, rollouts, anchor_index);
  trace.anchor_included = vote.anchor_included;
  trace.vote_counts = vote.counts;
  trace.final_prediction = vote.prediction;
  trace.rollouts = std::move(rollouts);
  return trace;
}

InferenceTrace judge(Backend& backend, const PreferenceInstance& instance, const PipelineConfig& config) {
  auto rollouts = stage1_rollouts(backend, instance, config);
  const auto anchor = select_anchor(rollouts);
  return judge_with_anchor(backend, instance, std::move(rollouts), anchor, config);
}

VoteResult revote(const InferenceTrace& trace) {
  return final_vote(trace.winner_group, trace.rollouts, trace.anchor_index);
}

}  // namespace reflectrm
