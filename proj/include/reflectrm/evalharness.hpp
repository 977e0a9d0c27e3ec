#pragma once

// Benchmark evaluation: pairwise accuracy, positional consistency and the
// inference baselines/ablations, over normalized PreferenceInstance data.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflectrm/backend.hpp"
#include "reflectrm/pipeline.hpp"

namespace reflectrm {

enum class StrategyKind {
  kReflectRM,       // full two-stage judgment
  kGreedySingle,    // one rollout, its prediction
  kMajorityVote,    // m rollouts, plain majority
  kAnchorOnly,      // N rollouts, the most confident one's prediction
  kRandomAnchor,    // two-stage judgment around a uniformly drawn anchor
  kRandomWinners,   // winner group replaced by a uniform draw of the same size
};

struct JudgeStrategy {
  StrategyKind kind = StrategyKind::kReflectRM;
  std::optional<int> m;  // majority_vote_m only

  static constexpr int kDefaultMajorityRollouts = 15;

  /// Accepts reflectrm, greedy_single, majority_vote_m[:M], anchor_only,
  /// random_anchor, random_winners. Throws ConfigError.
  static JudgeStrategy parse(std::string_view name);
  std::string name() const;
  void validate() const;
};

/// Exchanges the responses, flips the gold label and toggles a "#swapped"
/// suffix on the id, so swapping twice restores the instance exactly.
PreferenceInstance swap_instance(const PreferenceInstance& instance);

inline constexpr std::string_view kSwappedSuffix = "#swapped";

/// Seeded uniform sample of `k` instances without replacement, kept in
/// dataset order. Returns the whole dataset when k >= its size.
std::vector<PreferenceInstance> subsample_dataset(std::span<const PreferenceInstance> dataset, std::size_t k,
                                                  std::uint64_t seed);

/// Judges one instance. random_anchor reuses `reference` rollouts and
/// random_winners its rollouts, anchor and winner-group size; both compute a
/// fresh two-stage trace when no reference is given.
InferenceTrace run_strategy(Backend& backend, const PreferenceInstance& instance, const JudgeStrategy& strategy,
                            const PipelineConfig& config, const InferenceTrace* reference = nullptr);

struct InstanceResult {
  std::string instance_id;
  std::optional<Side> gold_label;
  std::optional<InferenceTrace> trace;
  std::string error;  // non-empty when judging failed; counted as incorrect
  bool backend_failure = false;

  bool correct() const { return trace && gold_label && trace->final_prediction == *gold_label; }
  nlohmann::json to_json(const JudgeStrategy& strategy, std::string_view ordering) const;
};

struct EvalOptions {
  std::string dataset_id = "dataset";
  std::size_t parallelism = 1;
  // When set, per-instance traces go to <dir>/<dataset_id>.<strategy>.traces.jsonl.
  std::optional<std::filesystem::path> traces_dir;
};

struct EvalReport {
  std::string dataset_id;
  JudgeStrategy strategy;
  std::size_t n_instances = 0;
  std::size_t n_correct = 0;
  std::size_t n_errors = 0;
  double accuracy = 0.0;
  std::optional<double> accuracy_swapped;
  std::optional<double> positional_consistency;
  std::string traces_path;

  nlohmann::json to_json() const;
};

struct EvalRun {
  EvalReport report;
  std::vector<InstanceResult> results;
  std::vector<InstanceResult> swapped_results;  // consistency runs only
};

std::filesystem::path traces_file(const EvalOptions& options, const JudgeStrategy& strategy);

/// Throws ConfigError when an instance lacks a gold label. Per-instance
/// failures are recorded, never rethrown.
EvalRun evaluate_accuracy(Backend& backend, std::span<const PreferenceInstance> dataset,
                          const JudgeStrategy& strategy, const PipelineConfig& config, const EvalOptions& options);

/// Judges every instance in both orderings; an instance counts only when both
/// predictions match their gold labels.
EvalRun evaluate_positional_consistency(Backend& backend, std::span<const PreferenceInstance> dataset,
                                        const JudgeStrategy& strategy, const PipelineConfig& config,
                                        const EvalOptions& options);

/// One run per strategy over the same dataset. When the list holds reflectrm,
/// random_anchor or random_winners, each instance's two-stage trace is
/// computed once and shared by those strategies and anchor_only.
std::vector<EvalRun> run_ablation(Backend& backend, std::span<const PreferenceInstance> dataset,
                                  std::span<const JudgeStrategy> strategies, const PipelineConfig& config,
                                  const EvalOptions& options);

/// Strategies as rows, datasets as columns (accuracy x100), AVG and delta
/// against the first row.
std::string format_summary(std::span<const EvalReport> reports);

}  // namespace reflectrm
