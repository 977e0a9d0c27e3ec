#pragma once

// Training-data construction from a labeled preference corpus.
//
// Each instance is profiled with N sampled judgments. Instances the base
// judge always gets right are excluded. The rest feed the preference set
// ("pref"); instances with mixed outcomes additionally yield exactly one
// reflection pair ("refl"): one correct-outcome analysis against one
// incorrect-outcome analysis, in random order, labeled with the position of
// the correct one. The two sets are then mixed at a pref:refl ratio.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflectrm/backend.hpp"
#include "reflectrm/pipeline.hpp"

namespace reflectrm {

enum class ProfileClass { kAllCorrect, kMixed, kAllWrong };

std::string_view to_string(ProfileClass c);

struct RolloutOutcome {
  JudgmentOutput output;
  bool correct = false;
};

struct RolloutProfile {
  PreferenceInstance instance;
  std::vector<RolloutOutcome> outcomes;
  ProfileClass classification = ProfileClass::kAllWrong;
};

/// Throws std::invalid_argument on an empty outcome list.
ProfileClass classify(std::span<const RolloutOutcome> outcomes);

/// Requires instance.gold_label.
RolloutProfile profile_instance(Backend& backend, const PreferenceInstance& instance, const PipelineConfig& config);

struct ProfileFailure {
  std::string instance_id;
  std::string error;
  bool backend_failure = false;
};

/// Profiles every instance, up to `parallelism` at a time, in corpus order.
/// Without `failures` the first error propagates; with it, failing instances
/// are recorded there and left out of the result.
std::vector<RolloutProfile> profile_corpus(Backend& backend, std::span<const PreferenceInstance> corpus,
                                           const PipelineConfig& config, std::size_t parallelism = 1,
                                           std::vector<ProfileFailure>* failures = nullptr);

enum class RecordKind { kPref, kRefl };

std::string_view to_string(RecordKind k);

struct Provenance {
  Side gold_label = Side::kFirst;
  ProfileClass classification = ProfileClass::kMixed;
  // refl only: rollout index and prediction behind critique 1 and critique 2.
  std::optional<std::array<std::size_t, 2>> source_rollouts;
  std::optional<std::array<Side, 2>> source_predictions;
};

struct TrainingRecord {
  RecordKind kind = RecordKind::kPref;
  std::string instance_id;
  std::string query;
  std::string response_1;
  std::string response_2;
  std::optional<std::pair<std::string, std::string>> critiques;  // refl only, in emitted order
  Side label = Side::kFirst;  // preferred response (pref) or critique position (refl)
  Provenance provenance;
};

/// Training record plus its rendered judge prompt under the current template.
nlohmann::json to_json(const TrainingRecord& record);

/// Drops all-correct profiles and draws `sample_size` of the rest uniformly
/// without replacement (emitted in corpus order). Throws InsufficientPool.
std::vector<TrainingRecord> build_pref(std::span<const RolloutProfile> profiles, std::size_t sample_size,
                                       std::uint64_t seed);

/// One record per mixed profile, nothing for the others.
std::vector<TrainingRecord> build_refl(std::span<const RolloutProfile> profiles, std::uint64_t seed);

struct MixRatio {
  unsigned pref = 4;
  unsigned refl = 1;

  /// Parses "A:B"; throws std::invalid_argument.
  static MixRatio parse(std::string_view text);
  std::string str() const;
};

/// Keeps the under-supplied side whole and downsamples the other to the
/// requested ratio (integer truncation), then shuffles. Throws EmptySide when
/// a side the ratio asks for is empty or truncates to nothing.
std::vector<TrainingRecord> mix_datasets(std::span<const TrainingRecord> pref, std::span<const TrainingRecord> refl,
                                         MixRatio ratio, std::uint64_t seed);

struct DatasetStats {
  std::size_t n_instances = 0;
  std::size_t n_all_correct = 0;
  std::size_t n_mixed = 0;
  std::size_t n_all_wrong = 0;
  std::size_t n_pref = 0;
  std::size_t n_refl = 0;
  MixRatio requested_ratio;

  std::size_t total() const { return n_pref + n_refl; }
  double achieved_ratio() const;
  nlohmann::json to_json() const;
  /// Pref. / Refl. / Sum row layout.
  std::string table(std::string_view backbone) const;
};

DatasetStats summarize(std::span<const RolloutProfile> profiles, std::span<const TrainingRecord> mixed,
                       MixRatio ratio);

}  // namespace reflectrm
