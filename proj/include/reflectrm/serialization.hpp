#pragma once

// JSON mapping of the core types and JSONL file helpers.
//
// Trace record layout:
//   {instance_id, rollouts: [{analysis, prediction, confidence}], anchor_index,
//    verdicts: [{candidate_index, permutation, preferred}], winner_group,
//    anchor_included, vote_counts: [votes_for_1, votes_for_2], final_prediction}

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflectrm/core.hpp"

namespace reflectrm {

nlohmann::json to_json(const PreferenceInstance& instance);
/// Accepts "query" or "context" for the query text; gold_label may be absent or null.
PreferenceInstance instance_from_json(const nlohmann::json& j);

nlohmann::json to_json(const InferenceTrace& trace);
/// Inverse of to_json(InferenceTrace); raw text and token scores are not
/// part of the record and come back empty.
InferenceTrace trace_from_json(const nlohmann::json& j);

/// Throws ConfigError when the file cannot be opened or a line is invalid.
std::vector<PreferenceInstance> read_instances(const std::filesystem::path& path);

/// Appends one JSON document per line. Each line is written and flushed whole.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path, bool append = false);

  void write(const nlohmann::json& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

/// Writes `doc` pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace reflectrm
