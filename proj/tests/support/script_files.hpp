#pragma once

// Helpers that write instance and stub-script files for CLI-level tests.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflectrm/core.hpp"
#include "reflectrm/serialization.hpp"

namespace reflectrm::testing {

inline void write_instances(const std::filesystem::path& path, const std::vector<PreferenceInstance>& instances) {
  std::ofstream out(path);
  for (const auto& inst : instances) out << to_json(inst).dump() << "\n";
}

inline nlohmann::json script_line(std::string_view key, const std::string& text, std::vector<double> logprobs) {
  return {{"key", key}, {"text", text}, {"logprobs", logprobs}, {"finish_reason", "stop"}};
}

// Enough kind-queue entries for `n_instances` full two-stage judgments with
// N rollouts each. Rollout i of instance k predicts side 1 unless (i + k) is
// divisible by 3; every reflection prefers critique 1.
inline void write_eval_script(const std::filesystem::path& path, int n_instances, int n_rollouts,
                              bool with_reflections = true) {
  std::ofstream out(path);
  for (int k = 0; k < n_instances; ++k) {
    for (int i = 0; i < n_rollouts; ++i) {
      const Side pred = (i + k) % 3 == 0 ? Side::kSecond : Side::kFirst;
      const double low = -0.1 * (1 + (i * 7 + k * 3) % 11);
      out << script_line("response_preference", render_judgment_output("rollout " + std::to_string(i), pred),
                         {-0.01, low, -0.02})
                 .dump()
          << "\n";
    }
    if (!with_reflections) continue;
    for (int i = 0; i + 1 < n_rollouts; ++i) {
      out << script_line("analysis_preference", render_reflection_output("meta " + std::to_string(i), Side::kFirst),
                         {-0.05})
                 .dump()
          << "\n";
    }
  }
}

inline std::vector<PreferenceInstance> labelled_instances(int n) {
  std::vector<PreferenceInstance> v;
  for (int k = 0; k < n; ++k) {
    v.push_back({"inst-" + std::to_string(k), "question " + std::to_string(k), "first answer " + std::to_string(k),
                 "second answer " + std::to_string(k), k % 2 ? Side::kSecond : Side::kFirst});
  }
  return v;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace reflectrm::testing
