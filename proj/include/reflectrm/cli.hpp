#pragma once

// Command-line layer: configuration loading and the judge / eval /
// build-data / dump-prompts commands.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflectrm/databuilder.hpp"
#include "reflectrm/evalharness.hpp"
#include "reflectrm/openai_backend.hpp"
#include "reflectrm/pipeline.hpp"
#include "reflectrm/prompts.hpp"

namespace reflectrm {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitBackendFailure = 2,
  kExitPartialFailure = 3,
};

enum class BackendType { kOpenAI, kScripted };

struct RunConfig {
  BackendType backend_type = BackendType::kOpenAI;
  BackendConfig backend;
  std::string auth_env = "REFLECTRM_API_KEY";
  std::optional<std::filesystem::path> script;  // scripted backend only
  PipelineConfig pipeline;

  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> output;
  std::optional<std::filesystem::path> traces;  // eval: directory for per-instance traces

  // eval
  std::vector<JudgeStrategy> strategies{JudgeStrategy{}};
  bool consistency = false;
  std::size_t parallelism = 1;
  std::string dataset_id;
  std::optional<std::size_t> subsample;

  // build-data
  MixRatio ratio;
  std::optional<std::size_t> sample_size;
  std::string backbone = "judge";

  // dump-prompts
  std::optional<PromptKind> prompt_kind;

  /// Settings that determine results; excludes paths and credentials.
  nlohmann::json settings_json() const;
  std::string config_hash() const;
};

/// Reads a JSON config file into `config`, overriding only the keys present.
/// Throws ConfigError, including when the file carries a credential.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Scripted or HTTP backend; the auth token is read from `auth_env`.
std::unique_ptr<Backend> make_backend(const RunConfig& config);

int cmd_judge(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_build_data(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_dump_prompts(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a command; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reflectrm
