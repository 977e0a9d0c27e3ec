#include "reflectrm/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ordered_sink.hpp"
#include "parallel.hpp"
#include "reflectrm/rng.hpp"
#include "reflectrm/scripted_backend.hpp"
#include "reflectrm/serialization.hpp"

namespace reflectrm {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::optional<std::string> file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a64(ss.str()));
}

std::string_view to_string(BackendType t) { return t == BackendType::kScripted ? "scripted" : "openai"; }

std::string_view to_string(ApiFlavor a) { return a == ApiFlavor::kChat ? "chat" : "completions"; }

// Rejects keys outside `allowed` so that typos do not silently fall back to defaults.
void check_keys(const json& section, std::string_view name, std::initializer_list<std::string_view> allowed) {
  if (!section.is_object()) throw ConfigError("config section '" + std::string(name) + "' must be an object");
  for (const auto& [key, _] : section.items()) {
    if (key == "auth_token" || key == "api_key" || key == "token") {
      throw ConfigError("config key '" + key + "': credentials are read from the environment only (see auth_env)");
    }
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown config key '" + std::string(name) + "." + key + "'");
    }
  }
}

template <class T>
void read_key(const json& section, std::string_view key, T& dst) {
  const auto it = section.find(key);
  if (it == section.end()) return;
  try {
    dst = it->template get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + std::string(key) + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() ? base / path : path;
}

void require_file(const std::optional<fs::path>& path, std::string_view what) {
  if (!path) throw ConfigError(std::string(what) + " path is required");
  if (!fs::is_regular_file(*path)) throw ConfigError(std::string(what) + " not found: " + path->string());
}

void require_output(const std::optional<fs::path>& path) {
  if (!path) throw ConfigError("output path is required");
  const auto parent = path->parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ConfigError("output directory does not exist: " + parent.string());
  }
}

fs::path sidecar(const fs::path& output, std::string_view suffix) {
  fs::path p = output;
  p += suffix;
  return p;
}

// The scripted backend serves entries by arrival order, so it is only
// reproducible with one instance in flight.
std::size_t effective_parallelism(const RunConfig& config, std::ostream& err) {
  if (config.backend_type == BackendType::kScripted && config.parallelism > 1) {
    err << "note: scripted backend runs with parallelism 1\n";
    return 1;
  }
  return std::max<std::size_t>(config.parallelism, 1);
}

json manifest(const RunConfig& config, std::string_view command) {
  json m;
  m["tool"] = "reflectrm";
  m["tool_version"] = kToolVersion;
  m["command"] = command;
  m["template_version"] = kTemplateVersion;
  m["seed"] = config.pipeline.rng_seed;
  m["config_hash"] = config.config_hash();
  m["settings"] = config.settings_json();
  if (config.input) {
    m["input"] = {{"name", config.input->filename().string()}, {"hash", file_hash(*config.input).value_or("")}};
  }
  return m;
}

int exit_for(std::size_t n_ok, std::size_t n_failed, std::size_t n_backend_failed) {
  if (n_failed == 0) return kExitOk;
  if (n_ok == 0 && n_backend_failed == n_failed) return kExitBackendFailure;
  return kExitPartialFailure;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const EmptySide& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const InsufficientPool& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const BackendUnavailable& e) {
    err << "backend failure: " << e.what() << '\n';
    return kExitBackendFailure;
  } catch (const LogprobsUnsupported& e) {
    err << "backend failure: " << e.what() << '\n';
    return kExitBackendFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitPartialFailure;
  }
}

}  // namespace

json RunConfig::settings_json() const {
  json backend_j = {{"type", to_string(backend_type)}};
  if (backend_type == BackendType::kOpenAI) {
    backend_j["model"] = backend.model_name;
    backend_j["api"] = to_string(backend.api);
  } else if (script) {
    backend_j["script_hash"] = file_hash(*script).value_or("");
  }
  json strategies_j = json::array();
  for (const auto& s : strategies) strategies_j.push_back(s.name());
  return {
      {"backend", backend_j},
      {"pipeline",
       {{"n_rollouts", pipeline.n_rollouts},
        {"temperature", pipeline.sampling.temperature},
        {"max_tokens", pipeline.sampling.max_tokens},
        {"bottom_fraction", pipeline.confidence.fraction},
        {"seed", pipeline.rng_seed},
        {"parse_retry_budget", pipeline.parse_retry_budget},
        {"reflection_fallback", "anchor_wins"}}},
      {"eval",
       {{"strategies", strategies_j},
        {"consistency", consistency},
        {"dataset_id", dataset_id},
        {"subsample", subsample ? json(*subsample) : json(nullptr)}}},
      {"data",
       {{"ratio", ratio.str()},
        {"sample_size", sample_size ? json(*sample_size) : json(nullptr)},
        {"backbone", backbone}}},
  };
}

std::string RunConfig::config_hash() const { return hex64(fnv1a64(settings_json().dump())); }

void apply_config_file(RunConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  check_keys(doc, "<root>", {"backend", "pipeline", "eval", "data", "paths"});
  const auto base = path.parent_path();

  if (doc.contains("backend")) {
    const auto& b = doc["backend"];
    check_keys(b, "backend",
               {"type", "endpoint", "model", "api", "max_in_flight", "timeout_s", "retry_budget", "backoff_base_ms",
                "backoff_cap_ms", "auth_env", "script"});
    std::string type = std::string(to_string(config.backend_type));
    read_key(b, "type", type);
    if (type == "openai") {
      config.backend_type = BackendType::kOpenAI;
    } else if (type == "scripted") {
      config.backend_type = BackendType::kScripted;
    } else {
      throw ConfigError("backend.type must be 'openai' or 'scripted'");
    }
    read_key(b, "endpoint", config.backend.endpoint_url);
    read_key(b, "model", config.backend.model_name);
    std::string api = std::string(to_string(config.backend.api));
    read_key(b, "api", api);
    if (api == "chat") {
      config.backend.api = ApiFlavor::kChat;
    } else if (api == "completions") {
      config.backend.api = ApiFlavor::kCompletions;
    } else {
      throw ConfigError("backend.api must be 'chat' or 'completions'");
    }
    read_key(b, "max_in_flight", config.backend.max_in_flight);
    read_key(b, "retry_budget", config.backend.retry_budget);
    double timeout_s = static_cast<double>(config.backend.request_timeout.count()) / 1000.0;
    read_key(b, "timeout_s", timeout_s);
    if (!(timeout_s > 0)) throw ConfigError("backend.timeout_s must be positive");
    config.backend.request_timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
    long long base_ms = config.backend.backoff_base.count();
    long long cap_ms = config.backend.backoff_cap.count();
    read_key(b, "backoff_base_ms", base_ms);
    read_key(b, "backoff_cap_ms", cap_ms);
    if (base_ms < 0 || cap_ms < 0) throw ConfigError("backoff durations must be non-negative");
    config.backend.backoff_base = std::chrono::milliseconds(base_ms);
    config.backend.backoff_cap = std::chrono::milliseconds(cap_ms);
    read_key(b, "auth_env", config.auth_env);
    if (b.contains("script")) {
      std::string s;
      read_key(b, "script", s);
      config.script = resolve(base, s);
    }
  }

  if (doc.contains("pipeline")) {
    const auto& p = doc["pipeline"];
    check_keys(p, "pipeline",
               {"n_rollouts", "temperature", "max_tokens", "bottom_fraction", "seed", "parse_retry_budget"});
    read_key(p, "n_rollouts", config.pipeline.n_rollouts);
    read_key(p, "temperature", config.pipeline.sampling.temperature);
    read_key(p, "max_tokens", config.pipeline.sampling.max_tokens);
    read_key(p, "bottom_fraction", config.pipeline.confidence.fraction);
    read_key(p, "seed", config.pipeline.rng_seed);
    read_key(p, "parse_retry_budget", config.pipeline.parse_retry_budget);
  }

  if (doc.contains("eval")) {
    const auto& e = doc["eval"];
    check_keys(e, "eval", {"strategies", "consistency", "parallelism", "dataset_id", "subsample"});
    if (e.contains("strategies")) {
      std::vector<std::string> names;
      read_key(e, "strategies", names);
      if (names.empty()) throw ConfigError("eval.strategies must not be empty");
      config.strategies.clear();
      for (const auto& n : names) config.strategies.push_back(JudgeStrategy::parse(n));
    }
    read_key(e, "consistency", config.consistency);
    read_key(e, "parallelism", config.parallelism);
    read_key(e, "dataset_id", config.dataset_id);
    if (e.contains("subsample")) {
      std::size_t k = 0;
      read_key(e, "subsample", k);
      config.subsample = k;
    }
  }

  if (doc.contains("data")) {
    const auto& d = doc["data"];
    check_keys(d, "data", {"ratio", "sample_size", "backbone"});
    if (d.contains("ratio")) {
      std::string r;
      read_key(d, "ratio", r);
      config.ratio = MixRatio::parse(r);
    }
    if (d.contains("sample_size")) {
      std::size_t k = 0;
      read_key(d, "sample_size", k);
      config.sample_size = k;
    }
    read_key(d, "backbone", config.backbone);
  }

  if (doc.contains("paths")) {
    const auto& p = doc["paths"];
    check_keys(p, "paths", {"input", "output", "traces"});
    for (auto [key, dst] : {std::pair{"input", &config.input}, {"output", &config.output}, {"traces", &config.traces}}) {
      if (!p.contains(key)) continue;
      std::string s;
      read_key(p, key, s);
      *dst = resolve(base, s);
    }
  }
}

std::unique_ptr<Backend> make_backend(const RunConfig& config) {
  if (config.backend_type == BackendType::kScripted) {
    require_file(config.script, "backend script");
    return std::make_unique<ScriptedBackend>(ScriptedBackend::load_script(*config.script));
  }
  auto bc = config.backend;
  if (const char* token = std::getenv(config.auth_env.c_str())) bc.auth_token = token;
  return std::make_unique<OpenAIBackend>(std::move(bc));
}

int cmd_judge(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.pipeline.validate();
    require_file(config.input, "input");
    require_output(config.output);
    const auto instances = read_instances(*config.input);
    auto backend = make_backend(config);
    const auto parallelism = effective_parallelism(config, err);

    std::vector<std::string> errors(instances.size());
    std::vector<char> backend_failed(instances.size(), 0);
    {
      detail::OrderedSink sink(*config.output);
      detail::parallel_for(instances.size(), parallelism, [&](std::size_t i) {
        json record;
        try {
          record = to_json(judge(*backend, instances[i], config.pipeline));
        } catch (const std::exception& e) {
          errors[i] = e.what();
          backend_failed[i] = dynamic_cast<const BackendUnavailable*>(&e) != nullptr ||
                              dynamic_cast<const LogprobsUnsupported*>(&e) != nullptr;
          record = {{"instance_id", instances[i].id}, {"error", errors[i]}};
        }
        sink.submit(i, {std::move(record)});
      });
    }

    std::size_t n_failed = 0;
    std::size_t n_backend = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (errors[i].empty()) continue;
      ++n_failed;
      n_backend += backend_failed[i] ? 1 : 0;
      err << "instance '" << instances[i].id << "': " << errors[i] << '\n';
    }
    const std::size_t n_ok = instances.size() - n_failed;
    auto m = manifest(config, "judge");
    m["outputs"] = {{"traces", config.output->filename().string()}};
    m["counts"] = {{"instances", instances.size()}, {"judged", n_ok}, {"failed", n_failed}};
    write_json_file(sidecar(*config.output, ".manifest.json"), m);
    out << "judged " << n_ok << "/" << instances.size() << " instance(s) -> " << config.output->string() << '\n';
    return exit_for(n_ok, n_failed, n_backend);
  });
}

int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.pipeline.validate();
    if (config.strategies.empty()) throw ConfigError("no strategy given");
    for (const auto& s : config.strategies) s.validate();
    require_file(config.input, "input");
    require_output(config.output);
    const fs::path out_dir = config.output->parent_path().empty() ? fs::path(".") : config.output->parent_path();
    const fs::path traces_dir = config.traces.value_or(out_dir);
    fs::create_directories(traces_dir);

    auto dataset = read_instances(*config.input);
    for (const auto& inst : dataset) {
      if (!inst.gold_label) throw ConfigError("instance '" + inst.id + "' has no gold label");
    }
    json subsample_j = nullptr;
    if (config.subsample) {
      dataset = subsample_dataset(dataset, *config.subsample, config.pipeline.rng_seed);
      json ids = json::array();
      for (const auto& inst : dataset) ids.push_back(inst.id);
      subsample_j = {{"size", dataset.size()}, {"ids", std::move(ids)}};
    }
    auto backend = make_backend(config);

    EvalOptions options;
    options.dataset_id = config.dataset_id.empty() ? config.input->stem().string() : config.dataset_id;
    options.parallelism = effective_parallelism(config, err);
    options.traces_dir = traces_dir;

    std::vector<EvalRun> runs;
    if (config.consistency) {
      for (const auto& s : config.strategies) {
        runs.push_back(evaluate_positional_consistency(*backend, dataset, s, config.pipeline, options));
      }
    } else {
      runs = run_ablation(*backend, dataset, config.strategies, config.pipeline, options);
    }

    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    std::size_t n_backend = 0;
    std::vector<EvalReport> reports;
    json reports_j = json::array();
    for (auto& run : runs) {
      for (const auto* results : {&run.results, &run.swapped_results}) {
        for (const auto& r : *results) {
          if (r.error.empty()) {
            ++n_ok;
          } else {
            ++n_failed;
            n_backend += r.backend_failure ? 1 : 0;
          }
        }
      }
      // Relative to the report so that a copied run directory stays self-consistent.
      run.report.traces_path = fs::proximate(traces_file(options, run.report.strategy), out_dir).generic_string();
      reports.push_back(run.report);
      reports_j.push_back(run.report.to_json());
    }
    const auto summary = format_summary(reports);
    write_json_file(*config.output, {{"dataset_id", options.dataset_id}, {"reports", reports_j}});
    {
      std::ofstream s(sidecar(*config.output, ".summary.txt"));
      s << summary;
    }
    auto m = manifest(config, "eval");
    m["subsample"] = subsample_j;
    m["outputs"] = {{"report", config.output->filename().string()},
                    {"summary", sidecar(*config.output, ".summary.txt").filename().string()}};
    write_json_file(sidecar(*config.output, ".manifest.json"), m);
    out << summary;
    if (n_failed > 0) err << n_failed << " judgment(s) failed; see the error field in the traces\n";
    return exit_for(n_ok, n_failed, n_backend);
  });
}

int cmd_build_data(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.pipeline.validate();
    require_file(config.input, "input");
    require_output(config.output);
    const auto corpus = read_instances(*config.input);
    for (const auto& inst : corpus) {
      if (!inst.gold_label) throw ConfigError("instance '" + inst.id + "' has no gold label");
    }
    auto backend = make_backend(config);

    std::vector<ProfileFailure> failures;
    const auto profiles =
        profile_corpus(*backend, corpus, config.pipeline, effective_parallelism(config, err), &failures);
    for (const auto& f : failures) err << "instance '" << f.instance_id << "': " << f.error << '\n';
    const auto n_backend = static_cast<std::size_t>(
        std::count_if(failures.begin(), failures.end(), [](const auto& f) { return f.backend_failure; }));
    if (profiles.empty() && !failures.empty()) return exit_for(0, failures.size(), n_backend);

    const auto eligible = static_cast<std::size_t>(std::count_if(
        profiles.begin(), profiles.end(), [](const auto& p) { return p.classification != ProfileClass::kAllCorrect; }));
    const auto pref = build_pref(profiles, config.sample_size.value_or(eligible), config.pipeline.rng_seed);
    const auto refl = build_refl(profiles, config.pipeline.rng_seed);
    const auto mixed = mix_datasets(pref, refl, config.ratio, config.pipeline.rng_seed);
    {
      JsonlWriter writer(*config.output);
      for (const auto& r : mixed) writer.write(to_json(r));
    }
    const auto stats = summarize(profiles, mixed, config.ratio);
    auto stats_j = stats.to_json();
    stats_j["pool"] = {{"pref", pref.size()}, {"refl", refl.size()}};
    stats_j["failed_instances"] = failures.size();
    stats_j["table"] = stats.table(config.backbone);
    write_json_file(sidecar(*config.output, ".stats.json"), stats_j);

    auto m = manifest(config, "build-data");
    m["ratio"] = config.ratio.str();
    m["outputs"] = {{"records", config.output->filename().string()},
                    {"stats", sidecar(*config.output, ".stats.json").filename().string()}};
    m["counts"] = {{"pref", stats.n_pref}, {"refl", stats.n_refl}, {"sum", stats.total()}};
    write_json_file(sidecar(*config.output, ".manifest.json"), m);
    out << stats.table(config.backbone);
    return exit_for(profiles.size(), failures.size(), n_backend);
  });
}

int cmd_dump_prompts(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::ostringstream text;
    text << "# reflectrm prompt templates, version " << kTemplateVersion << '\n';
    for (auto kind : {PromptKind::kResponsePreference, PromptKind::kAnalysisPreference}) {
      if (config.prompt_kind && *config.prompt_kind != kind) continue;
      text << "\n## " << to_string(kind) << '\n' << prompt_template(kind) << '\n';
    }
    if (config.output) {
      require_output(config.output);
      std::ofstream f(*config.output, std::ios::binary);
      if (!f) throw ConfigError("cannot open output: " + config.output->string());
      f << text.str();
    }
    out << text.str();
    return kExitOk;
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage self-reflective LLM preference judge", "reflectrm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  struct Flags {
    std::string config, input, output, traces, script, endpoint, model, ratio, dataset_id, kind;
    std::vector<std::string> strategies;
    std::uint64_t seed = 0;
    int n_rollouts = 0;
    std::size_t sample_size = 0, parallelism = 0, subsample = 0;
    bool consistency = false;
  } f;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--input", f.input, "input JSONL of preference instances");
    sub->add_option("--output", f.output, "output path");
    sub->add_option("--seed", f.seed, "base random seed");
    sub->add_option("--n-rollouts", f.n_rollouts, "rollouts per instance (N)");
    sub->add_option("--endpoint", f.endpoint, "OpenAI-compatible base URL");
    sub->add_option("--model", f.model, "model name");
    sub->add_option("--script", f.script, "scripted backend JSONL (selects the scripted backend)");
    sub->add_option("--parallelism", f.parallelism, "instances judged concurrently");
  };

  auto* judge_cmd = app.add_subcommand("judge", "judge every instance and write one trace per line");
  common(judge_cmd);
  auto* eval_cmd = app.add_subcommand("eval", "benchmark accuracy, positional consistency and ablations");
  common(eval_cmd);
  eval_cmd->add_option("--strategy", f.strategies, "strategy name (repeatable or comma-separated)")
                         ->delimiter(',');
  eval_cmd->add_option("--traces", f.traces, "directory for per-instance traces");
  eval_cmd->add_flag("--consistency", f.consistency, "judge both orderings of every pair");
  eval_cmd->add_option("--dataset-id", f.dataset_id, "dataset name used in reports");
  eval_cmd->add_option("--subsample", f.subsample, "seeded uniform sample of K instances");
  auto* data_cmd = app.add_subcommand("build-data", "build the mixed pref/refl training set");
  common(data_cmd);
  data_cmd->add_option("--ratio", f.ratio, "pref:refl mixing ratio, e.g. 4:1");
  data_cmd->add_option("--sample-size", f.sample_size, "pref instances to sample");
  auto* dump_cmd = app.add_subcommand("dump-prompts", "print the prompt templates");
  dump_cmd->add_option("--kind", f.kind, "response_preference or analysis_preference");
  dump_cmd->add_option("--output", f.output, "also write the templates to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  CLI::App* active = app.get_subcommands().front();
  const auto given = [&](const std::string& name) {
    const auto* opt = active->get_option_no_throw("--" + name);
    return opt != nullptr && opt->count() > 0;
  };

  RunConfig config;
  try {
    if (dump_cmd->parsed()) {
      if (!f.kind.empty()) config.prompt_kind = prompt_kind_from_string(f.kind);
      if (!f.output.empty()) config.output = f.output;
      return cmd_dump_prompts(config, out, err);
    }
    if (given("config")) apply_config_file(config, f.config);
    if (given("input")) config.input = f.input;
    if (given("output")) config.output = f.output;
    if (given("seed")) config.pipeline.rng_seed = f.seed;
    if (given("n-rollouts")) config.pipeline.n_rollouts = f.n_rollouts;
    if (given("endpoint")) config.backend.endpoint_url = f.endpoint;
    if (given("model")) config.backend.model_name = f.model;
    if (given("script")) {
      config.backend_type = BackendType::kScripted;
      config.script = f.script;
    }
    if (given("parallelism")) config.parallelism = f.parallelism;
    if (given("strategy")) {
      config.strategies.clear();
      for (const auto& s : f.strategies) config.strategies.push_back(JudgeStrategy::parse(s));
    }
    if (given("traces")) config.traces = f.traces;
    if (given("consistency")) config.consistency = f.consistency;
    if (given("dataset-id")) config.dataset_id = f.dataset_id;
    if (given("subsample")) config.subsample = f.subsample;
    if (given("ratio")) config.ratio = MixRatio::parse(f.ratio);
    if (given("sample-size")) config.sample_size = f.sample_size;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  }

  if (judge_cmd->parsed()) return cmd_judge(config, out, err);
  if (eval_cmd->parsed()) return cmd_eval(config, out, err);
  return cmd_build_data(config, out, err);
}

}  // namespace reflectrm
