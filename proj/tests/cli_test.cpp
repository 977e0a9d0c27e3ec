#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "reflectrm/cli.hpp"
#include "support/script_files.hpp"

namespace reflectrm {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using testing::labelled_instances;
using testing::slurp;
using testing::write_eval_script;
using testing::write_instances;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("reflectrm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    std::vector<const char*> argv{"reflectrm"};
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return run_cli(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  std::vector<std::string> lines(const std::string& name) const {
    std::ifstream in(dir_ / name);
    std::vector<std::string> v;
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, JudgeWritesOneTracePerInstance) {
  write_instances(dir_ / "in.jsonl", labelled_instances(3));
  write_eval_script(dir_ / "script.jsonl", 3, 8);
  EXPECT_EQ(run({"judge", "--input", p("in.jsonl"), "--output", p("traces.jsonl"), "--script", p("script.jsonl")}),
            kExitOk)
      << err_.str();
  const auto l = lines("traces.jsonl");
  ASSERT_EQ(l.size(), 3U);
  for (std::size_t i = 0; i < l.size(); ++i) {
    const auto j = json::parse(l[i]);
    EXPECT_EQ(j["instance_id"], "inst-" + std::to_string(i));
    EXPECT_EQ(j["rollouts"].size(), 8U);
    EXPECT_EQ(j["verdicts"].size(), 7U);
  }
  const auto m = json::parse(slurp(dir_ / "traces.jsonl.manifest.json"));
  EXPECT_EQ(m["command"], "judge");
  EXPECT_EQ(m["template_version"], kTemplateVersion);
  EXPECT_EQ(m["counts"]["judged"], 3);
  EXPECT_EQ(slurp(dir_ / "traces.jsonl.manifest.json").find(dir_.string()), std::string::npos);
}

TEST_F(CliTest, JudgePartialFailure) {
  write_instances(dir_ / "in.jsonl", labelled_instances(3));
  write_eval_script(dir_ / "script.jsonl", 2, 8);
  EXPECT_EQ(run({"judge", "--input", p("in.jsonl"), "--output", p("t.jsonl"), "--script", p("script.jsonl")}),
            kExitPartialFailure);
  const auto l = lines("t.jsonl");
  ASSERT_EQ(l.size(), 3U);
  EXPECT_TRUE(json::parse(l[2]).contains("error"));
}

TEST_F(CliTest, MissingInputIsConfigError) {
  EXPECT_EQ(run({"judge", "--input", p("nope.jsonl"), "--output", p("t.jsonl"), "--endpoint", "http://127.0.0.1:9/v1"}),
            kExitConfigError);
  EXPECT_NE(err_.str().find("input"), std::string::npos);
}

TEST_F(CliTest, UnknownStrategyIsConfigError) {
  write_instances(dir_ / "in.jsonl", labelled_instances(1));
  EXPECT_EQ(run({"eval", "--input", p("in.jsonl"), "--output", p("r.json"), "--strategy", "best_of_n"}),
            kExitConfigError);
}

TEST_F(CliTest, UnreachableEndpointIsBackendFailure) {
  write_instances(dir_ / "in.jsonl", labelled_instances(2));
  std::ofstream(dir_ / "cfg.json") << R"({"backend": {"endpoint": "http://127.0.0.1:9/v1", "model": "m",
    "retry_budget": 0, "timeout_s": 2, "backoff_base_ms": 1}})";
  EXPECT_EQ(run({"judge", "--config", p("cfg.json"), "--input", p("in.jsonl"), "--output", p("t.jsonl")}),
            kExitBackendFailure)
      << err_.str();
}

TEST_F(CliTest, CredentialsInConfigAreRejected) {
  write_instances(dir_ / "in.jsonl", labelled_instances(1));
  for (const auto* key : {"auth_token", "api_key", "token"}) {
    std::ofstream(dir_ / "cfg.json") << json{{"backend", {{key, "abc"}}}}.dump();
    EXPECT_EQ(run({"judge", "--config", p("cfg.json"), "--input", p("in.jsonl"), "--output", p("t.jsonl")}),
              kExitConfigError)
        << key;
  }
}

TEST_F(CliTest, UnknownConfigKeyIsRejected) {
  std::ofstream(dir_ / "cfg.json") << R"({"pipeline": {"n_rolouts": 4}})";
  EXPECT_EQ(run({"dump-prompts", "--config", p("cfg.json")}), kExitConfigError);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  RunConfig c;
  std::ofstream(dir_ / "cfg.json") << R"({"pipeline": {"n_rollouts": 4, "seed": 9},
    "paths": {"input": "data/in.jsonl"}, "backend": {"type": "scripted", "script": "s.jsonl"}})";
  apply_config_file(c, dir_ / "cfg.json");
  EXPECT_EQ(c.pipeline.n_rollouts, 4);
  EXPECT_EQ(c.pipeline.rng_seed, 9U);
  EXPECT_EQ(*c.input, dir_ / "data/in.jsonl");
  EXPECT_EQ(c.backend_type, BackendType::kScripted);

  write_instances(dir_ / "in.jsonl", labelled_instances(1));
  write_eval_script(dir_ / "script.jsonl", 1, 3);
  std::ofstream(dir_ / "cfg.json") << R"({"pipeline": {"n_rollouts": 4}})";
  EXPECT_EQ(run({"judge", "--config", p("cfg.json"), "--n-rollouts", "3", "--input", p("in.jsonl"), "--output",
                 p("t.jsonl"), "--script", p("script.jsonl")}),
            kExitOk)
      << err_.str();
  EXPECT_EQ(json::parse(lines("t.jsonl").at(0))["rollouts"].size(), 3U);
}

TEST_F(CliTest, ConfigHashIgnoresPaths) {
  RunConfig a;
  RunConfig b;
  b.input = "/x/y.jsonl";
  b.output = "/z.json";
  EXPECT_EQ(a.config_hash(), b.config_hash());
  b.pipeline.rng_seed = 99;
  EXPECT_NE(a.config_hash(), b.config_hash());
  EXPECT_EQ(a.settings_json().dump().find("auth_token"), std::string::npos);
}

TEST_F(CliTest, EvalWritesReportSummaryAndTraces) {
  write_instances(dir_ / "bench.jsonl", labelled_instances(4));
  write_eval_script(dir_ / "script.jsonl", 4, 8);
  ASSERT_EQ(run({"eval", "--input", p("bench.jsonl"), "--output", p("report.json"), "--script", p("script.jsonl"),
                 "--strategy", "reflectrm,anchor_only"}),
            kExitOk)
      << err_.str();
  const auto report = json::parse(slurp(dir_ / "report.json"));
  EXPECT_EQ(report["dataset_id"], "bench");
  ASSERT_EQ(report["reports"].size(), 2U);
  EXPECT_EQ(report["reports"][0]["strategy"], "reflectrm");
  EXPECT_EQ(report["reports"][0]["n_instances"], 4);
  EXPECT_EQ(lines("bench.reflectrm.traces.jsonl").size(), 4U);
  EXPECT_EQ(lines("bench.anchor_only.traces.jsonl").size(), 4U);
  EXPECT_TRUE(out_.str().starts_with("System\tbench\tAVG\tDelta\n")) << out_.str();
  EXPECT_EQ(slurp(dir_ / "report.json.summary.txt"), out_.str());
}

TEST_F(CliTest, ConsistencyDoublesGenerations) {
  write_instances(dir_ / "bench.jsonl", labelled_instances(2));
  write_eval_script(dir_ / "script.jsonl", 4, 8);
  ASSERT_EQ(run({"eval", "--input", p("bench.jsonl"), "--output", p("report.json"), "--script", p("script.jsonl"),
                 "--consistency"}),
            kExitOk)
      << err_.str();
  const auto report = json::parse(slurp(dir_ / "report.json"))["reports"][0];
  EXPECT_TRUE(report.contains("positional_consistency"));
  EXPECT_EQ(lines("bench.reflectrm.traces.jsonl").size(), 4U);

  // Half the script is not enough for both orderings.
  write_eval_script(dir_ / "short.jsonl", 2, 8);
  EXPECT_EQ(run({"eval", "--input", p("bench.jsonl"), "--output", p("r2.json"), "--script", p("short.jsonl"),
                 "--consistency"}),
            kExitPartialFailure);
}

TEST_F(CliTest, EvalRequiresGoldLabels) {
  auto inst = labelled_instances(1);
  inst[0].gold_label.reset();
  write_instances(dir_ / "in.jsonl", inst);
  write_eval_script(dir_ / "script.jsonl", 1, 8);
  EXPECT_EQ(run({"eval", "--input", p("in.jsonl"), "--output", p("r.json"), "--script", p("script.jsonl")}),
            kExitConfigError);
}

TEST_F(CliTest, BuildDataMixesAtRatio) {
  write_instances(dir_ / "corpus.jsonl", labelled_instances(10));
  write_eval_script(dir_ / "script.jsonl", 10, 8, false);
  ASSERT_EQ(run({"build-data", "--input", p("corpus.jsonl"), "--output", p("train.jsonl"), "--script",
                 p("script.jsonl"), "--ratio", "4:1"}),
            kExitOk)
      << err_.str();
  const auto m = json::parse(slurp(dir_ / "train.jsonl.manifest.json"));
  EXPECT_EQ(m["ratio"], "4:1");
  EXPECT_EQ(m["counts"]["pref"], 10);
  EXPECT_EQ(m["counts"]["refl"], 2);
  EXPECT_EQ(lines("train.jsonl").size(), 12U);
  const auto stats = json::parse(slurp(dir_ / "train.jsonl.stats.json"));
  EXPECT_EQ(stats["pool"]["refl"], 10);
}

TEST_F(CliTest, BuildDataEmptySideIsConfigError) {
  write_instances(dir_ / "corpus.jsonl", labelled_instances(3));
  write_eval_script(dir_ / "script.jsonl", 3, 8, false);
  EXPECT_EQ(run({"build-data", "--input", p("corpus.jsonl"), "--output", p("train.jsonl"), "--script",
                 p("script.jsonl"), "--ratio", "4:1"}),
            kExitConfigError);
  EXPECT_EQ(run({"build-data", "--input", p("corpus.jsonl"), "--output", p("train.jsonl"), "--script",
                 p("script.jsonl"), "--ratio", "four"}),
            kExitConfigError);
}

TEST_F(CliTest, DumpPromptsIsStable) {
  ASSERT_EQ(run({"dump-prompts"}), kExitOk);
  const auto first = out_.str();
  EXPECT_NE(first.find("## response_preference"), std::string::npos);
  EXPECT_NE(first.find("## analysis_preference"), std::string::npos);
  EXPECT_NE(first.find("<Result>"), std::string::npos);
  EXPECT_NE(first.find("/no_think"), std::string::npos);
  ASSERT_EQ(run({"dump-prompts", "--output", p("prompts.txt")}), kExitOk);
  EXPECT_EQ(out_.str(), first);
  EXPECT_EQ(slurp(dir_ / "prompts.txt"), first);
  ASSERT_EQ(run({"dump-prompts", "--kind", "analysis_preference"}), kExitOk);
  EXPECT_EQ(out_.str().find("## response_preference"), std::string::npos);
}

TEST_F(CliTest, NoSubcommandIsUsageError) {
  EXPECT_EQ(run({}), kExitConfigError);
  EXPECT_EQ(run({"judge", "--bogus"}), kExitConfigError);
}

}  // namespace
}  // namespace reflectrm
