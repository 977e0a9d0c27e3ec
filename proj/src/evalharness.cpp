#include "reflectrm/evalharness.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>

#include "ordered_sink.hpp"
#include "parallel.hpp"
#include "reflectrm/rng.hpp"
#include "reflectrm/serialization.hpp"

namespace reflectrm {

using json = nlohmann::json;

namespace {

using OrderedTraceSink = detail::OrderedSink;

void require_gold(std::span<const PreferenceInstance> dataset) {
  for (const auto& inst : dataset) {
    if (!inst.gold_label) throw ConfigError("instance '" + inst.id + "' has no gold label");
  }
}

InstanceResult judge_isolated(const PreferenceInstance& instance,
                              const std::function<InferenceTrace(const PreferenceInstance&)>& fn) {
  InstanceResult r;
  r.instance_id = instance.id;
  r.gold_label = instance.gold_label;
  try {
    r.trace = fn(instance);
  } catch (const BackendUnavailable& e) {
    r.error = e.what();
    r.backend_failure = true;
  } catch (const LogprobsUnsupported& e) {
    r.error = e.what();
    r.backend_failure = true;
  } catch (const std::exception& e) {
    r.error = e.what();
    if (r.error.empty()) r.error = "unknown error";
  }
  return r;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

EvalReport summarize_results(const EvalOptions& options, const JudgeStrategy& strategy,
                             std::span<const InstanceResult> results) {
  EvalReport report;
  report.dataset_id = options.dataset_id;
  report.strategy = strategy;
  report.n_instances = results.size();
  for (const auto& r : results) {
    report.n_correct += r.correct() ? 1 : 0;
    report.n_errors += r.error.empty() ? 0 : 1;
  }
  report.accuracy = ratio(report.n_correct, report.n_instances);
  if (options.traces_dir) report.traces_path = traces_file(options, strategy).string();
  return report;
}

// Plain majority over every rollout; an exact tie (even count) goes to the
// anchor's prediction.
InferenceTrace majority_trace(const PreferenceInstance& instance, std::vector<JudgmentOutput> rollouts) {
  InferenceTrace t;
  t.instance_id = instance.id;
  t.anchor_index = select_anchor(rollouts);
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    if (i != t.anchor_index) t.winner_group.push_back(i);
    (rollouts[i].prediction == Side::kFirst ? t.vote_counts.first : t.vote_counts.second) += 1;
  }
  t.anchor_included = true;
  if (t.vote_counts.tied()) {
    t.final_prediction = rollouts[t.anchor_index].prediction;
  } else {
    t.final_prediction = t.vote_counts.first > t.vote_counts.second ? Side::kFirst : Side::kSecond;
  }
  t.rollouts = std::move(rollouts);
  return t;
}

InferenceTrace anchor_only_trace(const PreferenceInstance& instance, std::vector<JudgmentOutput> rollouts,
                                 std::size_t anchor) {
  InferenceTrace t;
  t.instance_id = instance.id;
  t.anchor_index = anchor;
  const auto vote = final_vote({}, rollouts, anchor);
  t.anchor_included = vote.anchor_included;
  t.vote_counts = vote.counts;
  t.final_prediction = vote.prediction;
  t.rollouts = std::move(rollouts);
  return t;
}

InferenceTrace random_winners_trace(const PreferenceInstance& instance, const InferenceTrace& reference,
                                    const PipelineConfig& config) {
  InferenceTrace t;
  t.instance_id = instance.id;
  t.rollouts = reference.rollouts;
  t.anchor_index = reference.anchor_index;
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < t.rollouts.size(); ++i) {
    if (i != t.anchor_index) others.push_back(i);
  }
  auto rng = keyed_engine(config.rng_seed, instance.id, RngStream::kRandomWinners);
  std::shuffle(others.begin(), others.end(), rng);
  others.resize(std::min(others.size(), reference.winner_group.size()));
  std::sort(others.begin(), others.end());
  t.winner_group = std::move(others);
  const auto vote = final_vote(t.winner_group, t.rollouts, t.anchor_index);
  t.anchor_included = vote.anchor_included;
  t.vote_counts = vote.counts;
  t.final_prediction = vote.prediction;
  return t;
}

bool requires_reference(StrategyKind k) {
  return k == StrategyKind::kReflectRM || k == StrategyKind::kRandomAnchor || k == StrategyKind::kRandomWinners;
}

}  // namespace

JudgeStrategy JudgeStrategy::parse(std::string_view name) {
  JudgeStrategy s;
  if (name == "reflectrm") {
    s.kind = StrategyKind::kReflectRM;
  } else if (name == "greedy_single") {
    s.kind = StrategyKind::kGreedySingle;
  } else if (name == "anchor_only") {
    s.kind = StrategyKind::kAnchorOnly;
  } else if (name == "random_anchor") {
    s.kind = StrategyKind::kRandomAnchor;
  } else if (name == "random_winners") {
    s.kind = StrategyKind::kRandomWinners;
  } else if (name.starts_with("majority_vote_m")) {
    s.kind = StrategyKind::kMajorityVote;
    s.m = kDefaultMajorityRollouts;
    const auto rest = name.substr(std::string_view("majority_vote_m").size());
    if (!rest.empty()) {
      if (rest.front() != ':' || rest.size() < 2) throw ConfigError("unknown strategy: " + std::string(name));
      int m = 0;
      for (char c : rest.substr(1)) {
        if (c < '0' || c > '9') throw ConfigError("bad rollout count in strategy: " + std::string(name));
        m = m * 10 + (c - '0');
        if (m > 1'000'000) throw ConfigError("rollout count too large: " + std::string(name));
      }
      s.m = m;
    }
  } else {
    throw ConfigError("unknown strategy: " + std::string(name));
  }
  s.validate();
  return s;
}

std::string JudgeStrategy::name() const {
  switch (kind) {
    case StrategyKind::kReflectRM: return "reflectrm";
    case StrategyKind::kGreedySingle: return "greedy_single";
    case StrategyKind::kMajorityVote: return "majority_vote_m:" + std::to_string(m.value_or(kDefaultMajorityRollouts));
    case StrategyKind::kAnchorOnly: return "anchor_only";
    case StrategyKind::kRandomAnchor: return "random_anchor";
    case StrategyKind::kRandomWinners: return "random_winners";
  }
  return "reflectrm";
}

void JudgeStrategy::validate() const {
  if (kind == StrategyKind::kMajorityVote) {
    if (!m || *m < 1) throw ConfigError("majority_vote_m needs a positive rollout count");
  } else if (m) {
    throw ConfigError("rollout count m only applies to majority_vote_m");
  }
}

PreferenceInstance swap_instance(const PreferenceInstance& instance) {
  PreferenceInstance s;
  if (instance.id.ends_with(kSwappedSuffix)) {
    s.id = instance.id.substr(0, instance.id.size() - kSwappedSuffix.size());
  } else {
    s.id = instance.id + std::string(kSwappedSuffix);
  }
  s.query = instance.query;
  s.response_1 = instance.response_2;
  s.response_2 = instance.response_1;
  if (instance.gold_label) s.gold_label = opposite(*instance.gold_label);
  return s;
}

std::vector<PreferenceInstance> subsample_dataset(std::span<const PreferenceInstance> dataset, std::size_t k,
                                                  std::uint64_t seed) {
  if (k >= dataset.size()) return {dataset.begin(), dataset.end()};
  std::vector<std::size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto rng = keyed_engine(seed, "subsample", RngStream::kSubsample);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<PreferenceInstance> out;
  out.reserve(k);
  for (auto i : idx) out.push_back(dataset[i]);
  return out;
}

InferenceTrace run_strategy(Backend& backend, const PreferenceInstance& instance, const JudgeStrategy& strategy,
                            const PipelineConfig& config, const InferenceTrace* reference) {
  strategy.validate();
  switch (strategy.kind) {
    case StrategyKind::kReflectRM:
      return judge(backend, instance, config);
    case StrategyKind::kGreedySingle: {
      auto single = config;
      single.n_rollouts = 1;
      return judge(backend, instance, single);
    }
    case StrategyKind::kMajorityVote: {
      auto wide = config;
      wide.n_rollouts = *strategy.m;
      return majority_trace(instance, stage1_rollouts(backend, instance, wide));
    }
    case StrategyKind::kAnchorOnly: {
      if (reference) return anchor_only_trace(instance, reference->rollouts, reference->anchor_index);
      auto rollouts = stage1_rollouts(backend, instance, config);
      const auto anchor = select_anchor(rollouts);
      return anchor_only_trace(instance, std::move(rollouts), anchor);
    }
    case StrategyKind::kRandomAnchor: {
      auto rollouts = reference ? reference->rollouts : stage1_rollouts(backend, instance, config);
      auto rng = keyed_engine(config.rng_seed, instance.id, RngStream::kRandomAnchor);
      std::uniform_int_distribution<std::size_t> pick(0, rollouts.size() - 1);
      const auto anchor = pick(rng);
      return judge_with_anchor(backend, instance, std::move(rollouts), anchor, config);
    }
    case StrategyKind::kRandomWinners: {
      if (reference) return random_winners_trace(instance, *reference, config);
      const auto fresh = judge(backend, instance, config);
      return random_winners_trace(instance, fresh, config);
    }
  }
  throw std::logic_error("unhandled strategy");
}

json InstanceResult::to_json(const JudgeStrategy& strategy, std::string_view ordering) const {
  json j = trace ? reflectrm::to_json(*trace) : json{{"instance_id", instance_id}};
  j["strategy"] = strategy.name();
  j["ordering"] = ordering;
  j["gold_label"] = gold_label ? json(to_int(*gold_label)) : json(nullptr);
  j["correct"] = correct();
  if (!error.empty()) j["error"] = error;
  return j;
}

json EvalReport::to_json() const {
  json j;
  j["dataset_id"] = dataset_id;
  j["strategy"] = strategy.name();
  j["n_instances"] = n_instances;
  j["n_correct"] = n_correct;
  j["n_errors"] = n_errors;
  j["accuracy"] = accuracy;
  j["accuracy_swapped"] = accuracy_swapped ? json(*accuracy_swapped) : json(nullptr);
  j["positional_consistency"] = positional_consistency ? json(*positional_consistency) : json(nullptr);
  j["traces_path"] = traces_path;
  return j;
}

std::filesystem::path traces_file(const EvalOptions& options, const JudgeStrategy& strategy) {
  std::string name = strategy.name();
  std::replace(name.begin(), name.end(), ':', '_');
  return options.traces_dir.value_or(".") / (options.dataset_id + "." + name + ".traces.jsonl");
}

EvalRun evaluate_accuracy(Backend& backend, std::span<const PreferenceInstance> dataset,
                          const JudgeStrategy& strategy, const PipelineConfig& config, const EvalOptions& options) {
  strategy.validate();
  require_gold(dataset);
  OrderedTraceSink sink(options.traces_dir ? std::optional(traces_file(options, strategy)) : std::nullopt);
  EvalRun run;
  run.results.resize(dataset.size());
  detail::parallel_for(dataset.size(), options.parallelism, [&](std::size_t i) {
    run.results[i] = judge_isolated(dataset[i], [&](const PreferenceInstance& inst) {
      return run_strategy(backend, inst, strategy, config);
    });
    sink.submit(i, {run.results[i].to_json(strategy, "original")});
  });
  run.report = summarize_results(options, strategy, run.results);
  return run;
}

EvalRun evaluate_positional_consistency(Backend& backend, std::span<const PreferenceInstance> dataset,
                                        const JudgeStrategy& strategy, const PipelineConfig& config,
                                        const EvalOptions& options) {
  strategy.validate();
  require_gold(dataset);
  OrderedTraceSink sink(options.traces_dir ? std::optional(traces_file(options, strategy)) : std::nullopt);
  EvalRun run;
  run.results.resize(dataset.size());
  run.swapped_results.resize(dataset.size());
  const auto judge_fn = [&](const PreferenceInstance& inst) { return run_strategy(backend, inst, strategy, config); };
  detail::parallel_for(dataset.size(), options.parallelism, [&](std::size_t i) {
    run.results[i] = judge_isolated(dataset[i], judge_fn);
    run.swapped_results[i] = judge_isolated(swap_instance(dataset[i]), judge_fn);
    sink.submit(i, {run.results[i].to_json(strategy, "original"), run.swapped_results[i].to_json(strategy, "swapped")});
  });
  run.report = summarize_results(options, strategy, run.results);
  std::size_t swapped_correct = 0;
  std::size_t both_correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    swapped_correct += run.swapped_results[i].correct() ? 1 : 0;
    both_correct += (run.results[i].correct() && run.swapped_results[i].correct()) ? 1 : 0;
    run.report.n_errors += run.swapped_results[i].error.empty() ? 0 : 1;
  }
  run.report.accuracy_swapped = ratio(swapped_correct, dataset.size());
  run.report.positional_consistency = ratio(both_correct, dataset.size());
  return run;
}

std::vector<EvalRun> run_ablation(Backend& backend, std::span<const PreferenceInstance> dataset,
                                  std::span<const JudgeStrategy> strategies, const PipelineConfig& config,
                                  const EvalOptions& options) {
  for (const auto& s : strategies) s.validate();
  require_gold(dataset);
  const bool need_reference = std::any_of(strategies.begin(), strategies.end(), [](const auto& s) {
    return requires_reference(s.kind);
  });

  std::vector<std::unique_ptr<OrderedTraceSink>> sinks;
  std::vector<EvalRun> runs(strategies.size());
  for (const auto& s : strategies) {
    sinks.push_back(std::make_unique<OrderedTraceSink>(options.traces_dir ? std::optional(traces_file(options, s))
                                                                          : std::nullopt));
  }
  for (auto& run : runs) run.results.resize(dataset.size());

  detail::parallel_for(dataset.size(), options.parallelism, [&](std::size_t i) {
    const auto& inst = dataset[i];
    std::optional<InferenceTrace> reference;
    InstanceResult reference_result;
    if (need_reference) {
      reference_result = judge_isolated(inst, [&](const PreferenceInstance& x) { return judge(backend, x, config); });
      reference = reference_result.trace;
    }
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      const auto& strategy = strategies[s];
      InstanceResult r;
      if (strategy.kind == StrategyKind::kReflectRM || (requires_reference(strategy.kind) && !reference)) {
        r = reference_result;
      } else {
        r = judge_isolated(inst, [&](const PreferenceInstance& x) {
          return run_strategy(backend, x, strategy, config, reference ? &*reference : nullptr);
        });
      }
      runs[s].results[i] = std::move(r);
      sinks[s]->submit(i, {runs[s].results[i].to_json(strategy, "original")});
    }
  });

  for (std::size_t s = 0; s < strategies.size(); ++s) {
    runs[s].report = summarize_results(options, strategies[s], runs[s].results);
  }
  return runs;
}

std::string format_summary(std::span<const EvalReport> reports) {
  std::vector<std::string> datasets;
  std::vector<std::string> systems;
  std::map<std::pair<std::string, std::string>, const EvalReport*> cells;
  for (const auto& r : reports) {
    const auto system = r.strategy.name();
    if (std::find(datasets.begin(), datasets.end(), r.dataset_id) == datasets.end()) datasets.push_back(r.dataset_id);
    if (std::find(systems.begin(), systems.end(), system) == systems.end()) systems.push_back(system);
    cells[{system, r.dataset_id}] = &r;
  }
  const bool any_consistency =
      std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.positional_consistency.has_value(); });

  std::ostringstream os;
  char buf[64];
  os << "System";
  for (const auto& d : datasets) os << '\t' << d;
  os << "\tAVG\tDelta\n";
  double baseline = 0.0;
  for (std::size_t row = 0; row < systems.size(); ++row) {
    os << systems[row];
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& d : datasets) {
      const auto it = cells.find({systems[row], d});
      if (it == cells.end()) {
        os << "\t-";
        continue;
      }
      std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * it->second->accuracy);
      os << '\t' << buf;
      sum += it->second->accuracy;
      ++n;
    }
    const double avg = n == 0 ? 0.0 : 100.0 * sum / static_cast<double>(n);
    if (row == 0) baseline = avg;
    std::snprintf(buf, sizeof(buf), "%.1f", avg);
    os << '\t' << buf;
    if (row == 0) {
      os << "\t-";
    } else {
      std::snprintf(buf, sizeof(buf), "%+.1f", avg - baseline);
      os << '\t' << buf;
    }
    os << '\n';
  }
  if (any_consistency) {
    os << "\nPositional consistency\n";
    for (const auto& r : reports) {
      if (!r.positional_consistency) continue;
      std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *r.positional_consistency);
      os << r.strategy.name() << '\t' << r.dataset_id << '\t' << buf << '\n';
    }
  }
  return os.str();
}

}  // namespace reflectrm
