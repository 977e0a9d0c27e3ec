#include "reflectrm/databuilder.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

#include "parallel.hpp"
#include "reflectrm/prompts.hpp"
#include "reflectrm/rng.hpp"

namespace reflectrm {

using json = nlohmann::json;

namespace {

// Uniform subset of size k (without replacement), indices in ascending order.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <class T>
const T& pick_uniform(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, v.size() - 1);
  return v[dist(rng)];
}

TrainingRecord base_record(const RolloutProfile& p, RecordKind kind) {
  TrainingRecord r;
  r.kind = kind;
  r.instance_id = p.instance.id;
  r.query = p.instance.query;
  r.response_1 = p.instance.response_1;
  r.response_2 = p.instance.response_2;
  r.provenance.gold_label = *p.instance.gold_label;
  r.provenance.classification = p.classification;
  return r;
}

}  // namespace

std::string_view to_string(ProfileClass c) {
  switch (c) {
    case ProfileClass::kAllCorrect: return "all_correct";
    case ProfileClass::kMixed: return "mixed";
    case ProfileClass::kAllWrong: return "all_wrong";
  }
  return "mixed";
}

std::string_view to_string(RecordKind k) { return k == RecordKind::kPref ? "pref" : "refl"; }

ProfileClass classify(std::span<const RolloutOutcome> outcomes) {
  if (outcomes.empty()) throw std::invalid_argument("classify: no outcomes");
  const auto n_correct = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.correct; });
  if (n_correct == static_cast<std::ptrdiff_t>(outcomes.size())) return ProfileClass::kAllCorrect;
  if (n_correct == 0) return ProfileClass::kAllWrong;
  return ProfileClass::kMixed;
}

RolloutProfile profile_instance(Backend& backend, const PreferenceInstance& instance, const PipelineConfig& config) {
  if (!instance.gold_label) {
    throw std::invalid_argument("profile_instance: instance '" + instance.id + "' has no gold label");
  }
  RolloutProfile profile;
  profile.instance = instance;
  for (auto& out : stage1_rollouts(backend, instance, config)) {
    const bool correct = out.prediction == *instance.gold_label;
    profile.outcomes.push_back({std::move(out), correct});
  }
  profile.classification = classify(profile.outcomes);
  return profile;
}

std::vector<RolloutProfile> profile_corpus(Backend& backend, std::span<const PreferenceInstance> corpus,
                                           const PipelineConfig& config, std::size_t parallelism,
                                           std::vector<ProfileFailure>* failures) {
  std::vector<std::optional<RolloutProfile>> slots(corpus.size());
  std::vector<ProfileFailure> errors(corpus.size());
  detail::parallel_for(corpus.size(), parallelism, [&](std::size_t i) {
    if (failures == nullptr) {
      slots[i] = profile_instance(backend, corpus[i], config);
      return;
    }
    try {
      slots[i] = profile_instance(backend, corpus[i], config);
    } catch (const BackendUnavailable& e) {
      errors[i] = {corpus[i].id, e.what(), true};
    } catch (const LogprobsUnsupported& e) {
      errors[i] = {corpus[i].id, e.what(), true};
    } catch (const std::exception& e) {
      errors[i] = {corpus[i].id, e.what(), false};
    }
  });
  std::vector<RolloutProfile> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else if (failures != nullptr) {
      failures->push_back(std::move(errors[i]));
    }
  }
  return out;
}

json to_json(const TrainingRecord& r) {
  json j;
  j["kind"] = to_string(r.kind);
  j["instance_id"] = r.instance_id;
  j["query"] = r.query;
  j["response_1"] = r.response_1;
  j["response_2"] = r.response_2;
  if (r.critiques) {
    j["critiques"] = json::array({r.critiques->first, r.critiques->second});
    j["prompt"] = render_analysis_preference(r.query, r.response_1, r.response_2, r.critiques->first,
                                             r.critiques->second);
  } else {
    j["prompt"] = render_response_preference(r.query, r.response_1, r.response_2);
  }
  j["label"] = to_int(r.label);
  j["template_version"] = kTemplateVersion;

  json prov;
  prov["gold_label"] = to_int(r.provenance.gold_label);
  prov["classification"] = to_string(r.provenance.classification);
  if (r.provenance.source_rollouts) prov["source_rollouts"] = *r.provenance.source_rollouts;
  if (r.provenance.source_predictions) {
    prov["source_predictions"] =
        json::array({to_int((*r.provenance.source_predictions)[0]), to_int((*r.provenance.source_predictions)[1])});
  }
  j["provenance"] = std::move(prov);
  return j;
}

std::vector<TrainingRecord> build_pref(std::span<const RolloutProfile> profiles, std::size_t sample_size,
                                       std::uint64_t seed) {
  std::vector<const RolloutProfile*> eligible;
  for (const auto& p : profiles) {
    if (p.classification != ProfileClass::kAllCorrect) eligible.push_back(&p);
  }
  if (eligible.size() < sample_size) {
    throw InsufficientPool("requested " + std::to_string(sample_size) + " pref instances but only " +
                           std::to_string(eligible.size()) + " are not all-correct");
  }
  auto rng = keyed_engine(seed, "pref", RngStream::kPrefSample);
  std::vector<TrainingRecord> out;
  out.reserve(sample_size);
  for (auto i : sample_indices(eligible.size(), sample_size, rng)) {
    auto r = base_record(*eligible[i], RecordKind::kPref);
    r.label = r.provenance.gold_label;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrainingRecord> build_refl(std::span<const RolloutProfile> profiles, std::uint64_t seed) {
  std::vector<TrainingRecord> out;
  for (const auto& p : profiles) {
    if (p.classification != ProfileClass::kMixed) continue;
    std::vector<std::size_t> correct, incorrect;
    for (std::size_t i = 0; i < p.outcomes.size(); ++i) {
      (p.outcomes[i].correct ? correct : incorrect).push_back(i);
    }
    auto rng = keyed_engine(seed, p.instance.id, RngStream::kReflPairing);
    const auto cor = pick_uniform(correct, rng);
    const auto inc = pick_uniform(incorrect, rng);
    const bool correct_first = (rng() & 1U) == 0;

    auto r = base_record(p, RecordKind::kRefl);
    const std::size_t first = correct_first ? cor : inc;
    const std::size_t second = correct_first ? inc : cor;
    r.critiques = std::make_pair(p.outcomes[first].output.analysis, p.outcomes[second].output.analysis);
    r.label = correct_first ? Side::kFirst : Side::kSecond;
    r.provenance.source_rollouts = std::array<std::size_t, 2>{first, second};
    r.provenance.source_predictions =
        std::array<Side, 2>{p.outcomes[first].output.prediction, p.outcomes[second].output.prediction};
    out.push_back(std::move(r));
  }
  return out;
}

MixRatio MixRatio::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("ratio must look like A:B");
  MixRatio r{};
  const auto parse_part = [](std::string_view part, unsigned& value) {
    const auto res = std::from_chars(part.data(), part.data() + part.size(), value);
    if (res.ec != std::errc{} || res.ptr != part.data() + part.size()) {
      throw std::invalid_argument("ratio part is not a non-negative integer: " + std::string(part));
    }
  };
  parse_part(text.substr(0, colon), r.pref);
  parse_part(text.substr(colon + 1), r.refl);
  if (r.pref == 0 && r.refl == 0) throw std::invalid_argument("ratio 0:0 selects nothing");
  return r;
}

std::string MixRatio::str() const { return std::to_string(pref) + ":" + std::to_string(refl); }

std::vector<TrainingRecord> mix_datasets(std::span<const TrainingRecord> pref, std::span<const TrainingRecord> refl,
                                         MixRatio ratio, std::uint64_t seed) {
  if (ratio.pref == 0 && ratio.refl == 0) throw std::invalid_argument("ratio 0:0 selects nothing");
  if (ratio.pref > 0 && pref.empty()) throw EmptySide("ratio " + ratio.str() + " needs pref records, none given");
  if (ratio.refl > 0 && refl.empty()) throw EmptySide("ratio " + ratio.str() + " needs refl records, none given");

  std::size_t n_pref = 0;
  std::size_t n_refl = 0;
  if (ratio.refl == 0) {
    n_pref = pref.size();
  } else if (ratio.pref == 0) {
    n_refl = refl.size();
  } else if (pref.size() * ratio.refl >= refl.size() * ratio.pref) {
    n_refl = refl.size();
    n_pref = refl.size() * ratio.pref / ratio.refl;
  } else {
    n_pref = pref.size();
    n_refl = pref.size() * ratio.refl / ratio.pref;
  }
  if ((ratio.pref > 0 && n_pref == 0) || (ratio.refl > 0 && n_refl == 0)) {
    throw EmptySide("ratio " + ratio.str() + " truncates one side to zero records");
  }

  std::vector<TrainingRecord> out;
  out.reserve(n_pref + n_refl);
  auto pref_rng = keyed_engine(seed, "pref", RngStream::kDownsample);
  for (auto i : sample_indices(pref.size(), n_pref, pref_rng)) out.push_back(pref[i]);
  auto refl_rng = keyed_engine(seed, "refl", RngStream::kDownsample);
  for (auto i : sample_indices(refl.size(), n_refl, refl_rng)) out.push_back(refl[i]);

  auto shuffle_rng = keyed_engine(seed, "mix", RngStream::kMixShuffle);
  std::shuffle(out.begin(), out.end(), shuffle_rng);
  return out;
}

double DatasetStats::achieved_ratio() const {
  return n_refl == 0 ? 0.0 : static_cast<double>(n_pref) / static_cast<double>(n_refl);
}

json DatasetStats::to_json() const {
  return {{"instances", n_instances},
          {"classification", {{"all_correct", n_all_correct}, {"mixed", n_mixed}, {"all_wrong", n_all_wrong}}},
          {"pref", n_pref},
          {"refl", n_refl},
          {"sum", total()},
          {"requested_ratio", requested_ratio.str()},
          {"achieved_ratio", achieved_ratio()}};
}

std::string DatasetStats::table(std::string_view backbone) const {
  std::ostringstream os;
  os << "Backbone\tPref.\tRefl.\tSum\n" << backbone << '\t' << n_pref << '\t' << n_refl << '\t' << total() << '\n';
  return os.str();
}

DatasetStats summarize(std::span<const RolloutProfile> profiles, std::span<const TrainingRecord> mixed,
                       MixRatio ratio) {
  DatasetStats s;
  s.n_instances = profiles.size();
  s.requested_ratio = ratio;
  for (const auto& p : profiles) {
    switch (p.classification) {
      case ProfileClass::kAllCorrect: ++s.n_all_correct; break;
      case ProfileClass::kMixed: ++s.n_mixed; break;
      case ProfileClass::kAllWrong: ++s.n_all_wrong; break;
    }
  }
  for (const auto& r : mixed) (r.kind == RecordKind::kPref ? s.n_pref : s.n_refl) += 1;
  return s;
}

}  // namespace reflectrm
