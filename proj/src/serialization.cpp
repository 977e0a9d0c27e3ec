#include "reflectrm/serialization.hpp"

namespace reflectrm {

using json = nlohmann::json;

json to_json(const PreferenceInstance& instance) {
  json j;
  j["id"] = instance.id;
  j["query"] = instance.query;
  j["response_1"] = instance.response_1;
  j["response_2"] = instance.response_2;
  j["gold_label"] = instance.gold_label ? json(to_int(*instance.gold_label)) : json(nullptr);
  return j;
}

PreferenceInstance instance_from_json(const json& j) {
  PreferenceInstance inst;
  const auto& id = j.at("id");
  inst.id = id.is_string() ? id.get<std::string>() : id.dump();
  if (j.contains("query")) {
    inst.query = j.at("query").get<std::string>();
  } else {
    inst.query = j.at("context").get<std::string>();
  }
  inst.response_1 = j.at("response_1").get<std::string>();
  inst.response_2 = j.at("response_2").get<std::string>();
  if (const auto g = j.find("gold_label"); g != j.end() && !g->is_null()) {
    inst.gold_label = side_from_int(g->get<int>());
  }
  inst.validate();
  return inst;
}

json to_json(const InferenceTrace& trace) {
  json rollouts = json::array();
  for (const auto& r : trace.rollouts) {
    rollouts.push_back({{"analysis", r.analysis},
                        {"prediction", to_int(r.prediction)},
                        {"confidence", r.confidence ? json(*r.confidence) : json(nullptr)}});
  }
  json verdicts = json::array();
  for (const auto& v : trace.verdicts) {
    json jv = {{"candidate_index", v.candidate_index},
               {"permutation", to_string(v.permutation)},
               {"preferred", to_string(v.preferred)}};
    if (v.fallback) jv["fallback"] = true;
    verdicts.push_back(std::move(jv));
  }
  json j;
  j["instance_id"] = trace.instance_id;
  j["rollouts"] = std::move(rollouts);
  j["anchor_index"] = trace.anchor_index;
  j["verdicts"] = std::move(verdicts);
  j["winner_group"] = trace.winner_group;
  j["anchor_included"] = trace.anchor_included;
  j["vote_counts"] = json::array({trace.vote_counts.first, trace.vote_counts.second});
  j["final_prediction"] = to_int(trace.final_prediction);
  return j;
}

InferenceTrace trace_from_json(const json& j) {
  InferenceTrace t;
  t.instance_id = j.at("instance_id").get<std::string>();
  for (const auto& r : j.at("rollouts")) {
    JudgmentOutput o;
    o.analysis = r.at("analysis").get<std::string>();
    o.prediction = side_from_int(r.at("prediction").get<int>());
    if (const auto c = r.find("confidence"); c != r.end() && !c->is_null()) o.confidence = c->get<double>();
    t.rollouts.push_back(std::move(o));
  }
  t.anchor_index = j.at("anchor_index").get<std::size_t>();
  for (const auto& v : j.at("verdicts")) {
    ReflectionVerdict rv;
    rv.candidate_index = v.at("candidate_index").get<std::size_t>();
    rv.permutation = critique_order_from_string(v.at("permutation").get<std::string>());
    rv.preferred = preferred_from_string(v.at("preferred").get<std::string>());
    rv.fallback = v.value("fallback", false);
    t.verdicts.push_back(std::move(rv));
  }
  t.winner_group = j.at("winner_group").get<std::vector<std::size_t>>();
  t.anchor_included = j.at("anchor_included").get<bool>();
  const auto& counts = j.at("vote_counts");
  t.vote_counts = {counts.at(0).get<int>(), counts.at(1).get<int>()};
  t.final_prediction = side_from_int(j.at("final_prediction").get<int>());
  return t;
}

std::vector<PreferenceInstance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input: " + path.string());
  std::vector<PreferenceInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(instance_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, bool append)
    : path_(path), out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw ConfigError("cannot open output: " + path.string());
}

void JsonlWriter::write(const json& record) {
  const std::string line = record.dump(-1, ' ', false, json::error_handler_t::replace) + '\n';
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw std::runtime_error("write failed: " + path_.string());
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open output: " + path.string());
  out << doc.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
}

}  // namespace reflectrm
