#include "reflectrm/scripted_backend.hpp"

#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "reflectrm/prompts.hpp"
#include "reflectrm/rng.hpp"

namespace reflectrm {

using json = nlohmann::json;

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries) : entries_(std::move(entries)) { reset(); }

std::vector<ScriptEntry> ScriptedBackend::load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open stub script: " + path.string());
  std::vector<ScriptEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      ScriptEntry e;
      e.key = j.at("key").get<std::string>();
      e.text = j.value("text", std::string{});
      e.logprobs = j.value("logprobs", std::vector<double>{});
      e.finish_reason = finish_reason_from_string(j.value("finish_reason", std::string{"stop"}));
      entries.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return entries;
}

std::string ScriptedBackend::hash_key(std::string_view prompt) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "hash:%016llx", static_cast<unsigned long long>(fnv1a64(prompt)));
  return buf;
}

void ScriptedBackend::reset() {
  std::lock_guard lock(mu_);
  queues_.clear();
  hashed_.clear();
  hash_cursor_.clear();
  calls_ = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& key = entries_[i].key;
    if (key.starts_with("hash:")) {
      hashed_[key].push_back(i);
    } else {
      queues_[key].push_back(i);
    }
  }
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t ScriptedBackend::remaining(std::string_view kind_key) const {
  std::lock_guard lock(mu_);
  const auto it = queues_.find(kind_key);
  return it == queues_.end() ? 0 : it->second.size();
}

Completion ScriptedBackend::serve_locked(const std::string& prompt, const SamplingParams& params) {
  ++calls_;
  const ScriptEntry* entry = nullptr;
  if (const auto it = hashed_.find(hash_key(prompt)); it != hashed_.end()) {
    auto& cursor = hash_cursor_[it->first];
    entry = &entries_[it->second[cursor % it->second.size()]];
    ++cursor;
  } else {
    const auto kind = detect_prompt_kind(prompt);
    const std::string key = kind ? std::string(to_string(*kind)) : std::string("default");
    auto q = queues_.find(key);
    if (q == queues_.end() || q->second.empty()) {
      throw BackendUnavailable("stub script exhausted for key '" + key + "'");
    }
    entry = &entries_[q->second.front()];
    q->second.pop_front();
  }

  if (entry->finish_reason == FinishReason::kError) {
    throw BackendUnavailable("scripted failure (" + entry->key + ")");
  }
  Completion c;
  c.text = entry->text;
  c.finish_reason = entry->finish_reason;
  if (params.want_logprobs) {
    if (entry->logprobs.empty()) {
      throw LogprobsUnsupported("scripted completion carries no logprobs (" + entry->key + ")");
    }
    c.token_scores.reserve(entry->logprobs.size());
    for (double lp : entry->logprobs) c.token_scores.push_back({std::string{}, lp});
  }
  return c;
}

Completion ScriptedBackend::generate(const std::string& prompt, const SamplingParams& params) {
  std::lock_guard lock(mu_);
  return serve_locked(prompt, params);
}

std::vector<Completion> ScriptedBackend::generate_batch(std::span<const std::string> prompts,
                                                        const SamplingParams& params) {
  if (prompts.empty()) throw std::invalid_argument("generate_batch: empty prompt list");
  // One lock for the whole batch: entries are assigned in input order even
  // when other threads are issuing requests.
  std::lock_guard lock(mu_);
  std::vector<Completion> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) {
    try {
      out.push_back(serve_locked(p, params));
    } catch (const Error&) {
      out.push_back(failure_from_current_exception());
    }
  }
  return out;
}

}  // namespace reflectrm
