#pragma once

// Test backends: a stochastic judge with known per-rollout accuracy, a judge
// that always answers "1", and a call-counting wrapper.

#include <atomic>
#include <cstdint>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "reflectrm/backend.hpp"
#include "reflectrm/core.hpp"
#include "reflectrm/prompts.hpp"

namespace reflectrm::testing {

inline constexpr std::string_view kGoodResponse = "good response";
inline constexpr std::string_view kBadResponse = "bad response";
inline constexpr std::string_view kCorrectTag = "[correct]";
inline constexpr std::string_view kWrongTag = "[wrong]";

// Gold label is encoded by which slot holds kGoodResponse, so swapping the
// responses keeps the instance self-describing.
inline PreferenceInstance simulated_instance(std::string id, Side gold) {
  PreferenceInstance inst;
  inst.id = std::move(id);
  inst.query = "question " + inst.id;
  const std::string good = std::string(kGoodResponse) + " to " + inst.id;
  const std::string bad = std::string(kBadResponse) + " to " + inst.id;
  inst.response_1 = gold == Side::kFirst ? good : bad;
  inst.response_2 = gold == Side::kFirst ? bad : good;
  inst.gold_label = gold;
  return inst;
}

// Each rollout is correct with probability p, independently of its token
// log-probabilities (so the anchor is a uniform draw). A reflection whose two
// critiques differ in correctness prefers the correct one with probability q;
// otherwise it picks either slot with probability 1/2.
class SimulatedJudge : public Backend {
 public:
  SimulatedJudge(double p, double q, std::uint64_t seed, std::size_t n_tokens = 16)
      : p_(p), q_(q), n_tokens_(n_tokens), rng_(seed) {}

  Completion generate(const std::string& prompt, const SamplingParams&) override {
    std::lock_guard lock(mu_);
    ++calls_;
    Completion c;
    const auto kind = detect_prompt_kind(prompt);
    if (kind == PromptKind::kAnalysisPreference) {
      const bool first_correct = slot_correct(prompt, "Critique 1");
      const bool second_correct = slot_correct(prompt, "Critique 2");
      Side choice;
      if (first_correct != second_correct) {
        const bool pick_correct = unit_(rng_) < q_;
        choice = (first_correct == pick_correct) ? Side::kFirst : Side::kSecond;
      } else {
        choice = unit_(rng_) < 0.5 ? Side::kFirst : Side::kSecond;
      }
      c.text = render_reflection_output("meta", choice);
    } else {
      const auto r1 = extract_marked_slot(prompt, "Response 1").value_or("");
      const Side gold = r1.starts_with(kGoodResponse) ? Side::kFirst : Side::kSecond;
      const bool correct = unit_(rng_) < p_;
      const std::string analysis = std::string(correct ? kCorrectTag : kWrongTag) + " #" + std::to_string(calls_);
      c.text = render_judgment_output(analysis, correct ? gold : opposite(gold));
    }
    for (std::size_t t = 0; t < n_tokens_; ++t) c.token_scores.push_back({"", -3.0 * unit_(rng_)});
    return c;
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  static bool slot_correct(const std::string& prompt, std::string_view label) {
    return extract_marked_slot(prompt, label).value_or("").starts_with(kCorrectTag);
  }

  double p_;
  double q_;
  std::size_t n_tokens_;
  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::size_t calls_ = 0;
};

// Always prefers slot 1, for responses and critiques alike.
class ConstantOneJudge : public Backend {
 public:
  Completion generate(const std::string& prompt, const SamplingParams&) override {
    Completion c;
    c.text = detect_prompt_kind(prompt) == PromptKind::kAnalysisPreference
                 ? render_reflection_output("first", Side::kFirst)
                 : render_judgment_output("first", Side::kFirst);
    c.token_scores = {{"", -0.5}, {"", -0.25}};
    return c;
  }
};

class CountingBackend : public Backend {
 public:
  explicit CountingBackend(Backend& inner) : inner_(inner) {}

  Completion generate(const std::string& prompt, const SamplingParams& params) override {
    count(prompt);
    return inner_.generate(prompt, params);
  }

  std::vector<Completion> generate_batch(std::span<const std::string> prompts,
                                         const SamplingParams& params) override {
    for (const auto& p : prompts) count(p);
    return inner_.generate_batch(prompts, params);
  }

  std::size_t rollouts() const { return rollouts_; }
  std::size_t reflections() const { return reflections_; }
  std::size_t total() const { return rollouts_ + reflections_; }
  void reset() {
    rollouts_ = 0;
    reflections_ = 0;
  }

 private:
  void count(const std::string& prompt) {
    (detect_prompt_kind(prompt) == PromptKind::kAnalysisPreference ? reflections_ : rollouts_) += 1;
  }

  Backend& inner_;
  std::atomic<std::size_t> rollouts_{0};
  std::atomic<std::size_t> reflections_{0};
};

}  // namespace reflectrm::testing
