#include "reflectrm/prompts.hpp"

#include <array>
#include <stdexcept>
#include <utility>

namespace reflectrm {

namespace {

constexpr std::string_view kResponsePreferenceTemplate =
    R"TPL(You are a discerning and impartial Judge. In the context of the conversation provided below (with the user's query being the last round), your role is to evaluate the quality of the two 'Responses' and determine which is better.
Your decision should be based on which response better aligns with the user's instructions and more effectively addresses their query. To render a fair judgment, you need to think step-by-step to conduct a deep analysis, clearly articulating the reasoning for your decision.
Your judgment must be free of any positional or length biases.

### Context
[The Begin of Conversation Context & Query]
<context>
[The End of Conversation Context & Query]

### Responses for Judgment
These are the two responses you must analyze and compare.

[The Begin of Response 1]
<response 1>
[The End of Response 1]
[The Begin of Response 2]
<response 2>
[The End of Response 2]

---

### Your Structured Judgment
Follow these steps precisely and use the specified tags for your output.
**1. Provide Detailed Analysis:** Think step-by-step to conduct a detailed analysis of the Responses. Place your analysis within `<Analysis>` tags.
**2. Render Final Verdict:** Conclude with your final verdict based on your analysis. State which response is better in the format "Response 1 is better than Response 2" or "Response 2 is better than Response 1". Place this final choice within `<Result>` tags.
Your entire output must follow the format below.
<Analysis>
Your detailed step-by-step analysis of the two responses.
</Analysis>
<Result>
Based on your Analysis, only print the following: "Response 1 is better than Response 2" OR "Response 2 is better than Response 1".
</Result>/no_think)TPL";

constexpr std::string_view kAnalysisPreferenceTemplate =
    R"TPL(You are a discerning and impartial Judge. Your role is to evaluate the quality of the two 'Critiques' presented below. These critiques are themselves analyses of two original 'Responses' generated for a conversation (with the user's query being the last round).
Your decision should be based on which critique provides a more insightful, accurate, fair, and well-reasoned analysis. To render a fair judgment, you need to think step-by-step to conduct a deep analysis, clearly articulating the reasoning for your decision.
Your judgment must be free of any positional or length biases.

### Context
[The Begin of Conversation Context & Query]
<context>
[The End of Conversation Context & Query]
[The Begin of Response 1]
<response 1>
[The End of Response 1]
[The Begin of Response 2]
<response 2>
[The End of Response 2]

### Critiques for Judgment
These are the two critiques you must analyze and compare. Each one analyzes 'Response 1' and 'Response 2' shown in 'Context'.

[The Begin of Critique 1]
<critique 1>
[The End of Critique 1]
[The Begin of Critique 2]
<critique 2>
[The End of Critique 2]

---

### Your Structured Judgment
Follow these steps precisely and use the specified tags for your output.
**1. Provide Detailed Analysis:** Think step-by-step to conduct a detailed analysis of the Critiques. Place your analysis within `<Analysis>` tags.
**2. Render Final Verdict:** Conclude with your final verdict based on your analysis. State which critique is better in the format "Critique 1 is better than Critique 2" or "Critique 2 is better than Critique 1". Place this final choice within `<Result>` tags.
Your entire output must follow the format below.
<Analysis>
Your detailed step-by-step analysis of the two critiques.
</Analysis>
<Result>
Based on your Analysis, only print the following: "Critique 1 is better than Critique 2" OR "Critique 2 is better than Critique 1".
</Result>/no_think)TPL";

constexpr std::string_view kResponsePreamble =
    "You are a discerning and impartial Judge. In the context of the conversation provided below";
constexpr std::string_view kAnalysisPreamble =
    "You are a discerning and impartial Judge. Your role is to evaluate the quality of the two 'Critiques'";

using Slot = std::pair<std::string_view, std::string_view>;

// Substitutes each placeholder once, walking the template left to right so
// inserted text is never rescanned for placeholders.
template <std::size_t N>
std::string fill(std::string_view tpl, const std::array<Slot, N>& slots) {
  std::size_t reserve = tpl.size();
  for (const auto& [_, value] : slots) reserve += value.size();
  std::string out;
  out.reserve(reserve);
  std::size_t cursor = 0;
  for (const auto& [placeholder, value] : slots) {
    const auto pos = tpl.find(placeholder, cursor);
    if (pos == std::string_view::npos) {
      throw std::logic_error("template placeholder missing: " + std::string(placeholder));
    }
    out.append(tpl.substr(cursor, pos - cursor));
    out.append(value);
    cursor = pos + placeholder.size();
  }
  out.append(tpl.substr(cursor));
  return out;
}

}  // namespace

std::string_view to_string(PromptKind kind) {
  return kind == PromptKind::kResponsePreference ? "response_preference" : "analysis_preference";
}

PromptKind prompt_kind_from_string(std::string_view s) {
  if (s == "response_preference") return PromptKind::kResponsePreference;
  if (s == "analysis_preference") return PromptKind::kAnalysisPreference;
  throw std::invalid_argument("unknown prompt kind: " + std::string(s));
}

std::string_view prompt_template(PromptKind kind) {
  return kind == PromptKind::kResponsePreference ? kResponsePreferenceTemplate : kAnalysisPreferenceTemplate;
}

std::string render_response_preference(std::string_view query, std::string_view response_1,
                                       std::string_view response_2) {
  return fill(kResponsePreferenceTemplate, std::array<Slot, 3>{{
                                               {"<context>", query},
                                               {"<response 1>", response_1},
                                               {"<response 2>", response_2},
                                           }});
}

std::string render_analysis_preference(std::string_view query, std::string_view response_1,
                                       std::string_view response_2, std::string_view critique_1,
                                       std::string_view critique_2) {
  return fill(kAnalysisPreferenceTemplate, std::array<Slot, 5>{{
                                               {"<context>", query},
                                               {"<response 1>", response_1},
                                               {"<response 2>", response_2},
                                               {"<critique 1>", critique_1},
                                               {"<critique 2>", critique_2},
                                           }});
}

std::optional<PromptKind> detect_prompt_kind(std::string_view prompt) {
  if (prompt.starts_with(kResponsePreamble)) return PromptKind::kResponsePreference;
  if (prompt.starts_with(kAnalysisPreamble)) return PromptKind::kAnalysisPreference;
  return std::nullopt;
}

std::optional<std::string_view> extract_marked_slot(std::string_view prompt, std::string_view label) {
  const std::string begin = "[The Begin of " + std::string(label) + "]\n";
  const std::string end = "\n[The End of " + std::string(label) + "]";
  const auto b = prompt.find(begin);
  if (b == std::string_view::npos) return std::nullopt;
  const auto start = b + begin.size();
  // The end marker is searched from the back so slot text may itself contain it.
  const auto e = prompt.rfind(end);
  if (e == std::string_view::npos || e < start) return std::nullopt;
  return prompt.substr(start, e - start);
}

}  // namespace reflectrm
