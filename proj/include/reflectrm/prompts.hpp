#pragma once

// Judge prompt templates for the two pairwise tasks: response preference and
// analysis preference (self-reflection over two critiques).
//
// Template version "v1": the literal "\n" sequences of the published
// templates are rendered as real newlines, and each template ends with the
// "/no_think" control token directly after "</Result>".

#include <optional>
#include <string>
#include <string_view>

namespace reflectrm {

enum class PromptKind { kResponsePreference, kAnalysisPreference };

inline constexpr std::string_view kTemplateVersion = "v1";
inline constexpr std::string_view kNoThinkToken = "/no_think";

std::string_view to_string(PromptKind kind);
PromptKind prompt_kind_from_string(std::string_view s);

/// Raw template text with its <context>/<response N>/<critique N> placeholders.
std::string_view prompt_template(PromptKind kind);

std::string render_response_preference(std::string_view query, std::string_view response_1,
                                       std::string_view response_2);

std::string render_analysis_preference(std::string_view query, std::string_view response_1,
                                       std::string_view response_2, std::string_view critique_1,
                                       std::string_view critique_2);

/// Identifies which template produced a rendered prompt, by its fixed preamble.
std::optional<PromptKind> detect_prompt_kind(std::string_view prompt);

/// Text between "[The Begin of <label>]\n" and "\n[The End of <label>]", e.g.
/// label "Critique 1". Returns nullopt when either marker is absent.
std::optional<std::string_view> extract_marked_slot(std::string_view prompt, std::string_view label);

}  // namespace reflectrm
