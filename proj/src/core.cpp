#include "reflectrm/core.hpp"

#include <algorithm>
#include <cctype>

namespace reflectrm {

namespace {

constexpr std::string_view kAnalysisOpen = "<Analysis>";
constexpr std::string_view kAnalysisClose = "</Analysis>";
constexpr std::string_view kResultOpen = "<Result>";
constexpr std::string_view kResultClose = "</Result>";

constexpr std::string_view kResponse1Wins = "Response 1 is better than Response 2";
constexpr std::string_view kResponse2Wins = "Response 2 is better than Response 1";
constexpr std::string_view kCritique1Wins = "Critique 1 is better than Critique 2";
constexpr std::string_view kCritique2Wins = "Critique 2 is better than Critique 1";

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string_view extract_block(std::string_view raw, std::string_view open, std::string_view close) {
  const auto n_open = count_occurrences(raw, open);
  const auto n_close = count_occurrences(raw, close);
  if (n_open == 0 || n_close == 0) {
    throw MalformedOutput("missing " + std::string(open) + " block");
  }
  if (n_open > 1 || n_close > 1) {
    throw MalformedOutput("duplicated " + std::string(open) + " block");
  }
  const auto begin = raw.find(open) + open.size();
  const auto end = raw.find(close);
  if (end < begin) {
    throw MalformedOutput(std::string(close) + " precedes " + std::string(open));
  }
  return raw.substr(begin, end - begin);
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool equals_folded(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
  });
}

// Maps the Result content onto slot 1 or 2 given the two canonical sentences.
Side match_verdict(std::string_view result, std::string_view first_wins, std::string_view second_wins) {
  const auto sentence = trim(result);
  if (equals_folded(sentence, first_wins)) return Side::kFirst;
  if (equals_folded(sentence, second_wins)) return Side::kSecond;
  throw MalformedOutput("unrecognized verdict: \"" + std::string(sentence.substr(0, 120)) + "\"");
}

}  // namespace

Side side_from_int(int v) {
  if (v == 1) return Side::kFirst;
  if (v == 2) return Side::kSecond;
  throw std::invalid_argument("preference label must be 1 or 2, got " + std::to_string(v));
}

void PreferenceInstance::validate() const {
  if (response_1.empty() || response_2.empty()) {
    throw std::invalid_argument("instance '" + id + "': responses must be non-empty");
  }
}

std::string_view to_string(Side s) { return s == Side::kFirst ? "1" : "2"; }

std::string_view to_string(CritiqueOrder o) {
  return o == CritiqueOrder::kCandidateFirst ? "candidate_first" : "anchor_first";
}

std::string_view to_string(Preferred p) { return p == Preferred::kCandidate ? "candidate" : "anchor"; }

CritiqueOrder critique_order_from_string(std::string_view s) {
  if (s == "candidate_first") return CritiqueOrder::kCandidateFirst;
  if (s == "anchor_first") return CritiqueOrder::kAnchorFirst;
  throw std::invalid_argument("unknown critique order: " + std::string(s));
}

Preferred preferred_from_string(std::string_view s) {
  if (s == "candidate") return Preferred::kCandidate;
  if (s == "anchor") return Preferred::kAnchor;
  throw std::invalid_argument("unknown reflection preference: " + std::string(s));
}

Side candidate_slot(CritiqueOrder order) {
  return order == CritiqueOrder::kCandidateFirst ? Side::kFirst : Side::kSecond;
}

std::string_view response_verdict_sentence(Side winner) {
  return winner == Side::kFirst ? kResponse1Wins : kResponse2Wins;
}

std::string_view critique_verdict_sentence(Side winner) {
  return winner == Side::kFirst ? kCritique1Wins : kCritique2Wins;
}

ParsedJudgment parse_judgment(std::string_view raw_text) {
  const auto analysis = extract_block(raw_text, kAnalysisOpen, kAnalysisClose);
  const auto result = extract_block(raw_text, kResultOpen, kResultClose);
  return {std::string(analysis), match_verdict(result, kResponse1Wins, kResponse2Wins)};
}

ParsedReflection parse_reflection(std::string_view raw_text, CritiqueOrder permutation) {
  const auto analysis = extract_block(raw_text, kAnalysisOpen, kAnalysisClose);
  const auto result = extract_block(raw_text, kResultOpen, kResultClose);
  const Side choice = match_verdict(result, kCritique1Wins, kCritique2Wins);
  const Preferred preferred = choice == candidate_slot(permutation) ? Preferred::kCandidate : Preferred::kAnchor;
  return {std::string(analysis), preferred, choice};
}

std::string render_judgment_output(std::string_view analysis, Side prediction) {
  std::string out;
  out.append(kAnalysisOpen).append(analysis).append(kAnalysisClose);
  out.append(kResultOpen).append(response_verdict_sentence(prediction)).append(kResultClose);
  return out;
}

std::string render_reflection_output(std::string_view meta_analysis, Side critique_choice) {
  std::string out;
  out.append(kAnalysisOpen).append(meta_analysis).append(kAnalysisClose);
  out.append(kResultOpen).append(critique_verdict_sentence(critique_choice)).append(kResultClose);
  return out;
}

}  // namespace reflectrm
