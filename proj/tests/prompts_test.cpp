#include <gtest/gtest.h>

#include <random>
#include <string>

#include "reflectrm/prompts.hpp"

namespace reflectrm {
namespace {

std::size_t count(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

TEST(ResponsePreference, ResponseMarkers) {
  const auto p = render_response_preference("Q", "A", "B");
  EXPECT_NE(p.find("[The Begin of Response 1]\nA\n[The End of Response 1]"), std::string::npos);
  EXPECT_NE(p.find("[The Begin of Response 2]\nB\n[The End of Response 2]"), std::string::npos);
  EXPECT_NE(p.find("[The Begin of Conversation Context & Query]\nQ\n[The End of Conversation Context & Query]"),
            std::string::npos);
}

TEST(ResponsePreference, EndsWithNoThink) {
  EXPECT_TRUE(render_response_preference("Q", "A", "B").ends_with("/no_think"));
  EXPECT_TRUE(render_response_preference("Q", "A", "B").ends_with("</Result>/no_think"));
}

TEST(ResponsePreference, IdenticalResponses) {
  const auto p = render_response_preference("Q", "A", "A");
  EXPECT_EQ(extract_marked_slot(p, "Response 1"), "A");
  EXPECT_EQ(extract_marked_slot(p, "Response 2"), "A");
}

TEST(ResponsePreference, NoPlaceholdersLeft) {
  const auto p = render_response_preference("Q", "A", "B");
  EXPECT_EQ(p.find("<context>"), std::string::npos);
  EXPECT_EQ(p.find("<response 1>"), std::string::npos);
  EXPECT_EQ(p.find("<response 2>"), std::string::npos);
}

TEST(AnalysisPreference, CritiqueMarkers) {
  const auto p = render_analysis_preference("Q", "A", "B", "c1", "c2");
  EXPECT_NE(p.find("[The Begin of Critique 1]\nc1"), std::string::npos);
  EXPECT_NE(p.find("[The Begin of Critique 2]\nc2"), std::string::npos);
  EXPECT_TRUE(p.ends_with("/no_think"));
}

TEST(AnalysisPreference, ResponsesLiveInTheContextSection) {
  const auto p = render_analysis_preference("Q", "A", "B", "c1", "c2");
  const auto context = p.find("### Context");
  const auto critiques = p.find("[The Begin of Critique 1]");
  const auto r1 = p.find("[The Begin of Response 1]\nA\n[The End of Response 1]");
  const auto r2 = p.find("[The Begin of Response 2]\nB\n[The End of Response 2]");
  ASSERT_NE(context, std::string::npos);
  ASSERT_NE(r1, std::string::npos);
  ASSERT_NE(r2, std::string::npos);
  EXPECT_LT(context, r1);
  EXPECT_LT(r1, critiques);
  EXPECT_LT(r2, critiques);
  EXPECT_EQ(count(p, "[The Begin of Response 1]"), 1U);
}

TEST(AnalysisPreference, IdenticalCritiques) {
  const auto p = render_analysis_preference("Q", "A", "B", "c", "c");
  EXPECT_EQ(extract_marked_slot(p, "Critique 1"), "c");
  EXPECT_EQ(extract_marked_slot(p, "Critique 2"), "c");
}

TEST(Prompts, InsertedTextIsNotRescanned) {
  const auto p = render_response_preference("<response 2>", "<context>", "B");
  EXPECT_EQ(extract_marked_slot(p, "Conversation Context & Query"), "<response 2>");
  EXPECT_EQ(extract_marked_slot(p, "Response 1"), "<context>");
  EXPECT_EQ(extract_marked_slot(p, "Response 2"), "B");
}

TEST(Prompts, SlotInjectivityOnRandomText) {
  std::mt19937_64 rng(11);
  static constexpr std::string_view alphabet = "ab \n[]<>#&\t12";
  std::uniform_int_distribution<std::size_t> len(1, 60);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  const auto text = [&] {
    std::string s;
    for (std::size_t i = len(rng); i > 0; --i) s.push_back(alphabet[pick(rng)]);
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    const auto q = text(), a = text(), b = text(), c1 = text(), c2 = text();
    const auto p1 = render_response_preference(q, a, b);
    EXPECT_EQ(extract_marked_slot(p1, "Response 1"), a);
    EXPECT_EQ(extract_marked_slot(p1, "Response 2"), b);
    const auto p2 = render_analysis_preference(q, a, b, c1, c2);
    EXPECT_EQ(extract_marked_slot(p2, "Critique 1"), c1);
    EXPECT_EQ(extract_marked_slot(p2, "Critique 2"), c2);
    EXPECT_EQ(render_analysis_preference(q, a, b, c1, c2), p2);
  }
}

TEST(Prompts, KindDetection) {
  EXPECT_EQ(detect_prompt_kind(render_response_preference("Q", "A", "B")), PromptKind::kResponsePreference);
  EXPECT_EQ(detect_prompt_kind(render_analysis_preference("Q", "A", "B", "c", "d")),
            PromptKind::kAnalysisPreference);
  EXPECT_EQ(detect_prompt_kind("hello"), std::nullopt);
  EXPECT_EQ(prompt_kind_from_string(to_string(PromptKind::kAnalysisPreference)), PromptKind::kAnalysisPreference);
}

TEST(Prompts, TemplatesCarryOutputProtocol) {
  for (auto kind : {PromptKind::kResponsePreference, PromptKind::kAnalysisPreference}) {
    const auto t = prompt_template(kind);
    EXPECT_NE(t.find("<Analysis>"), std::string_view::npos);
    EXPECT_NE(t.find("<Result>"), std::string_view::npos);
    EXPECT_TRUE(t.ends_with(kNoThinkToken));
  }
  EXPECT_NE(prompt_template(PromptKind::kAnalysisPreference).find("Critique 1 is better than Critique 2"),
            std::string_view::npos);
  EXPECT_NE(prompt_template(PromptKind::kResponsePreference).find("Response 1 is better than Response 2"),
            std::string_view::npos);
}

}  // namespace
}  // namespace reflectrm
