#include <gtest/gtest.h>

#include <random>
#include <string>

#include "reflectrm/core.hpp"

namespace reflectrm {
namespace {

TEST(ParseJudgment, CanonicalFirstSentence) {
  const auto r = parse_judgment("<Analysis>R1 is concise.</Analysis><Result>Response 1 is better than Response 2</Result>");
  EXPECT_EQ(r.analysis, "R1 is concise.");
  EXPECT_EQ(r.prediction, Side::kFirst);
}

TEST(ParseJudgment, CaseAndWhitespaceTolerant) {
  const auto r = parse_judgment("<Analysis>x</Analysis><Result>  response 2 is better than response 1 </Result>");
  EXPECT_EQ(r.analysis, "x");
  EXPECT_EQ(r.prediction, Side::kSecond);
}

TEST(ParseJudgment, MissingResultIsMalformed) {
  EXPECT_THROW(parse_judgment("<Analysis>x</Analysis>"), MalformedOutput);
}

TEST(ParseJudgment, MissingAnalysisIsMalformed) {
  EXPECT_THROW(parse_judgment("<Result>Response 1 is better than Response 2</Result>"), MalformedOutput);
}

TEST(ParseJudgment, DuplicatedTagsAreMalformed) {
  EXPECT_THROW(parse_judgment("<Analysis>a</Analysis><Analysis>b</Analysis>"
                              "<Result>Response 1 is better than Response 2</Result>"),
               MalformedOutput);
  EXPECT_THROW(parse_judgment("<Analysis>a</Analysis><Result>Response 1 is better than Response 2</Result>"
                              "<Result>Response 2 is better than Response 1</Result>"),
               MalformedOutput);
}

TEST(ParseJudgment, NonCanonicalVerdictIsMalformed) {
  EXPECT_THROW(parse_judgment("<Analysis>a</Analysis><Result>Response 1</Result>"), MalformedOutput);
  EXPECT_THROW(parse_judgment("<Analysis>a</Analysis><Result>I think Response 1 is better than Response 2</Result>"),
               MalformedOutput);
  EXPECT_THROW(parse_judgment("<Analysis>a</Analysis><Result>Critique 1 is better than Critique 2</Result>"),
               MalformedOutput);
}

TEST(ParseJudgment, ReversedTagsAreMalformed) {
  EXPECT_THROW(parse_judgment("</Analysis>a<Analysis><Result>Response 1 is better than Response 2</Result>"),
               MalformedOutput);
}

TEST(ParseJudgment, KeepsAnalysisVerbatimAndIgnoresEpilogue) {
  const std::string analysis = "\n  Both quote \"Response 2 is better than Response 1\".\n";
  const auto r = parse_judgment("prefix <Analysis>" + analysis +
                                "</Analysis>\n<Result>\tResponse 1 is better than Response 2\n</Result> thanks!");
  EXPECT_EQ(r.analysis, analysis);
  EXPECT_EQ(r.prediction, Side::kFirst);
}

TEST(ParseReflection, PermutationMapping) {
  const std::string one = "<Analysis>m</Analysis><Result>Critique 1 is better than Critique 2</Result>";
  const std::string two = "<Analysis>m</Analysis><Result>Critique 2 is better than Critique 1</Result>";
  EXPECT_EQ(parse_reflection(one, CritiqueOrder::kCandidateFirst).preferred, Preferred::kCandidate);
  EXPECT_EQ(parse_reflection(one, CritiqueOrder::kAnchorFirst).preferred, Preferred::kAnchor);
  EXPECT_EQ(parse_reflection(two, CritiqueOrder::kCandidateFirst).preferred, Preferred::kAnchor);
  EXPECT_EQ(parse_reflection(two, CritiqueOrder::kAnchorFirst).preferred, Preferred::kCandidate);
  EXPECT_EQ(parse_reflection(two, CritiqueOrder::kAnchorFirst).raw_choice, Side::kSecond);
  EXPECT_EQ(parse_reflection(one, CritiqueOrder::kAnchorFirst).meta_analysis, "m");
}

TEST(ParseReflection, RejectsResponseVerdicts) {
  EXPECT_THROW(parse_reflection("<Analysis>m</Analysis><Result>Response 1 is better than Response 2</Result>",
                                CritiqueOrder::kCandidateFirst),
               MalformedOutput);
}

std::string random_text(std::mt19937_64& rng) {
  static constexpr std::string_view alphabet = "abc XYZ\n\t.,;'\"<>/1234567890";
  std::uniform_int_distribution<std::size_t> len(0, 40);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t i = len(rng); i > 0; --i) s.push_back(alphabet[pick(rng)]);
  return s;
}

TEST(ParseProperties, RenderParseRoundTrip) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    std::string analysis = random_text(rng);
    // Text containing tag markup is not renderable without escaping.
    if (analysis.find('<') != std::string::npos) continue;
    const Side side = (rng() & 1) ? Side::kFirst : Side::kSecond;
    const auto r = parse_judgment(render_judgment_output(analysis, side));
    EXPECT_EQ(r.analysis, analysis);
    EXPECT_EQ(r.prediction, side);
    const auto m = parse_reflection(render_reflection_output(analysis, side), CritiqueOrder::kCandidateFirst);
    EXPECT_EQ(m.meta_analysis, analysis);
    EXPECT_EQ(m.raw_choice, side);
  }
}

TEST(ParseProperties, PermutationAntisymmetry) {
  for (Side s : {Side::kFirst, Side::kSecond}) {
    for (std::string meta : {"", "a", " spaced \n meta "}) {
      const auto raw = render_reflection_output(meta, s);
      EXPECT_NE(parse_reflection(raw, CritiqueOrder::kCandidateFirst).preferred,
                parse_reflection(raw, CritiqueOrder::kAnchorFirst).preferred);
    }
  }
}

TEST(ParseProperties, Pure) {
  const std::string raw = "<Analysis>z</Analysis><Result>RESPONSE 2 IS BETTER THAN RESPONSE 1</Result>";
  const auto a = parse_judgment(raw);
  const auto b = parse_judgment(raw);
  EXPECT_EQ(a.analysis, b.analysis);
  EXPECT_EQ(a.prediction, b.prediction);
}

TEST(Side, Conversions) {
  EXPECT_EQ(side_from_int(1), Side::kFirst);
  EXPECT_EQ(side_from_int(2), Side::kSecond);
  EXPECT_THROW(side_from_int(0), std::invalid_argument);
  EXPECT_THROW(side_from_int(3), std::invalid_argument);
  EXPECT_EQ(opposite(Side::kFirst), Side::kSecond);
  EXPECT_EQ(candidate_slot(CritiqueOrder::kCandidateFirst), Side::kFirst);
  EXPECT_EQ(candidate_slot(CritiqueOrder::kAnchorFirst), Side::kSecond);
  EXPECT_EQ(critique_order_from_string(to_string(CritiqueOrder::kAnchorFirst)), CritiqueOrder::kAnchorFirst);
  EXPECT_EQ(preferred_from_string(to_string(Preferred::kCandidate)), Preferred::kCandidate);
}

TEST(PreferenceInstance, ValidateRejectsEmptyResponses) {
  PreferenceInstance inst{"i", "q", "a", "", std::nullopt};
  EXPECT_THROW(inst.validate(), std::invalid_argument);
  inst.response_2 = "a";
  EXPECT_NO_THROW(inst.validate());
}

}  // namespace
}  // namespace reflectrm
