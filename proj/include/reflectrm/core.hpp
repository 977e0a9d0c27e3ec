#pragma once

// Domain types shared by every module, plus strict parsing of the judge's
// tag-structured outputs (<Analysis>...</Analysis><Result>...</Result>).

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reflectrm {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedOutput : public Error {
 public:
  using Error::Error;
};

class EmptySequence : public Error {
 public:
  using Error::Error;
};

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

class LogprobsUnsupported : public Error {
 public:
  using Error::Error;
};

class RolloutExhausted : public Error {
 public:
  using Error::Error;
};

class InsufficientPool : public Error {
 public:
  using Error::Error;
};

class EmptySide : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Positional side of a pairwise comparison. kFirst means "Response 1 is
/// better than Response 2".
enum class Side : int { kFirst = 1, kSecond = 2 };

constexpr int to_int(Side s) { return static_cast<int>(s); }
constexpr Side opposite(Side s) { return s == Side::kFirst ? Side::kSecond : Side::kFirst; }
/// Throws std::invalid_argument unless v is 1 or 2.
Side side_from_int(int v);

struct PreferenceInstance {
  std::string id;
  std::string query;
  std::string response_1;
  std::string response_2;
  std::optional<Side> gold_label;

  /// Throws std::invalid_argument when a response is empty.
  void validate() const;
};

struct TokenScore {
  std::string token;
  double logprob = 0.0;  // natural log, finite, <= 0
};

struct JudgmentOutput {
  std::string raw_text;
  std::string analysis;
  Side prediction = Side::kFirst;
  std::vector<TokenScore> token_scores;  // completion tokens only
  std::optional<double> confidence;
};

/// Display order of the two critiques in a reflection prompt.
enum class CritiqueOrder { kCandidateFirst, kAnchorFirst };

enum class Preferred { kCandidate, kAnchor };

struct ReflectionVerdict {
  std::size_t candidate_index = 0;
  CritiqueOrder permutation = CritiqueOrder::kCandidateFirst;
  std::string meta_analysis;
  Preferred preferred = Preferred::kAnchor;
  // Set when the reflection output stayed malformed and the fallback decided.
  bool fallback = false;

  bool operator==(const ReflectionVerdict&) const = default;
};

struct VoteCounts {
  int first = 0;   // votes for response 1
  int second = 0;  // votes for response 2

  int total() const { return first + second; }
  bool tied() const { return first == second; }
  bool operator==(const VoteCounts&) const = default;
};

struct InferenceTrace {
  std::string instance_id;
  std::vector<JudgmentOutput> rollouts;
  std::size_t anchor_index = 0;
  std::vector<ReflectionVerdict> verdicts;
  std::vector<std::size_t> winner_group;  // ascending, never contains anchor_index
  bool anchor_included = false;
  VoteCounts vote_counts;
  Side final_prediction = Side::kFirst;
};

std::string_view to_string(Side s);
std::string_view to_string(CritiqueOrder o);
std::string_view to_string(Preferred p);
CritiqueOrder critique_order_from_string(std::string_view s);
Preferred preferred_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Output parsing
// ---------------------------------------------------------------------------

struct ParsedJudgment {
  std::string analysis;
  Side prediction;
};

struct ParsedReflection {
  std::string meta_analysis;
  Preferred preferred;
  Side raw_choice;  // critique slot the model picked, before de-permutation
};

/// Extracts the Analysis text and maps the Result sentence to a side. The
/// verdict must equal one of the two canonical sentences after ASCII
/// case-folding and whitespace trimming. Throws MalformedOutput when a tag
/// pair is missing or duplicated, or the verdict is not canonical.
ParsedJudgment parse_judgment(std::string_view raw_text);

/// Same tag protocol with "Critique N is better than Critique M" verdicts,
/// mapped through the display order back to candidate/anchor.
ParsedReflection parse_reflection(std::string_view raw_text, CritiqueOrder permutation);

/// Critique slot (1 or 2) holding the candidate under the given order.
Side candidate_slot(CritiqueOrder order);

std::string_view response_verdict_sentence(Side winner);
std::string_view critique_verdict_sentence(Side winner);

/// Synthetic well-formed outputs, as the judge is instructed to write them.
std::string render_judgment_output(std::string_view analysis, Side prediction);
std::string render_reflection_output(std::string_view meta_analysis, Side critique_choice);

}  // namespace reflectrm
