#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "advpref/types.hpp"
#include "json.hpp"

namespace advpref {

struct KeywordInclusion {
  std::vector<std::string> keywords;
  bool operator==(const KeywordInclusion&) const = default;
};
struct MinPlaceholders {
  int n = 1;
  std::string open = "[";
  std::string close = "]";
  bool operator==(const MinPlaceholders&) const = default;
};
struct ParagraphCount {
  int n = 1;
  std::string divider = "***";
  bool operator==(const ParagraphCount&) const = default;
};
struct PalindromeRequired {
  bool operator==(const PalindromeRequired&) const = default;
};
struct LengthRange {
  int min = 0;
  int max = 0;
  bool operator==(const LengthRange&) const = default;
};
struct ForbiddenWords {
  std::vector<std::string> words;
  bool operator==(const ForbiddenWords&) const = default;
};

using ConstraintSpec =
    std::variant<KeywordInclusion, MinPlaceholders, ParagraphCount, PalindromeRequired, LengthRange, ForbiddenWords>;

// Throws ValidationError on empty keyword lists, n < 1 or min > max.
void validate_constraint(const ConstraintSpec& spec);

nlohmann::ordered_json constraint_to_json(const ConstraintSpec& spec);
// Throws ValidationError on unknown kinds or missing fields.
ConstraintSpec constraint_from_json(const nlohmann::json& j);
std::string describe(const ConstraintSpec& spec);

// Total predicate over text.
//  - KeywordInclusion: every keyword occurs as a case-insensitive substring.
//  - MinPlaceholders: at least n open...close marker pairs, scanned left to right.
//  - ParagraphCount: splitting on the divider yields exactly n nonblank paragraphs.
//  - PalindromeRequired: some whitespace-delimited word of length >= 2 equals its
//    reverse (case-insensitive).
//  - LengthRange: whitespace-delimited word count lies in [min, max].
//  - ForbiddenWords: no listed word appears as a whole word (case-insensitive).
bool check(std::string_view response_text, const ConstraintSpec& spec);

// Space-joins symbols; eos is dropped.
class Detokenizer {
 public:
  explicit Detokenizer(VocabPtr vocab) : vocab_(std::move(vocab)) {}
  std::string operator()(const Sequence& seq) const;
  std::string operator()(std::span<const Token> tokens) const;
  const Vocabulary& vocab() const noexcept { return *vocab_; }

 private:
  VocabPtr vocab_;
};

// 1 when every constraint passes on the detokenized response, else 0.
int verifiable_reward(const Sequence& response, const std::vector<ConstraintSpec>& constraints,
                      const Detokenizer& detok);

}  // namespace advpref
