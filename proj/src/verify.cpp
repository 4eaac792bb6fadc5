#include "advpref/verify.hpp"

#include <algorithm>
#include <cctype>

#include "advpref/dataset.hpp"
#include "advpref/error.hpp"

namespace advpref {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<std::string_view> words_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw ValidationError(std::string("constraint missing list '") + key + "'");
  std::vector<std::string> out;
  for (const auto& e : j.at(key)) {
    if (!e.is_string()) throw ValidationError(std::string("non-string entry in '") + key + "'");
    out.push_back(e.get<std::string>());
  }
  return out;
}

int int_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw ValidationError(std::string("constraint missing integer '") + key + "'");
  return j.at(key).get<int>();
}

std::string string_field(const nlohmann::json& j, const char* key, const char* fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ValidationError(std::string("constraint field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace

void validate_constraint(const ConstraintSpec& spec) {
  std::visit(overloaded{
                 [](const KeywordInclusion& c) {
                   if (c.keywords.empty()) throw ValidationError("keyword_inclusion needs at least one keyword");
                   for (const auto& k : c.keywords)
                     if (k.empty()) throw ValidationError("keyword_inclusion has an empty keyword");
                 },
                 [](const MinPlaceholders& c) {
                   if (c.n < 1) throw ValidationError("min_placeholders needs n >= 1");
                   if (c.open.empty() || c.close.empty()) throw ValidationError("min_placeholders markers must be nonempty");
                 },
                 [](const ParagraphCount& c) {
                   if (c.n < 1) throw ValidationError("paragraph_count needs n >= 1");
                   if (c.divider.empty()) throw ValidationError("paragraph_count divider must be nonempty");
                 },
                 [](const PalindromeRequired&) {},
                 [](const LengthRange& c) {
                   if (c.min < 0 || c.min > c.max) throw ValidationError("length_range needs 0 <= min <= max");
                 },
                 [](const ForbiddenWords& c) {
                   if (c.words.empty()) throw ValidationError("forbidden_words needs at least one word");
                 },
             },
             spec);
}

nlohmann::ordered_json constraint_to_json(const ConstraintSpec& spec) {
  using J = nlohmann::ordered_json;
  return std::visit(overloaded{
                        [](const KeywordInclusion& c) { return J{{"kind", "keyword_inclusion"}, {"keywords", c.keywords}}; },
                        [](const MinPlaceholders& c) {
                          return J{{"kind", "min_placeholders"}, {"n", c.n}, {"open", c.open}, {"close", c.close}};
                        },
                        [](const ParagraphCount& c) {
                          return J{{"kind", "paragraph_count"}, {"n", c.n}, {"divider", c.divider}};
                        },
                        [](const PalindromeRequired&) { return J{{"kind", "palindrome_required"}}; },
                        [](const LengthRange& c) { return J{{"kind", "length_range"}, {"min", c.min}, {"max", c.max}}; },
                        [](const ForbiddenWords& c) { return J{{"kind", "forbidden_words"}, {"words", c.words}}; },
                    },
                    spec);
}

ConstraintSpec constraint_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
    throw ValidationError("constraint must be an object with a string 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  ConstraintSpec out;
  if (kind == "keyword_inclusion") out = KeywordInclusion{string_list(j, "keywords")};
  else if (kind == "min_placeholders")
    out = MinPlaceholders{int_field(j, "n"), string_field(j, "open", "["), string_field(j, "close", "]")};
  else if (kind == "paragraph_count") out = ParagraphCount{int_field(j, "n"), string_field(j, "divider", "***")};
  else if (kind == "palindrome_required") out = PalindromeRequired{};
  else if (kind == "length_range") out = LengthRange{int_field(j, "min"), int_field(j, "max")};
  else if (kind == "forbidden_words") out = ForbiddenWords{string_list(j, "words")};
  else throw ValidationError("unknown constraint kind '" + kind + "'");
  validate_constraint(out);
  return out;
}

std::string describe(const ConstraintSpec& spec) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
  };
  return std::visit(overloaded{
                        [&](const KeywordInclusion& c) { return "keywords(" + join(c.keywords) + ")"; },
                        [](const MinPlaceholders& c) { return "placeholders>=" + std::to_string(c.n); },
                        [](const ParagraphCount& c) { return "paragraphs=" + std::to_string(c.n); },
                        [](const PalindromeRequired&) { return std::string("palindrome"); },
                        [](const LengthRange& c) {
                          return "length[" + std::to_string(c.min) + "," + std::to_string(c.max) + "]";
                        },
                        [&](const ForbiddenWords& c) { return "forbidden(" + join(c.words) + ")"; },
                    },
                    spec);
}

bool check(std::string_view text, const ConstraintSpec& spec) {
  return std::visit(
      overloaded{
          [&](const KeywordInclusion& c) {
            const std::string hay = lower(text);
            return std::all_of(c.keywords.begin(), c.keywords.end(),
                               [&](const std::string& k) { return hay.find(lower(k)) != std::string::npos; });
          },
          [&](const MinPlaceholders& c) {
            int count = 0;
            std::size_t pos = 0;
            while (true) {
              const auto o = text.find(c.open, pos);
              if (o == std::string_view::npos) break;
              const auto e = text.find(c.close, o + c.open.size());
              if (e == std::string_view::npos) break;
              ++count;
              pos = e + c.close.size();
            }
            return count >= c.n;
          },
          [&](const ParagraphCount& c) {
            int count = 0;
            std::size_t pos = 0;
            while (true) {
              const auto d = text.find(c.divider, pos);
              const auto part = text.substr(pos, d == std::string_view::npos ? std::string_view::npos : d - pos);
              if (is_blank(part)) return false;
              ++count;
              if (d == std::string_view::npos) break;
              pos = d + c.divider.size();
            }
            return count == c.n;
          },
          [&](const PalindromeRequired&) {
            for (auto w : words_of(text)) {
              if (w.size() < 2) continue;
              const std::string lw = lower(w);
              if (std::equal(lw.begin(), lw.begin() + lw.size() / 2, lw.rbegin())) return true;
            }
            return false;
          },
          [&](const LengthRange& c) {
            const auto n = static_cast<int>(words_of(text).size());
            return n >= c.min && n <= c.max;
          },
          [&](const ForbiddenWords& c) {
            for (auto w : words_of(text)) {
              const std::string lw = lower(w);
              for (const auto& f : c.words)
                if (lw == lower(f)) return false;
            }
            return true;
          },
      },
      spec);
}

std::string Detokenizer::operator()(std::span<const Token> tokens) const {
  std::string out;
  bool first = true;
  for (Token t : tokens) {
    if (t == vocab_->eos()) continue;
    if (!first) out += ' ';
    out += vocab_->symbol(t);
    first = false;
  }
  return out;
}

std::string Detokenizer::operator()(const Sequence& seq) const { return (*this)(seq.view()); }

int verifiable_reward(const Sequence& response, const std::vector<ConstraintSpec>& constraints,
                      const Detokenizer& detok) {
  const std::string text = detok(response);
  for (const auto& c : constraints)
    if (!check(text, c)) return 0;
  return 1;
}

std::vector<ExampleRecord> filter_by_verifier(const std::vector<ExampleRecord>& records,
                                              const std::vector<std::optional<Sequence>>& candidates,
                                              const Detokenizer& detok) {
  if (candidates.size() != records.size())
    throw ContractError("filter_by_verifier: one candidate slot per record required");
  std::vector<ExampleRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!candidates[i]) continue;
    if (verifiable_reward(*candidates[i], records[i].constraints, detok) != 1) continue;
    ExampleRecord r = records[i];
    r.gt_response = *candidates[i];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace advpref
