#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace advpref {

using Token = std::int32_t;

// Ordered symbol table with a designated end-of-sequence token.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> symbols, Token eos_index);

  std::size_t size() const noexcept { return symbols_.size(); }
  Token eos() const noexcept { return eos_; }
  const std::string& symbol(Token t) const;
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  // Returns -1 when the symbol is unknown.
  Token index_of(const std::string& symbol) const noexcept;

  bool operator==(const Vocabulary& other) const = default;

 private:
  std::vector<std::string> symbols_;
  Token eos_;
};

using VocabPtr = std::shared_ptr<const Vocabulary>;

// Token list. Prompts never contain eos; responses end with eos unless they
// were truncated at the length limit.
struct Sequence {
  std::vector<Token> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  std::span<const Token> view() const noexcept { return tokens; }
  bool ends_with_eos(const Vocabulary& vocab) const noexcept {
    return !tokens.empty() && tokens.back() == vocab.eos();
  }

  bool operator==(const Sequence& other) const = default;
};

// Throws ValidationError when a token is out of range or eos appears before
// the final position. `what` names the sequence in the message.
void validate_sequence(const Sequence& seq, const Vocabulary& vocab, const std::string& what);

// Response without a trailing eos (if present).
std::span<const Token> strip_eos(const Sequence& seq, const Vocabulary& vocab) noexcept;

}  // namespace advpref
