#include "advpref/types.hpp"

#include <unordered_set>

#include "advpref/error.hpp"

namespace advpref {

Vocabulary::Vocabulary(std::vector<std::string> symbols, Token eos_index)
    : symbols_(std::move(symbols)), eos_(eos_index) {
  if (symbols_.size() < 2) throw ValidationError("vocabulary needs at least 2 symbols");
  if (eos_ < 0 || static_cast<std::size_t>(eos_) >= symbols_.size())
    throw ValidationError("eos index " + std::to_string(eos_) + " out of range");
  std::unordered_set<std::string> seen;
  for (const auto& s : symbols_) {
    if (s.empty()) throw ValidationError("empty vocabulary symbol");
    if (s.find_first_of(" \t\r\n") != std::string::npos)
      throw ValidationError("vocabulary symbol '" + s + "' contains whitespace");
    if (!seen.insert(s).second) throw ValidationError("duplicate vocabulary symbol '" + s + "'");
  }
}

const std::string& Vocabulary::symbol(Token t) const {
  if (t < 0 || static_cast<std::size_t>(t) >= symbols_.size())
    throw ContractError("token " + std::to_string(t) + " outside vocabulary");
  return symbols_[static_cast<std::size_t>(t)];
}

Token Vocabulary::index_of(const std::string& symbol) const noexcept {
  for (std::size_t i = 0; i < symbols_.size(); ++i)
    if (symbols_[i] == symbol) return static_cast<Token>(i);
  return -1;
}

void validate_sequence(const Sequence& seq, const Vocabulary& vocab, const std::string& what) {
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const Token t = seq.tokens[i];
    if (t < 0 || static_cast<std::size_t>(t) >= vocab.size())
      throw ValidationError(what + ": token " + std::to_string(t) + " outside vocabulary");
    if (t == vocab.eos() && i + 1 != seq.tokens.size())
      throw ValidationError(what + ": eos before the final position");
  }
}

std::span<const Token> strip_eos(const Sequence& seq, const Vocabulary& vocab) noexcept {
  std::span<const Token> s = seq.tokens;
  if (!s.empty() && s.back() == vocab.eos()) s = s.first(s.size() - 1);
  return s;
}

}  // namespace advpref
