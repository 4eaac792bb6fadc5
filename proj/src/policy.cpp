#include "advpref/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "advpref/dataset.hpp"
#include "advpref/error.hpp"

namespace advpref {

void LogitTable::axpy(double a, const LogitTable& x) {
  if (!same_shape(x)) throw ContractError("LogitTable::axpy shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
}

void LogitTable::scale(double a) {
  for (double& v : data_) v *= a;
}

double LogitTable::dot(const LogitTable& other) const {
  if (!same_shape(other)) throw ContractError("LogitTable::dot shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) s += data_[i] * other.data_[i];
  return s;
}

double LogitTable::norm() const { return std::sqrt(dot(*this)); }

double LogitTable::max_abs_diff(const LogitTable& other) const {
  if (!same_shape(other)) throw ContractError("LogitTable::max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) m = std::max(m, std::abs(data_[i] - other.data_[i]));
  return m;
}

bool LogitTable::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

PolicyParams::PolicyParams(VocabPtr vocab, int context_order) : vocab_(std::move(vocab)), order_(context_order) {
  if (!vocab_) throw ContractError("policy needs a vocabulary");
  if (order_ < 1 || order_ > 4) throw ContractError("context order must lie in [1, 4]");
  std::size_t states = 1;
  for (int i = 0; i < order_; ++i) states *= vocab_->size() + 1;
  logits_ = LogitTable(states, vocab_->size());
}

std::size_t PolicyParams::state_at(std::span<const Token> prompt, std::span<const Token> response,
                                   std::size_t prefix_len) const {
  // Digit 0 is the begin state; token t maps to digit t + 1. The most recent
  // token is the least significant digit.
  const std::size_t base = vocab_->size() + 1;
  const std::size_t total = prompt.size() + prefix_len;
  std::size_t state = 0;
  std::size_t mult = 1;
  for (int j = 0; j < order_; ++j) {
    std::size_t digit = 0;
    if (static_cast<std::size_t>(j) < total) {
      const std::size_t pos = total - 1 - static_cast<std::size_t>(j);
      const Token t = pos < prompt.size() ? prompt[pos] : response[pos - prompt.size()];
      digit = static_cast<std::size_t>(t) + 1;
    }
    state += digit * mult;
    mult *= base;
  }
  return state;
}

bool PolicyParams::compatible_with(const PolicyParams& other) const noexcept {
  return order_ == other.order_ && (vocab_ == other.vocab_ || *vocab_ == *other.vocab_);
}

bool PolicyParams::operator==(const PolicyParams& other) const {
  return compatible_with(other) && logits_ == other.logits_;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

namespace {

// log softmax at index `tok`, computed stably.
double log_softmax_at(std::span<const double> logits, Token tok) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  return logits[static_cast<std::size_t>(tok)] - m - std::log(z);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double lz = m + std::log(z);
  std::vector<double> out(logits.begin(), logits.end());
  for (double& v : out) v -= lz;
  return out;
}

void require_compatible(const PolicyParams& a, const PolicyParams& b) {
  if (!a.compatible_with(b)) throw ContractError("policies differ in vocabulary or context order");
}

}  // namespace

std::vector<double> state_distribution(const PolicyParams& params, std::size_t state) {
  return softmax(params.logits().row(state));
}

std::vector<double> next_token_distribution(const PolicyParams& params, std::span<const Token> context) {
  const std::size_t s = params.state_at(context, {}, 0);
  return state_distribution(params, s);
}

std::vector<double> token_logprobs(const PolicyParams& params, const Sequence& prompt, const Sequence& response) {
  std::vector<double> out;
  out.reserve(response.size());
  for (std::size_t t = 0; t < response.size(); ++t) {
    const std::size_t s = params.state_at(prompt.view(), response.view(), t);
    out.push_back(log_softmax_at(params.logits().row(s), response.tokens[t]));
  }
  return out;
}

double sequence_logprob(const PolicyParams& params, const Sequence& prompt, const Sequence& response) {
  double total = 0.0;
  for (double lp : token_logprobs(params, prompt, response)) total += lp;
  return total;
}

Sequence sample_response(const PolicyParams& params, const Sequence& prompt, int max_len, Rng& rng) {
  if (max_len < 1) throw ContractError("sample_response: max_len must be >= 1");
  Sequence out;
  const Token eos = params.vocab().eos();
  while (static_cast<int>(out.size()) < max_len) {
    const std::size_t s = params.state_at(prompt.view(), out.view(), out.size());
    const auto p = state_distribution(params, s);
    const Token t = static_cast<Token>(rng.categorical(p));
    out.tokens.push_back(t);
    if (t == eos) break;
  }
  return out;
}

void accumulate_logprob_gradient(const PolicyParams& params, const Sequence& prompt, const Sequence& response,
                                 double weight, Gradient& out) {
  if (weight == 0.0) return;
  for (std::size_t t = 0; t < response.size(); ++t) {
    const std::size_t s = params.state_at(prompt.view(), response.view(), t);
    const auto p = state_distribution(params, s);
    auto row = out.row(s);
    for (std::size_t j = 0; j < p.size(); ++j) row[j] -= weight * p[j];
    row[static_cast<std::size_t>(response.tokens[t])] += weight;
  }
}

Gradient logprob_gradient(const PolicyParams& params, const Sequence& prompt, const Sequence& response) {
  Gradient g = params.zero_gradient();
  accumulate_logprob_gradient(params, prompt, response, 1.0, g);
  return g;
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j)
    if (p[j] > 0.0) kl += p[j] * (std::log(p[j]) - std::log(q[j]));
  return kl;
}

double kl_to(const PolicyParams& params, const PolicyParams& other, const Sequence& prompt, const Sequence& response) {
  require_compatible(params, other);
  if (response.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < response.size(); ++t) {
    const std::size_t s = params.state_at(prompt.view(), response.view(), t);
    const auto lp = log_softmax(params.logits().row(s));
    const auto lq = log_softmax(other.logits().row(s));
    double kl = 0.0;
    for (std::size_t j = 0; j < lp.size(); ++j) kl += std::exp(lp[j]) * (lp[j] - lq[j]);
    total += kl;
  }
  return total / static_cast<double>(response.size());
}

void accumulate_kl_gradient(const PolicyParams& params, const PolicyParams& other, const Sequence& prompt,
                            const Sequence& response, double weight, Gradient& out) {
  require_compatible(params, other);
  if (response.empty() || weight == 0.0) return;
  const double w = weight / static_cast<double>(response.size());
  for (std::size_t t = 0; t < response.size(); ++t) {
    const std::size_t s = params.state_at(prompt.view(), response.view(), t);
    const auto lp = log_softmax(params.logits().row(s));
    const auto lq = log_softmax(other.logits().row(s));
    double kl = 0.0;
    for (std::size_t j = 0; j < lp.size(); ++j) kl += std::exp(lp[j]) * (lp[j] - lq[j]);
    // d KL / d logit_j = p_j (log p_j - log q_j - KL)
    auto row = out.row(s);
    for (std::size_t j = 0; j < lp.size(); ++j) row[j] += w * std::exp(lp[j]) * (lp[j] - lq[j] - kl);
  }
}

std::vector<Sequence> enumerate_responses(const Vocabulary& vocab, int max_len, std::size_t bound) {
  if (max_len < 1) throw ContractError("enumerate_responses: max_len must be >= 1");
  const double branch = static_cast<double>(vocab.size() - 1);
  double count = std::pow(branch, max_len);
  for (int l = 0; l < max_len; ++l) count += std::pow(branch, l);
  if (count > static_cast<double>(bound))
    throw RefusalError("enumeration of " + std::to_string(static_cast<long long>(count)) +
                       " responses exceeds bound " + std::to_string(bound));
  std::vector<Sequence> out;
  out.reserve(static_cast<std::size_t>(count));
  const Token eos = vocab.eos();
  Sequence cur;
  // Depth-first over eos-free prefixes.
  auto rec = [&](auto&& self) -> void {
    Sequence done = cur;
    done.tokens.push_back(eos);
    out.push_back(std::move(done));
    if (static_cast<int>(cur.size()) + 1 == max_len) {
      for (Token t = 0; t < static_cast<Token>(vocab.size()); ++t) {
        if (t == eos) continue;
        cur.tokens.push_back(t);
        out.push_back(cur);
        cur.tokens.pop_back();
      }
      return;
    }
    for (Token t = 0; t < static_cast<Token>(vocab.size()); ++t) {
      if (t == eos) continue;
      cur.tokens.push_back(t);
      self(self);
      cur.tokens.pop_back();
    }
  };
  rec(rec);
  return out;
}

double exact_sequence_kl(const PolicyParams& params, const PolicyParams& other, const Sequence& prompt, int max_len,
                         std::size_t bound) {
  require_compatible(params, other);
  if (max_len > 6) throw RefusalError("exact_sequence_kl: max_len " + std::to_string(max_len) + " > 6");
  double kl = 0.0;
  for (const auto& y : enumerate_responses(params.vocab(), max_len, bound)) {
    const double lp = sequence_logprob(params, prompt, y);
    const double lq = sequence_logprob(other, prompt, y);
    kl += std::exp(lp) * (lp - lq);
  }
  return kl;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string policy_to_text(const PolicyParams& params) {
  std::string out = "advpref-policy 1\n";
  out += "order " + std::to_string(params.context_order()) + "\n";
  out += "vocab " + std::to_string(params.vocab().size()) + " " + std::to_string(params.vocab().eos());
  for (const auto& s : params.vocab().symbols()) out += " " + s;
  out += "\n";
  for (std::size_t r = 0; r < params.num_states(); ++r) {
    out += std::to_string(r);
    for (double v : params.logits().row(r)) out += " " + fmt(v);
    out += "\n";
  }
  return out;
}

PolicyParams policy_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() {
    if (!std::getline(is, line)) throw ParseError(lineno + 1, "truncated policy checkpoint");
    ++lineno;
    return std::istringstream(line);
  };
  {
    auto ls = next();
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "advpref-policy" || version != 1) throw ParseError(lineno, "not a version-1 policy checkpoint");
  }
  int order = 0;
  {
    auto ls = next();
    std::string key;
    ls >> key >> order;
    if (key != "order" || !ls) throw ParseError(lineno, "expected 'order <k>'");
  }
  VocabPtr vocab;
  {
    auto ls = next();
    std::string key;
    std::size_t n = 0;
    Token eos = 0;
    ls >> key >> n >> eos;
    if (key != "vocab" || !ls) throw ParseError(lineno, "expected 'vocab <n> <eos> symbols...'");
    std::vector<std::string> syms(n);
    for (auto& s : syms)
      if (!(ls >> s)) throw ParseError(lineno, "too few vocabulary symbols");
    vocab = std::make_shared<const Vocabulary>(std::move(syms), eos);
  }
  PolicyParams params(vocab, order);
  for (std::size_t r = 0; r < params.num_states(); ++r) {
    next();
    const char* p = line.data();
    const char* end = line.data() + line.size();
    std::size_t idx = 0;
    auto res = std::from_chars(p, end, idx);
    if (res.ec != std::errc() || idx != r) throw ParseError(lineno, "expected state row " + std::to_string(r));
    p = res.ptr;
    for (double& v : params.logits().row(r)) {
      while (p < end && *p == ' ') ++p;
      auto rv = std::from_chars(p, end, v);
      if (rv.ec != std::errc()) throw ParseError(lineno, "malformed logit");
      if (!std::isfinite(v)) throw ParseError(lineno, "non-finite logit");
      p = rv.ptr;
    }
  }
  return params;
}

void save_policy(const std::string& path, const PolicyParams& params) { write_file(path, policy_to_text(params)); }

PolicyParams load_policy(const std::string& path) { return policy_from_text(read_file(path)); }

}  // namespace advpref
