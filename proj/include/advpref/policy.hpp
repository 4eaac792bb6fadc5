#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "advpref/rng.hpp"
#include "advpref/types.hpp"

namespace advpref {

// Dense (context-state x token) table of reals. Used both for policy logits
// and for gradients with respect to them.
class LogitTable {
 public:
  LogitTable() = default;
  LogitTable(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  // this += a * x
  void axpy(double a, const LogitTable& x);
  void scale(double a);
  double dot(const LogitTable& other) const;
  double norm() const;
  double max_abs_diff(const LogitTable& other) const;
  bool all_finite() const;
  bool same_shape(const LogitTable& other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }

  bool operator==(const LogitTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using Gradient = LogitTable;

// Autoregressive softmax policy whose next-token logits depend on the last
// `context_order` tokens of prompt ++ response. Positions before the start
// of the prompt read as a reserved begin state.
class PolicyParams {
 public:
  PolicyParams(VocabPtr vocab, int context_order = 1);

  const Vocabulary& vocab() const noexcept { return *vocab_; }
  const VocabPtr& vocab_ptr() const noexcept { return vocab_; }
  int context_order() const noexcept { return order_; }
  std::size_t num_states() const noexcept { return logits_.rows(); }
  LogitTable& logits() noexcept { return logits_; }
  const LogitTable& logits() const noexcept { return logits_; }

  // Context state for predicting response[prefix_len] given the prompt.
  std::size_t state_at(std::span<const Token> prompt, std::span<const Token> response, std::size_t prefix_len) const;
  Gradient zero_gradient() const { return Gradient(logits_.rows(), logits_.cols()); }
  bool compatible_with(const PolicyParams& other) const noexcept;

  bool operator==(const PolicyParams& other) const;

 private:
  VocabPtr vocab_;
  int order_;
  LogitTable logits_;
};

// Immutable copy of a policy taken at a step boundary.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(const PolicyParams& p) : params_(std::make_shared<const PolicyParams>(p)) {}
  const PolicyParams& params() const noexcept { return *params_; }
  operator const PolicyParams&() const noexcept { return *params_; }

 private:
  std::shared_ptr<const PolicyParams> params_;
};

// Softmax of one logit row (max-shifted).
std::vector<double> softmax(std::span<const double> logits);

std::vector<double> next_token_distribution(const PolicyParams& params, std::span<const Token> context);
std::vector<double> state_distribution(const PolicyParams& params, std::size_t state);

// Per-position log pi(response[t] | prompt, response[<t]).
std::vector<double> token_logprobs(const PolicyParams& params, const Sequence& prompt, const Sequence& response);
double sequence_logprob(const PolicyParams& params, const Sequence& prompt, const Sequence& response);

// Draws tokens until eos or max_len tokens.
Sequence sample_response(const PolicyParams& params, const Sequence& prompt, int max_len, Rng& rng);

// d/dlogits log pi(response | prompt): one-hot(token) - distribution at each
// visited context, zero elsewhere.
Gradient logprob_gradient(const PolicyParams& params, const Sequence& prompt, const Sequence& response);
// out += weight * logprob_gradient(...)
void accumulate_logprob_gradient(const PolicyParams& params, const Sequence& prompt, const Sequence& response,
                                 double weight, Gradient& out);

// KL(p || q) between two categorical distributions.
double categorical_kl(std::span<const double> p, std::span<const double> q);

// Mean over response positions of KL(params(.|ctx) || other(.|ctx)).
double kl_to(const PolicyParams& params, const PolicyParams& other, const Sequence& prompt, const Sequence& response);
// out += weight * d/dlogits kl_to(...)
void accumulate_kl_gradient(const PolicyParams& params, const PolicyParams& other, const Sequence& prompt,
                            const Sequence& response, double weight, Gradient& out);

// Every response the sampler can emit under max_len: eos-terminated
// sequences of length <= max_len and eos-free sequences of length max_len.
// Refuses (RefusalError) past `bound` sequences.
std::vector<Sequence> enumerate_responses(const Vocabulary& vocab, int max_len, std::size_t bound = 2'000'000);

// Exact KL between the full response distributions, by enumeration.
// Refuses when max_len > 6 or the enumeration exceeds `bound`.
double exact_sequence_kl(const PolicyParams& params, const PolicyParams& other, const Sequence& prompt, int max_len,
                         std::size_t bound = 2'000'000);

// Text checkpoint: header, vocabulary, one row of shortest round-trip
// decimal logits per context state. Round trip is exact.
std::string policy_to_text(const PolicyParams& params);
PolicyParams policy_from_text(const std::string& text);
void save_policy(const std::string& path, const PolicyParams& params);
PolicyParams load_policy(const std::string& path);

}  // namespace advpref
