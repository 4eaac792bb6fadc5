#include "advpref/disc.hpp"

#include <cmath>

#include "advpref/error.hpp"

namespace advpref {

double sigmoid(double r) {
  if (r >= 0.0) return 1.0 / (1.0 + std::exp(-r));
  const double e = std::exp(r);
  return e / (1.0 + e);
}

// sigmoid(r) - 0.5 = tanh(r / 2) / 2, which keeps the transform exactly even.
double coef_transform(double r) {
  const double d = 0.5 * std::tanh(0.5 * r);
  return 1.0 - 8.0 * d * d;
}

DiscriminatorScore score_from_raw(double r) { return {r, sigmoid(r), coef_transform(r)}; }

namespace {

double mean_token_logprob(const PolicyParams& scorer, const Sequence& prompt, const Sequence& y) {
  return sequence_logprob(scorer, prompt, y) / static_cast<double>(y.size());
}

}  // namespace

double raw_score(const BaseDiscriminator& kind, const Sequence& prompt, const Sequence& teacher_response,
                 const Sequence& student_response) {
  if (teacher_response.empty() || student_response.empty())
    throw ContractError("raw_score: responses must be nonempty");
  if (const auto* ll = std::get_if<LogLikelihoodOracle>(&kind)) {
    if (!ll->scorer) throw ContractError("log-likelihood discriminator has no scoring policy");
    const double ls = mean_token_logprob(*ll->scorer, prompt, student_response);
    const double lt = mean_token_logprob(*ll->scorer, prompt, teacher_response);
    return -std::abs(ls - lt) * ll->scale;
  }
  const auto& fd = std::get<FeatureDistance>(kind);
  // Features need the vocabulary size only; take it from the largest token seen.
  Token max_tok = 0;
  for (Token t : teacher_response.tokens) max_tok = std::max(max_tok, t);
  for (Token t : student_response.tokens) max_tok = std::max(max_tok, t);
  std::vector<double> ct(static_cast<std::size_t>(max_tok) + 1, 0.0), cs(ct.size(), 0.0);
  for (Token t : teacher_response.tokens) ct[static_cast<std::size_t>(t)] += 1.0;
  for (Token t : student_response.tokens) cs[static_cast<std::size_t>(t)] += 1.0;
  double d = fd.length_weight * std::abs(static_cast<double>(student_response.size()) -
                                         static_cast<double>(teacher_response.size()));
  for (std::size_t v = 0; v < ct.size(); ++v) d += fd.count_weight * std::abs(cs[v] - ct[v]);
  return -d;
}

double raw_score(const DiscriminatorKind& kind, const Sequence& prompt, const Sequence& teacher_response,
                 const Sequence& student_response) {
  if (const auto* ll = std::get_if<LogLikelihoodOracle>(&kind))
    return raw_score(BaseDiscriminator(*ll), prompt, teacher_response, student_response);
  if (const auto* fd = std::get_if<FeatureDistance>(&kind))
    return raw_score(BaseDiscriminator(*fd), prompt, teacher_response, student_response);
  throw ContractError("raw_score: reference-anchored discriminators need a ground-truth response");
}

double reference_anchored_coef(const Sequence& prompt, const std::optional<Sequence>& gt_response,
                               const Sequence& teacher_response, const Sequence& student_response,
                               const BaseDiscriminator& inner) {
  if (!gt_response) throw ContractError("reference-anchored coefficient needs gt_response");
  const double rt = raw_score(inner, prompt, *gt_response, teacher_response);
  const double rs = raw_score(inner, prompt, *gt_response, student_response);
  return coef_transform(rt - rs);
}

DiscriminatorScore discriminate(const DiscriminatorKind& kind, const Sequence& prompt,
                                const Sequence& teacher_response, const Sequence& student_response,
                                const std::optional<Sequence>& gt_response) {
  if (const auto* anchored = std::get_if<ReferenceAnchored>(&kind)) {
    if (!gt_response) throw ContractError("reference-anchored discriminator needs gt_response");
    const double rt = raw_score(anchored->inner, prompt, *gt_response, teacher_response);
    const double rs = raw_score(anchored->inner, prompt, *gt_response, student_response);
    return score_from_raw(rt - rs);
  }
  return score_from_raw(raw_score(kind, prompt, teacher_response, student_response));
}

void accumulate_adversarial_gradient(const PolicyParams& params, const Sequence& prompt,
                                     const Sequence& student_response, double coef, double baseline, double weight,
                                     Gradient& out) {
  accumulate_logprob_gradient(params, prompt, student_response, -(coef - baseline) * weight, out);
}

Gradient adversarial_gradient(const PolicyParams& params, const Sequence& prompt, const Sequence& student_response,
                              double coef, double baseline) {
  Gradient g = params.zero_gradient();
  accumulate_adversarial_gradient(params, prompt, student_response, coef, baseline, 1.0, g);
  return g;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace advpref
