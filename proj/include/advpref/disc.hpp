#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "advpref/policy.hpp"

namespace advpref {

// Raw score r (larger = more similar), similarity p = sigmoid(r) and the
// adversarial coefficient coef = 1 - 8 (p - 0.5)^2.
struct DiscriminatorScore {
  double raw = 0.0;
  double similarity = 0.5;
  double coef = 1.0;
};

// r = -|mean_logp(student) - mean_logp(teacher)| * scale, with per-token mean
// log-probabilities taken under a frozen scoring policy.
struct LogLikelihoodOracle {
  std::shared_ptr<const PolicyParams> scorer;
  double scale = 4.0;
};

// r = -(length_weight * |len_s - len_t| + count_weight * sum_v |count_s(v) - count_t(v)|)
struct FeatureDistance {
  double length_weight = 1.0;
  double count_weight = 0.5;
};

using BaseDiscriminator = std::variant<LogLikelihoodOracle, FeatureDistance>;

// Scores teacher and student against the ground-truth response and feeds the
// score difference through the coefficient transform.
struct ReferenceAnchored {
  BaseDiscriminator inner;
};

using DiscriminatorKind = std::variant<LogLikelihoodOracle, FeatureDistance, ReferenceAnchored>;

double sigmoid(double r);
double coef_transform(double r);
DiscriminatorScore score_from_raw(double r);

// Throws ContractError on empty responses.
double raw_score(const BaseDiscriminator& kind, const Sequence& prompt, const Sequence& teacher_response,
                 const Sequence& student_response);
double raw_score(const DiscriminatorKind& kind, const Sequence& prompt, const Sequence& teacher_response,
                 const Sequence& student_response);

// coef_transform(r_t - r_s) with r_t = raw(gt, teacher), r_s = raw(gt, student).
double reference_anchored_coef(const Sequence& prompt, const std::optional<Sequence>& gt_response,
                               const Sequence& teacher_response, const Sequence& student_response,
                               const BaseDiscriminator& inner);

// Full score for any kind; anchored kinds need gt_response. For anchored
// kinds `raw` holds the score difference r_t - r_s.
DiscriminatorScore discriminate(const DiscriminatorKind& kind, const Sequence& prompt,
                                const Sequence& teacher_response, const Sequence& student_response,
                                const std::optional<Sequence>& gt_response = std::nullopt);

// Score-function estimate of the adversarial-loss gradient for one sampled
// response: -(coef - baseline) * d log pi(student | prompt).
Gradient adversarial_gradient(const PolicyParams& params, const Sequence& prompt, const Sequence& student_response,
                              double coef, double baseline);
void accumulate_adversarial_gradient(const PolicyParams& params, const Sequence& prompt,
                                     const Sequence& student_response, double coef, double baseline, double weight,
                                     Gradient& out);

double mean_of(const std::vector<double>& xs);

}  // namespace advpref
