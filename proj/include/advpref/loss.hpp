#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advpref/config.hpp"
#include "advpref/dataset.hpp"
#include "advpref/policy.hpp"

namespace advpref {

// Scalar loss with its exact gradient. `components` are additive pieces of
// `scalar`; `parts` are the matching additive pieces of `gradient`.
struct LossValue {
  double scalar = 0.0;
  Gradient gradient;
  std::map<std::string, double> components;
  std::map<std::string, Gradient> parts;
};

struct SftExample {
  Sequence prompt;
  Sequence response;
};

// A student response sampled from the current policy, scored against the
// teacher by the discriminator.
struct AdversarialSample {
  Sequence prompt;
  Sequence response;
  double coef = 0.0;
};

// G responses for one prompt, sampled under the behavior snapshot.
struct GroupRollout {
  Sequence prompt;
  std::vector<Sequence> responses;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<std::vector<double>> old_logprobs;
  std::vector<double> coefs;  // empty when no discriminator is attached
  std::vector<double> raw_scores;
};

// Negative mean sequence log-likelihood.
LossValue sft_loss(const PolicyParams& params, std::span<const SftExample> batch);

// (A_i) = (r_i - mean) / (population std + std_eps).
std::vector<double> group_advantages(std::span<const double> rewards, double std_eps);

// min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)
double clipped_surrogate(double ratio, double advantage, double clip_eps);

// Fills old_logprobs from `old` for rollouts that lack them.
void attach_old_logprobs(const PolicyParams& old, std::vector<GroupRollout>& rollouts);

// -(J_clip - beta_kl * KL) with per-token ratios averaged over tokens, then
// responses, then groups; KL is kl_to against `ref` averaged the same way.
LossValue grpo_loss(const PolicyParams& params, const PolicyParams& old, const PolicyParams& ref,
                    std::span<const GroupRollout> rollouts, double clip_eps, double beta_kl);

// Adversarial term over sampled responses: scalar -mean(coef), gradient is
// the score-function estimate with the batch-mean coefficient as baseline
// (or `baseline` when given).
LossValue adversarial_loss(const PolicyParams& params, std::span<const AdversarialSample> samples,
                           std::optional<double> baseline = std::nullopt);
std::vector<AdversarialSample> adversarial_samples(std::span<const GroupRollout> rollouts);

LossValue asft_loss(const PolicyParams& params, std::span<const SftExample> batch,
                    std::span<const AdversarialSample> samples, double lambda_adv);

LossValue agrpo_loss(const PolicyParams& params, const PolicyParams& old, const PolicyParams& ref,
                     std::span<const GroupRollout> rollouts, double clip_eps, double beta_kl, double lambda_adv);

struct UnifiedWeights {
  double alpha = 0.5;
  double lambda_adv = 0.001;
  double clip_eps = 0.2;
  double beta_kl = 0.001;
};

// alpha * L_A-SFT on the demonstration slice + (1 - alpha) * L_A-GRPO on the
// rollout slice. parts: "imitation", "preference", "adv_sft", "adv_pref"
// (already weighted; they sum to the gradient).
LossValue unified_loss(const PolicyParams& params, std::span<const SftExample> sft_slice,
                       std::span<const AdversarialSample> sft_samples, const PolicyParams& old,
                       const PolicyParams& ref, std::span<const GroupRollout> pref_slice,
                       const UnifiedWeights& w);

// -mean log sigmoid(beta * (D_w - D_l)), D_y = log pi(y|x) - log pi_ref(y|x).
LossValue dpo_loss(const PolicyParams& params, const PolicyParams& ref, std::span<const PreferenceRecord> batch,
                   double beta);

// Desirable: 1 - sigmoid(beta (D - z)); undesirable: loss_aversion *
// (1 - sigmoid(beta (z - D))); z is the batch mean of D and is
// differentiated through.
LossValue kto_loss(const PolicyParams& params, const PolicyParams& ref, std::span<const BinaryLabelRecord> batch,
                   double beta, double loss_aversion);

double mixed_reward(int base_reward, double raw, double coef, RewardMode mode);

// Grid check that maximizing the expected Dirac-delta reward and minimizing
// the NLL of y* select the same policies.
struct DiracReport {
  int grid_points = 0;
  std::vector<std::size_t> reward_argmax;  // grid indices attaining the max
  std::vector<std::size_t> nll_argmin;
  bool optimizers_match = false;
  double max_reward_vs_likelihood_gap = 0.0;  // max |E[delta] - pi(y*)|
  double max_reward_vs_exp_nll_gap = 0.0;     // max |E[delta] - exp(-NLL)|
  std::vector<double> expected_reward;        // row-major over the grid
  std::vector<double> nll;
};

// Sweeps two logits of an order-1 policy over [-span, span]^2 with
// `resolution` points per axis: the logit of y*[0] at the first state, and
// either the logit of y*[1] at the second state or (for single-token y*)
// the logit of the first other token at the first state.
DiracReport dirac_equivalence_check(VocabPtr vocab, int max_len, const Sequence& y_star, int resolution,
                                    double span = 4.0);

}  // namespace advpref
