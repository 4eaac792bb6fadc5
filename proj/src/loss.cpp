#include "advpref/loss.hpp"

#include <algorithm>
#include <cmath>

#include "advpref/disc.hpp"
#include "advpref/error.hpp"

namespace advpref {
namespace {

// -log sigmoid(m), stable for large |m|.
double softplus_neg(double m) { return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

void add_part(LossValue& lv, const std::string& name, double scalar, Gradient g) {
  lv.components[name] = scalar;
  lv.parts.emplace(name, std::move(g));
}

// Recomputes scalar and gradient as the sum of the parts.
void finalize(LossValue& lv, const PolicyParams& params) {
  lv.scalar = 0.0;
  for (const auto& [_, v] : lv.components) lv.scalar += v;
  lv.gradient = params.zero_gradient();
  for (const auto& [_, g] : lv.parts) lv.gradient.axpy(1.0, g);
}

LossValue scaled(const LossValue& lv, double w, const std::string& prefix) {
  LossValue out;
  out.scalar = w * lv.scalar;
  out.gradient = lv.gradient;
  out.gradient.scale(w);
  for (const auto& [k, v] : lv.components) out.components[prefix + k] = w * v;
  for (const auto& [k, g] : lv.parts) {
    Gradient s = g;
    s.scale(w);
    out.parts.emplace(prefix + k, std::move(s));
  }
  return out;
}

}  // namespace

LossValue sft_loss(const PolicyParams& params, std::span<const SftExample> batch) {
  if (batch.empty()) throw ContractError("sft_loss: empty batch");
  const double w = 1.0 / static_cast<double>(batch.size());
  double nll = 0.0;
  Gradient g = params.zero_gradient();
  for (const auto& ex : batch) {
    nll -= w * sequence_logprob(params, ex.prompt, ex.response);
    accumulate_logprob_gradient(params, ex.prompt, ex.response, -w, g);
  }
  LossValue lv;
  add_part(lv, "sft", nll, std::move(g));
  finalize(lv, params);
  return lv;
}

std::vector<double> group_advantages(std::span<const double> rewards, double std_eps) {
  if (rewards.size() < 2) throw ContractError("group_advantages: need at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean) / (sd + std_eps));
  return out;
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

void attach_old_logprobs(const PolicyParams& old, std::vector<GroupRollout>& rollouts) {
  for (auto& ro : rollouts) {
    if (ro.old_logprobs.size() == ro.responses.size()) continue;
    ro.old_logprobs.clear();
    for (const auto& y : ro.responses) ro.old_logprobs.push_back(token_logprobs(old, ro.prompt, y));
  }
}

LossValue grpo_loss(const PolicyParams& params, const PolicyParams& old, const PolicyParams& ref,
                    std::span<const GroupRollout> rollouts, double clip_eps, double beta_kl) {
  if (!params.compatible_with(old) || !params.compatible_with(ref))
    throw ContractError("grpo_loss: policies differ in vocabulary or context order");
  if (rollouts.empty()) throw ContractError("grpo_loss: no rollouts");
  double j_clip = 0.0;
  double kl = 0.0;
  Gradient g_clip = params.zero_gradient();
  Gradient g_kl = params.zero_gradient();
  const double wg = 1.0 / static_cast<double>(rollouts.size());
  for (const auto& ro : rollouts) {
    const std::size_t n = ro.responses.size();
    if (n == 0 || ro.advantages.size() != n) throw ContractError("grpo_loss: advantages missing for a group");
    const double wr = wg / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Sequence& y = ro.responses[i];
      if (y.empty()) continue;
      const std::vector<double> old_lp =
          ro.old_logprobs.size() == n ? ro.old_logprobs[i] : token_logprobs(old, ro.prompt, y);
      const double wt = wr / static_cast<double>(y.size());
      const double adv = ro.advantages[i];
      for (std::size_t t = 0; t < y.size(); ++t) {
        const std::size_t s = params.state_at(ro.prompt.view(), y.view(), t);
        const auto p = state_distribution(params, s);
        const auto tok = static_cast<std::size_t>(y.tokens[t]);
        const double ratio = std::exp(std::log(p[tok]) - old_lp[t]);
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv;
        j_clip += wt * std::min(unclipped, clipped);
        // The min selects the clipped branch only when the ratio has left the
        // band in the advantage's direction; that branch is flat in theta.
        if (unclipped <= clipped) {
          const double c = wt * adv * ratio;
          auto row = g_clip.row(s);
          for (std::size_t j = 0; j < p.size(); ++j) row[j] -= c * p[j];
          row[tok] += c;
        }
      }
      kl += wr * kl_to(params, ref, ro.prompt, y);
      accumulate_kl_gradient(params, ref, ro.prompt, y, wr, g_kl);
    }
  }
  LossValue lv;
  g_clip.scale(-1.0);
  g_kl.scale(beta_kl);
  add_part(lv, "clip", -j_clip, std::move(g_clip));
  add_part(lv, "kl", beta_kl * kl, std::move(g_kl));
  finalize(lv, params);
  return lv;
}

LossValue adversarial_loss(const PolicyParams& params, std::span<const AdversarialSample> samples,
                           std::optional<double> baseline) {
  if (samples.empty()) throw ContractError("adversarial_loss: no samples");
  double mean_coef = 0.0;
  for (const auto& s : samples) mean_coef += s.coef;
  mean_coef /= static_cast<double>(samples.size());
  const double b = baseline.value_or(mean_coef);
  const double w = 1.0 / static_cast<double>(samples.size());
  Gradient g = params.zero_gradient();
  for (const auto& s : samples) accumulate_adversarial_gradient(params, s.prompt, s.response, s.coef, b, w, g);
  LossValue lv;
  add_part(lv, "adv", -mean_coef, std::move(g));
  finalize(lv, params);
  return lv;
}

std::vector<AdversarialSample> adversarial_samples(std::span<const GroupRollout> rollouts) {
  std::vector<AdversarialSample> out;
  for (const auto& ro : rollouts) {
    if (ro.coefs.size() != ro.responses.size()) throw ContractError("rollout is missing discriminator coefficients");
    for (std::size_t i = 0; i < ro.responses.size(); ++i) out.push_back({ro.prompt, ro.responses[i], ro.coefs[i]});
  }
  return out;
}

LossValue asft_loss(const PolicyParams& params, std::span<const SftExample> batch,
                    std::span<const AdversarialSample> samples, double lambda_adv) {
  LossValue lv = sft_loss(params, batch);
  if (!samples.empty()) {
    LossValue adv = adversarial_loss(params, samples);
    adv.parts.at("adv").scale(lambda_adv);
    add_part(lv, "adv", lambda_adv * adv.scalar, std::move(adv.parts.at("adv")));
  } else if (lambda_adv != 0.0) {
    throw ContractError("asft_loss: adversarial weight set but no scored student samples");
  } else {
    add_part(lv, "adv", 0.0, params.zero_gradient());
  }
  finalize(lv, params);
  return lv;
}

LossValue agrpo_loss(const PolicyParams& params, const PolicyParams& old, const PolicyParams& ref,
                     std::span<const GroupRollout> rollouts, double clip_eps, double beta_kl, double lambda_adv) {
  LossValue lv = grpo_loss(params, old, ref, rollouts, clip_eps, beta_kl);
  const bool scored = std::all_of(rollouts.begin(), rollouts.end(),
                                  [](const GroupRollout& r) { return r.coefs.size() == r.responses.size(); });
  if (scored) {
    const auto samples = adversarial_samples(rollouts);
    LossValue adv = adversarial_loss(params, samples);
    adv.parts.at("adv").scale(lambda_adv);
    add_part(lv, "adv", lambda_adv * adv.scalar, std::move(adv.parts.at("adv")));
  } else if (lambda_adv != 0.0) {
    throw ContractError("agrpo_loss: adversarial weight set but rollouts lack coefficients");
  } else {
    add_part(lv, "adv", 0.0, params.zero_gradient());
  }
  finalize(lv, params);
  return lv;
}

LossValue unified_loss(const PolicyParams& params, std::span<const SftExample> sft_slice,
                       std::span<const AdversarialSample> sft_samples, const PolicyParams& old,
                       const PolicyParams& ref, std::span<const GroupRollout> pref_slice,
                       const UnifiedWeights& w) {
  if (w.alpha < 0.0 || w.alpha > 1.0) throw ContractError("unified_loss: alpha outside [0, 1]");
  if (w.alpha > 0.0 && sft_slice.empty()) throw ContractError("unified_loss: alpha > 0 needs a demonstration slice");
  if (w.alpha < 1.0 && pref_slice.empty()) throw ContractError("unified_loss: alpha < 1 needs a rollout slice");

  LossValue out;
  auto absorb = [&](const LossValue& part, double weight, const char* imitation_name) {
    const LossValue s = scaled(part, weight, "");
    for (const auto& [k, v] : s.components) out.components[std::string(imitation_name) + "." + k] = v;
    for (const auto& [k, g] : s.parts) out.parts.emplace(std::string(imitation_name) + "." + k, g);
  };
  if (!sft_slice.empty() && w.alpha > 0.0)
    absorb(asft_loss(params, sft_slice, sft_samples, w.lambda_adv), w.alpha, "asft");
  if (!pref_slice.empty() && w.alpha < 1.0)
    absorb(agrpo_loss(params, old, ref, pref_slice, w.clip_eps, w.beta_kl, w.lambda_adv), 1.0 - w.alpha, "agrpo");

  // Regroup into the four signals.
  auto take = [&](const std::string& key) -> Gradient {
    auto it = out.parts.find(key);
    return it == out.parts.end() ? params.zero_gradient() : it->second;
  };
  LossValue lv;
  lv.components = out.components;
  Gradient preference = take("agrpo.clip");
  preference.axpy(1.0, take("agrpo.kl"));
  lv.parts.emplace("imitation", take("asft.sft"));
  lv.parts.emplace("preference", std::move(preference));
  lv.parts.emplace("adv_sft", take("asft.adv"));
  lv.parts.emplace("adv_pref", take("agrpo.adv"));
  lv.scalar = 0.0;
  for (const auto& [_, v] : lv.components) lv.scalar += v;
  // Total gradient is alpha * g_A-SFT + (1 - alpha) * g_A-GRPO, each side
  // summed in the same part order as asft_loss / agrpo_loss.
  Gradient g_asft = params.zero_gradient();
  g_asft.axpy(1.0, take("asft.adv"));
  g_asft.axpy(1.0, take("asft.sft"));
  Gradient g_agrpo = params.zero_gradient();
  g_agrpo.axpy(1.0, take("agrpo.adv"));
  g_agrpo.axpy(1.0, take("agrpo.clip"));
  g_agrpo.axpy(1.0, take("agrpo.kl"));
  lv.gradient = std::move(g_asft);
  lv.gradient.axpy(1.0, g_agrpo);
  return lv;
}

LossValue dpo_loss(const PolicyParams& params, const PolicyParams& ref, std::span<const PreferenceRecord> batch,
                   double beta) {
  if (batch.empty()) throw ContractError("dpo_loss: empty batch");
  if (!params.compatible_with(ref)) throw ContractError("dpo_loss: policies differ in vocabulary or context order");
  const double w = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  Gradient g = params.zero_gradient();
  for (const auto& r : batch) {
    const double dw = sequence_logprob(params, r.prompt, r.winner) - sequence_logprob(ref, r.prompt, r.winner);
    const double dl = sequence_logprob(params, r.prompt, r.loser) - sequence_logprob(ref, r.prompt, r.loser);
    const double m = beta * (dw - dl);
    loss += w * softplus_neg(m);
    // d(-log sigmoid(m))/dm = -sigmoid(-m)
    const double c = -sigmoid(-m) * beta * w;
    accumulate_logprob_gradient(params, r.prompt, r.winner, c, g);
    accumulate_logprob_gradient(params, r.prompt, r.loser, -c, g);
  }
  LossValue lv;
  add_part(lv, "dpo", loss, std::move(g));
  finalize(lv, params);
  return lv;
}

LossValue kto_loss(const PolicyParams& params, const PolicyParams& ref, std::span<const BinaryLabelRecord> batch,
                   double beta, double loss_aversion) {
  if (batch.empty()) throw ContractError("kto_loss: empty batch");
  if (!params.compatible_with(ref)) throw ContractError("kto_loss: policies differ in vocabulary or context order");
  const double n = static_cast<double>(batch.size());
  std::vector<double> delta;
  delta.reserve(batch.size());
  for (const auto& r : batch)
    delta.push_back(sequence_logprob(params, r.prompt, r.response) - sequence_logprob(ref, r.prompt, r.response));
  const double z = mean_of(delta);

  double loss_d = 0.0;
  double loss_u = 0.0;
  // a[i]: coefficient of grad(delta_i) before accounting for z's dependence.
  std::vector<double> a(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].label == Label::Desirable) {
      const double u = beta * (delta[i] - z);
      const double s = sigmoid(u);
      loss_d += (1.0 - s) / n;
      a[i] = -s * (1.0 - s) * beta / n;
    } else {
      const double u = beta * (z - delta[i]);
      const double s = sigmoid(u);
      loss_u += loss_aversion * (1.0 - s) / n;
      a[i] = loss_aversion * s * (1.0 - s) * beta / n;
    }
  }
  // z = mean(delta): every a[i] contributes -a[i]/n to each grad(delta_j).
  double sum_a = 0.0;
  for (double v : a) sum_a += v;
  Gradient g = params.zero_gradient();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double c = a[i] - sum_a / n;
    accumulate_logprob_gradient(params, batch[i].prompt, batch[i].response, c, g);
  }
  LossValue lv;
  lv.components["kto_desirable"] = loss_d;
  lv.components["kto_undesirable"] = loss_u;
  lv.parts.emplace("kto", std::move(g));
  finalize(lv, params);
  return lv;
}

double mixed_reward(int base_reward, double raw, double coef, RewardMode mode) {
  switch (mode) {
    case RewardMode::Rlvr: return base_reward;
    case RewardMode::RlvrPlusRaw: return base_reward + raw;
    case RewardMode::RlvrPlusCoef: return base_reward + coef;
  }
  return base_reward;
}

DiracReport dirac_equivalence_check(VocabPtr vocab, int max_len, const Sequence& y_star, int resolution,
                                    double span) {
  if (vocab->size() > 3) throw ContractError("dirac_equivalence_check: vocabulary size must be <= 3");
  if (max_len < 1 || max_len > 2) throw ContractError("dirac_equivalence_check: max_len must be 1 or 2");
  if (y_star.empty() || static_cast<int>(y_star.size()) > max_len)
    throw ContractError("dirac_equivalence_check: y* must be a nonempty response within max_len");
  if (resolution < 2) throw ContractError("dirac_equivalence_check: resolution must be >= 2");

  const Sequence prompt;
  PolicyParams base(vocab, 1);
  const std::size_t s0 = base.state_at(prompt.view(), y_star.view(), 0);
  const auto t0 = static_cast<std::size_t>(y_star.tokens[0]);
  std::size_t s1 = s0;
  std::size_t t1 = t0 == 0 ? 1 : 0;
  if (y_star.size() >= 2) {
    s1 = base.state_at(prompt.view(), y_star.view(), 1);
    t1 = static_cast<std::size_t>(y_star.tokens[1]);
  }
  const auto responses = enumerate_responses(*vocab, max_len);

  DiracReport rep;
  rep.grid_points = resolution * resolution;
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      PolicyParams p = base;
      p.logits().at(s0, t0) = -span + 2.0 * span * i / (resolution - 1);
      p.logits().at(s1, t1) = -span + 2.0 * span * j / (resolution - 1);
      // Brute-force expectation of the Dirac reward over every response.
      double er = 0.0;
      for (const auto& y : responses) er += std::exp(sequence_logprob(p, prompt, y)) * (y == y_star ? 1.0 : 0.0);
      const double nll = -sequence_logprob(p, prompt, y_star);
      rep.expected_reward.push_back(er);
      rep.nll.push_back(nll);
      rep.max_reward_vs_likelihood_gap =
          std::max(rep.max_reward_vs_likelihood_gap, std::abs(er - std::exp(sequence_logprob(p, prompt, y_star))));
      rep.max_reward_vs_exp_nll_gap = std::max(rep.max_reward_vs_exp_nll_gap, std::abs(er - std::exp(-nll)));
    }
  }
  const double best_r = *std::max_element(rep.expected_reward.begin(), rep.expected_reward.end());
  const double best_n = *std::min_element(rep.nll.begin(), rep.nll.end());
  for (std::size_t k = 0; k < rep.nll.size(); ++k) {
    if (rep.expected_reward[k] == best_r) rep.reward_argmax.push_back(k);
    if (rep.nll[k] == best_n) rep.nll_argmin.push_back(k);
  }
  rep.optimizers_match = rep.reward_argmax == rep.nll_argmin;
  return rep;
}

}  // namespace advpref
