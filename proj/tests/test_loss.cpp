#include <cmath>

#include "advpref/disc.hpp"
#include "advpref/error.hpp"
#include "advpref/loss.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace advpref;
using support::seq;
using support::vocab_of;

namespace {

double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<SftExample> random_sft_batch(const Vocabulary& v, int n, Rng& rng) {
  std::vector<SftExample> b;
  for (int i = 0; i < n; ++i)
    b.push_back({support::random_prompt(v, 1 + static_cast<int>(rng.below(2)), rng), support::random_response(v, 4, rng)});
  return b;
}

std::vector<GroupRollout> random_rollouts(const PolicyParams& old, int groups, int g, Rng& rng, bool with_coefs) {
  std::vector<GroupRollout> out;
  for (int k = 0; k < groups; ++k) {
    GroupRollout ro;
    ro.prompt = support::random_prompt(old.vocab(), 1 + static_cast<int>(rng.below(2)), rng);
    for (int i = 0; i < g; ++i) {
      ro.responses.push_back(sample_response(old, ro.prompt, 4, rng));
      ro.rewards.push_back(static_cast<double>(rng.below(2)));
      if (with_coefs) ro.coefs.push_back(2.0 * rng.uniform() - 1.0);
    }
    ro.advantages = group_advantages(ro.rewards, 1e-8);
    out.push_back(std::move(ro));
  }
  attach_old_logprobs(old, out);
  return out;
}

// Perturbs every logit by up to `scale`.
PolicyParams jitter(const PolicyParams& p, Rng& rng, double scale) {
  PolicyParams q = p;
  for (double& x : q.logits().values()) x += scale * (2.0 * rng.uniform() - 1.0);
  return q;
}

// True when some token ratio sits within `margin` of a clip edge.
bool near_kink(const PolicyParams& p, const std::vector<GroupRollout>& ros, double eps, double margin) {
  for (const auto& ro : ros)
    for (std::size_t i = 0; i < ro.responses.size(); ++i) {
      const auto lp = token_logprobs(p, ro.prompt, ro.responses[i]);
      for (std::size_t t = 0; t < lp.size(); ++t) {
        const double ratio = std::exp(lp[t] - ro.old_logprobs[i][t]);
        if (std::abs(ratio - (1.0 - eps)) < margin || std::abs(ratio - (1.0 + eps)) < margin) return true;
      }
    }
  return false;
}

Gradient sum_parts(const LossValue& lv, const PolicyParams& p) {
  Gradient g = p.zero_gradient();
  for (const auto& [_, part] : lv.parts) g.axpy(1.0, part);
  return g;
}

}  // namespace

TEST_CASE("sft loss") {
  SUBCASE("uniform vocab-4 length-3 response") {
    const PolicyParams u(vocab_of(4), 1);
    const std::vector<SftExample> b{{seq({0}), seq({1, 2, 3})}};
    const auto lv = sft_loss(u, b);
    CHECK(std::abs(lv.scalar - 3.0 * std::log(4.0)) < 1e-12);
    CHECK(lv.scalar == doctest::Approx(4.158883).epsilon(1e-6));
    CHECK_THROWS_AS(sft_loss(u, std::vector<SftExample>{}), ContractError);
  }
  SUBCASE("property: gradient matches finite differences") {
    Rng rng = seeded_rng(1, "sftfd");
    const auto v = vocab_of(3);
    for (int trial = 0; trial < 100; ++trial) {
      PolicyParams p = support::random_policy(v, 1 + static_cast<int>(rng.below(2)), rng, 2.0);
      const auto b = random_sft_batch(*v, 3, rng);
      const auto lv = sft_loss(p, b);
      const auto fd = support::finite_difference(p, [&](const PolicyParams& q) { return sft_loss(q, b).scalar; });
      CHECK(support::relative_error(lv.gradient.values(), fd) <= 1e-5);
    }
  }
  SUBCASE("property: a small gradient step strictly decreases the loss") {
    Rng rng = seeded_rng(2, "descent");
    const auto v = vocab_of(3);
    for (int trial = 0; trial < 50; ++trial) {
      PolicyParams p = support::random_policy(v, 2, rng);
      const auto b = random_sft_batch(*v, 4, rng);
      const auto lv = sft_loss(p, b);
      p.logits().axpy(-1e-3, lv.gradient);
      CHECK(sft_loss(p, b).scalar < lv.scalar);
    }
  }
  SUBCASE("minimizer is the empirical conditional distribution") {
    // Single-token responses after one prompt: counts 3, 1, 2 over {a, b, eos}.
    const auto v = vocab_of(3);
    std::vector<SftExample> b;
    for (auto [t, n] : std::vector<std::pair<Token, int>>{{0, 3}, {1, 1}, {2, 2}})
      for (int i = 0; i < n; ++i) b.push_back({seq({0}), seq({t})});
    PolicyParams p(v, 1);
    const std::size_t s = p.state_at(std::vector<Token>{0}, {}, 0);
    const double freq[3] = {3.0 / 6, 1.0 / 6, 2.0 / 6};
    for (int t = 0; t < 3; ++t) p.logits().at(s, t) = std::log(freq[t]);
    const auto at_min = sft_loss(p, b);
    CHECK(at_min.gradient.norm() < 1e-12);
    // Brute-force grid over the two free logit differences.
    double best = 1e300;
    for (int i = -40; i <= 40; ++i)
      for (int j = -40; j <= 40; ++j) {
        PolicyParams q(v, 1);
        q.logits().at(s, 0) = 0.05 * i;
        q.logits().at(s, 1) = 0.05 * j;
        best = std::min(best, sft_loss(q, b).scalar);
      }
    CHECK(at_min.scalar <= best + 1e-12);
    const auto d = state_distribution(p, s);
    for (int t = 0; t < 3; ++t) CHECK(std::abs(d[t] - freq[t]) < 1e-12);
  }
}

TEST_CASE("group advantages") {
  const std::vector<double> r{1, 0, 0, 1};
  const auto a = group_advantages(r, 1e-8);
  const std::vector<double> expect{1, -1, -1, 1};
  for (int i = 0; i < 4; ++i) CHECK(std::abs(a[i] - expect[i]) < 1e-7);
  for (double x : group_advantages(std::vector<double>{0.3, 0.3, 0.3}, 1e-8)) CHECK(x == 0.0);
  CHECK_THROWS_AS(group_advantages(std::vector<double>{1.0}, 1e-8), ContractError);
  Rng rng = seeded_rng(3, "adv");
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> rs(2 + rng.below(10));
    for (double& x : rs) x = rng.below(3) == 0 ? 1.0 : 4.0 * rng.uniform() - 2.0;
    double m = 0.0;
    for (double x : group_advantages(rs, 1e-8)) m += x;
    CHECK(std::abs(m / rs.size()) < 1e-9);
  }
}

TEST_CASE("clip rule") {
  CHECK(clipped_surrogate(1.5, 1.0, 0.2) == 1.2);
  CHECK(clipped_surrogate(0.5, -1.0, 0.2) == -0.8);
  CHECK(clipped_surrogate(1.0, 2.0, 0.2) == 2.0);
  CHECK(clipped_surrogate(0.5, 1.0, 0.2) == 0.5);
  CHECK(clipped_surrogate(1.5, -1.0, 0.2) == -1.5);
}

TEST_CASE("grpo loss") {
  SUBCASE("unit ratio example") {
    Rng rng = seeded_rng(4, "unit");
    const PolicyParams p = support::random_policy(vocab_of(3), 1, rng);
    std::vector<GroupRollout> ros(1);
    ros[0].prompt = seq({0});
    ros[0].responses = {seq({1})};
    ros[0].advantages = {2.0};
    attach_old_logprobs(p, ros);
    const auto lv = grpo_loss(p, p, p, ros, 0.2, 0.0);
    CHECK(std::abs(lv.scalar + 2.0) < 1e-15);
    CHECK(lv.components.at("kl") == 0.0);
  }
  SUBCASE("property: gradient matches finite differences away from kinks") {
    Rng rng = seeded_rng(5, "grpofd");
    const auto v = vocab_of(3);
    int checked = 0;
    while (checked < 100) {
      const PolicyParams old = support::random_policy(v, 1 + static_cast<int>(rng.below(2)), rng, 1.5);
      PolicyParams p = jitter(old, rng, 0.3);
      const PolicyParams ref = jitter(old, rng, 1.0);
      const auto ros = random_rollouts(old, 2, 4, rng, false);
      if (near_kink(p, ros, 0.2, 1e-3)) continue;
      const double beta = rng.uniform();
      const auto lv = grpo_loss(p, old, ref, ros, 0.2, beta);
      const auto fd =
          support::finite_difference(p, [&](const PolicyParams& q) { return grpo_loss(q, old, ref, ros, 0.2, beta).scalar; });
      CHECK(support::relative_error(lv.gradient.values(), fd) <= 1e-5);
      ++checked;
    }
  }
  SUBCASE("property: raising a positive-advantage response inside the band lowers the loss") {
    Rng rng = seeded_rng(6, "mono");
    const auto v = vocab_of(3);
    for (int trial = 0; trial < 50; ++trial) {
      const PolicyParams old = support::random_policy(v, 1, rng);
      std::vector<GroupRollout> ros(1);
      ros[0].prompt = seq({0});
      ros[0].responses = {seq({1}), seq({0})};
      ros[0].advantages = {1.0 + rng.uniform(), 0.0};
      attach_old_logprobs(old, ros);
      PolicyParams p = old;
      const double before = grpo_loss(p, old, old, ros, 0.2, 0.0).scalar;
      p.logits().at(p.state_at(std::vector<Token>{0}, {}, 0), 1) += 0.01;
      CHECK(grpo_loss(p, old, old, ros, 0.2, 0.0).scalar < before);
    }
  }
  SUBCASE("mismatched policies are rejected") {
    const PolicyParams a(vocab_of(3), 1), b(vocab_of(4), 1);
    std::vector<GroupRollout> ros(1);
    ros[0].prompt = seq({0});
    ros[0].responses = {seq({1})};
    ros[0].advantages = {1.0};
    CHECK_THROWS_AS(grpo_loss(a, b, a, ros, 0.2, 0.0), ContractError);
  }
}

TEST_CASE("adversarial composites") {
  Rng rng = seeded_rng(7, "acomp");
  const auto v = vocab_of(3);
  const PolicyParams p = support::random_policy(v, 2, rng);
  const auto batch = random_sft_batch(*v, 4, rng);
  std::vector<AdversarialSample> samples;
  for (const auto& ex : batch) samples.push_back({ex.prompt, sample_response(p, ex.prompt, 4, rng), 2.0 * rng.uniform() - 1.0});

  SUBCASE("asft with lambda 0 is sft") {
    const auto a = asft_loss(p, batch, samples, 0.0);
    const auto s = sft_loss(p, batch);
    CHECK(a.scalar == s.scalar);
    CHECK(a.gradient == s.gradient);
  }
  SUBCASE("asft additivity") {
    const double lam = 0.37;
    const auto a = asft_loss(p, batch, samples, lam);
    Gradient ref = sft_loss(p, batch).gradient;
    ref.axpy(lam, adversarial_loss(p, samples).gradient);
    CHECK(a.gradient.max_abs_diff(ref) < 1e-12);
    CHECK(std::abs(a.scalar - (a.components.at("sft") + a.components.at("adv"))) < 1e-12);
    CHECK_THROWS_AS(asft_loss(p, batch, {}, 0.1), ContractError);
  }
  SUBCASE("agrpo boundaries and additivity") {
    const PolicyParams old = jitter(p, rng, 0.2);
    auto ros = random_rollouts(old, 3, 4, rng, true);
    const auto plain = grpo_loss(p, old, old, ros, 0.2, 0.01);
    const auto zero = agrpo_loss(p, old, old, ros, 0.2, 0.01, 0.0);
    CHECK(zero.scalar == plain.scalar);
    CHECK(zero.gradient == plain.gradient);
    const double lam = 0.2;
    const auto full = agrpo_loss(p, old, old, ros, 0.2, 0.01, lam);
    Gradient ref = plain.gradient;
    ref.axpy(lam, adversarial_loss(p, adversarial_samples(ros)).gradient);
    CHECK(full.gradient.max_abs_diff(ref) < 1e-12);
    for (auto& ro : ros) std::fill(ro.coefs.begin(), ro.coefs.end(), 0.25);
    const auto flat = agrpo_loss(p, old, old, ros, 0.2, 0.01, lam);
    CHECK(flat.parts.at("adv").norm() < 1e-12);
    CHECK(flat.gradient.max_abs_diff(plain.gradient) < 1e-12);
  }
  SUBCASE("adversarial composite matches its exact expectation gradient") {
    // One-step policy: the sampled-term expectation is sum_y pi(y) * (-coef(y)).
    const auto v1 = vocab_of(3);
    for (int trial = 0; trial < 20; ++trial) {
      PolicyParams q = support::random_policy(v1, 1, rng);
      const std::vector<double> c{2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
      auto expected = [&](const PolicyParams& r) {
        double e = 0.0;
        for (Token t = 0; t < 3; ++t) e -= c[t] * std::exp(sequence_logprob(r, seq({0}), seq({t})));
        return e;
      };
      Gradient analytic = q.zero_gradient();
      for (Token t = 0; t < 3; ++t)
        accumulate_adversarial_gradient(q, seq({0}), seq({t}), c[t], 0.0,
                                        std::exp(sequence_logprob(q, seq({0}), seq({t}))), analytic);
      const auto fd = support::finite_difference(q, expected);
      CHECK(support::relative_error(analytic.values(), fd) <= 1e-5);
    }
  }
}

TEST_CASE("unified loss") {
  Rng rng = seeded_rng(8, "unified");
  const auto v = vocab_of(3);
  const PolicyParams p = support::random_policy(v, 2, rng);
  const PolicyParams old = jitter(p, rng, 0.2);
  const auto batch = random_sft_batch(*v, 4, rng);
  std::vector<AdversarialSample> samples;
  for (const auto& ex : batch) samples.push_back({ex.prompt, sample_response(p, ex.prompt, 4, rng), 2.0 * rng.uniform() - 1.0});
  const auto ros = random_rollouts(old, 3, 4, rng, true);
  const UnifiedWeights base{0.5, 0.05, 0.2, 0.01};

  SUBCASE("alpha 1 equals asft exactly, alpha 0 equals agrpo exactly") {
    UnifiedWeights w = base;
    w.alpha = 1.0;
    const auto u1 = unified_loss(p, batch, samples, old, old, {}, w);
    const auto a = asft_loss(p, batch, samples, w.lambda_adv);
    CHECK(u1.scalar == a.scalar);
    CHECK(u1.gradient == a.gradient);
    w.alpha = 0.0;
    const auto u0 = unified_loss(p, {}, {}, old, old, ros, w);
    const auto g = agrpo_loss(p, old, old, ros, w.clip_eps, w.beta_kl, w.lambda_adv);
    CHECK(u0.scalar == g.scalar);
    CHECK(u0.gradient == g.gradient);
  }
  SUBCASE("alpha 0.5 is the weighted sum and the four signals recompose") {
    const auto u = unified_loss(p, batch, samples, old, old, ros, base);
    Gradient ref = asft_loss(p, batch, samples, base.lambda_adv).gradient;
    ref.scale(0.5);
    ref.axpy(0.5, agrpo_loss(p, old, old, ros, base.clip_eps, base.beta_kl, base.lambda_adv).gradient);
    CHECK(u.gradient.max_abs_diff(ref) < 1e-12);
    REQUIRE(u.parts.size() == 4);
    for (const char* k : {"imitation", "preference", "adv_sft", "adv_pref"}) CHECK(u.parts.count(k) == 1);
    CHECK(sum_parts(u, p).max_abs_diff(u.gradient) < 1e-12);
  }
  SUBCASE("missing slices") {
    CHECK_THROWS_AS(unified_loss(p, {}, {}, old, old, ros, base), ContractError);
    CHECK_THROWS_AS(unified_loss(p, batch, samples, old, old, {}, base), ContractError);
    UnifiedWeights bad = base;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(unified_loss(p, batch, samples, old, old, ros, bad), ContractError);
  }
}

TEST_CASE("dpo loss") {
  const auto v = vocab_of(3);
  Rng rng = seeded_rng(9, "dpo");
  SUBCASE("policy equals reference") {
    const PolicyParams p = support::random_policy(v, 1, rng);
    const std::vector<PreferenceRecord> b{{seq({0}), seq({1, 2}), seq({0, 2})}};
    CHECK(std::abs(dpo_loss(p, p, b, 0.1).scalar - std::log(2.0)) < 1e-15);
  }
  SUBCASE("unit margin") {
    PolicyParams p(v, 1);
    const PolicyParams ref(v, 1);
    p.logits().at(p.state_at(std::vector<Token>{0}, {}, 0), 0) = 1.0;
    const std::vector<PreferenceRecord> b{{seq({0}), seq({0}), seq({1})}};
    const double l = dpo_loss(p, ref, b, 1.0).scalar;
    CHECK(std::abs(l + std::log(sigma(1.0))) < 1e-12);
    CHECK(l == doctest::Approx(0.313262).epsilon(1e-6));
  }
  SUBCASE("property: gradient vs finite differences and shift invariance") {
    for (int trial = 0; trial < 100; ++trial) {
      PolicyParams p = support::random_policy(v, 1 + static_cast<int>(rng.below(2)), rng, 2.0);
      const PolicyParams ref = support::random_policy(v, p.context_order(), rng, 2.0);
      std::vector<PreferenceRecord> b;
      for (int i = 0; i < 3; ++i) {
        PreferenceRecord r{support::random_prompt(*v, 1, rng), support::random_response(*v, 4, rng),
                           support::random_response(*v, 4, rng)};
        if (r.winner == r.loser) continue;
        b.push_back(r);
      }
      if (b.empty()) continue;
      const double beta = 0.1 + rng.uniform();
      const auto lv = dpo_loss(p, ref, b, beta);
      const auto fd = support::finite_difference(p, [&](const PolicyParams& q) { return dpo_loss(q, ref, b, beta).scalar; });
      CHECK(support::relative_error(lv.gradient.values(), fd) <= 1e-5);
      PolicyParams ps = p, rs = ref;
      const double c = 10.0 * (2.0 * rng.uniform() - 1.0);
      for (double& x : ps.logits().values()) x += c;
      for (double& x : rs.logits().values()) x += c;
      CHECK(std::abs(dpo_loss(ps, rs, b, beta).scalar - lv.scalar) < 1e-12);
    }
  }
}

TEST_CASE("kto loss") {
  const auto v = vocab_of(3);
  Rng rng = seeded_rng(10, "kto");
  SUBCASE("policy equals reference weights the halves by 1 and loss aversion") {
    const PolicyParams p = support::random_policy(v, 1, rng);
    const std::vector<BinaryLabelRecord> b{{seq({0}), seq({1, 2}), Label::Desirable},
                                           {seq({0}), seq({0, 2}), Label::Undesirable}};
    const auto lv = kto_loss(p, p, b, 0.1, 1.5);
    CHECK(std::abs(lv.components.at("kto_desirable") - 0.25) < 1e-15);
    CHECK(std::abs(lv.components.at("kto_undesirable") - 1.5 * 0.25) < 1e-15);
  }
  SUBCASE("mirrored pair is symmetric at loss aversion 1") {
    const PolicyParams p = support::random_policy(v, 1, rng), ref = support::random_policy(v, 1, rng);
    const std::vector<BinaryLabelRecord> b{{seq({0}), seq({1, 2}), Label::Desirable},
                                           {seq({0}), seq({1, 2}), Label::Undesirable}};
    const auto lv = kto_loss(p, ref, b, 0.7, 1.0);
    CHECK(std::abs(lv.components.at("kto_desirable") - lv.components.at("kto_undesirable")) < 1e-15);
  }
  SUBCASE("property: gradient vs finite differences") {
    for (int trial = 0; trial < 100; ++trial) {
      PolicyParams p = support::random_policy(v, 1 + static_cast<int>(rng.below(2)), rng, 2.0);
      const PolicyParams ref = support::random_policy(v, p.context_order(), rng, 2.0);
      std::vector<BinaryLabelRecord> b;
      for (int i = 0; i < 4; ++i)
        b.push_back({support::random_prompt(*v, 1, rng), support::random_response(*v, 4, rng),
                     rng.below(2) ? Label::Desirable : Label::Undesirable});
      const double beta = 0.1 + rng.uniform(), la = 1.0 + rng.uniform();
      const auto lv = kto_loss(p, ref, b, beta, la);
      const auto fd = support::finite_difference(p, [&](const PolicyParams& q) { return kto_loss(q, ref, b, beta, la).scalar; });
      CHECK(support::relative_error(lv.gradient.values(), fd) <= 1e-5);
    }
  }
}

TEST_CASE("mixed reward") {
  CHECK(mixed_reward(1, -3.0, 0.2, RewardMode::Rlvr) == 1.0);
  CHECK(mixed_reward(1, -3.0, 0.5, RewardMode::RlvrPlusCoef) == 1.5);
  CHECK(mixed_reward(0, -2.0, 0.5, RewardMode::RlvrPlusRaw) == -2.0);
}

TEST_CASE("dirac delta equivalence") {
  SUBCASE("single token y* = a against an independent sigmoid oracle") {
    const int res = 21;
    const double span = 4.0;
    const auto rep = dirac_equivalence_check(vocab_of(2), 1, seq({0}), res, span);
    CHECK(rep.grid_points == res * res);
    CHECK(rep.optimizers_match);
    CHECK(rep.max_reward_vs_likelihood_gap == 0.0);
    CHECK(rep.max_reward_vs_exp_nll_gap < 1e-15);
    REQUIRE(rep.reward_argmax.size() == 1);
    CHECK(rep.reward_argmax[0] == static_cast<std::size_t>((res - 1) * res));
    for (int i = 0; i < res; ++i)
      for (int j = 0; j < res; ++j) {
        const double la = -span + 2.0 * span * i / (res - 1), le = -span + 2.0 * span * j / (res - 1);
        const double q = sigma(la - le);
        CHECK(std::abs(rep.expected_reward[i * res + j] - q) < 1e-12);
        CHECK(std::abs(rep.nll[i * res + j] + std::log(q)) < 1e-12);
      }
  }
  SUBCASE("two-token y* in vocab 3") {
    const auto rep = dirac_equivalence_check(vocab_of(3), 2, seq({1, 0}), 9);
    CHECK(rep.optimizers_match);
    CHECK(rep.max_reward_vs_exp_nll_gap < 1e-12);
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(dirac_equivalence_check(vocab_of(4), 1, seq({0}), 5), ContractError);
    CHECK_THROWS_AS(dirac_equivalence_check(vocab_of(2), 3, seq({0}), 5), ContractError);
    CHECK_THROWS_AS(dirac_equivalence_check(vocab_of(2), 1, seq({}), 5), ContractError);
  }
}
