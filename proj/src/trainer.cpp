#include "advpref/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "advpref/error.hpp"
#include "advpref/metrics.hpp"
#include "advpref/verify.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace advpref {

namespace {

const char* const kSignals[] = {"imitation", "preference", "adv_sft", "adv_pref"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string to_string(StageKind k) {
  switch (k) {
    case StageKind::Sft: return "SFT";
    case StageKind::ASft: return "A-SFT";
    case StageKind::Grpo: return "GRPO";
    case StageKind::AGrpo: return "A-GRPO";
    case StageKind::Unified: return "Unified";
    case StageKind::Dpo: return "DPO";
    case StageKind::Kto: return "KTO";
  }
  return "?";
}

StageKind parse_stage_kind(const std::string& s) {
  const std::string u = upper(trim(s));
  if (u == "SFT") return StageKind::Sft;
  if (u == "A-SFT" || u == "ASFT") return StageKind::ASft;
  if (u == "GRPO") return StageKind::Grpo;
  if (u == "A-GRPO" || u == "AGRPO") return StageKind::AGrpo;
  if (u == "UNIFIED") return StageKind::Unified;
  if (u == "DPO") return StageKind::Dpo;
  if (u == "KTO") return StageKind::Kto;
  throw UsageError("unknown stage kind '" + s + "'");
}

bool is_adversarial(StageKind k) {
  return k == StageKind::ASft || k == StageKind::AGrpo || k == StageKind::Unified;
}

bool uses_rollouts(StageKind k) {
  return k == StageKind::Grpo || k == StageKind::AGrpo || k == StageKind::Unified;
}

double stage_learning_rate(StageKind k, const TrainingConfig& cfg) {
  switch (k) {
    case StageKind::Sft:
    case StageKind::ASft: return cfg.lr_sft;
    case StageKind::Unified: return cfg.lr_unified;
    default: return cfg.lr_rl;
  }
}

PipelineSpec parse_pipeline(const std::string& text, int default_steps) {
  std::string s = text;
  // Normalize the Unicode arrow and commas to "->".
  for (const char* from : {"\xE2\x86\x92", ","}) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + 2)) s.replace(pos, std::strlen(from), "->");
  }
  PipelineSpec p;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find("->", start);
    const std::string item = trim(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (item.empty()) throw UsageError("pipeline '" + text + "' has an empty stage");
    StageSpec st;
    const auto colon = item.find(':');
    st.kind = parse_stage_kind(item.substr(0, colon));
    st.steps = default_steps;
    if (colon != std::string::npos) {
      const std::string n = trim(item.substr(colon + 1));
      try {
        std::size_t used = 0;
        st.steps = std::stoi(n, &used);
        if (used != n.size()) throw std::invalid_argument(n);
      } catch (const std::exception&) {
        throw UsageError("bad step count '" + n + "' in pipeline '" + text + "'");
      }
    }
    if (st.steps < 1) throw UsageError("stage steps must be >= 1 in pipeline '" + text + "'");
    p.stages.push_back(std::move(st));
    if (pos == std::string::npos) break;
    start = pos + 2;
  }
  return p;
}

std::string pipeline_to_string(const PipelineSpec& p) {
  std::string out;
  for (const auto& st : p.stages) {
    if (!out.empty()) out += "->";
    out += to_string(st.kind) + ":" + std::to_string(st.steps);
  }
  return out;
}

TrainingConfig apply_overrides(const TrainingConfig& base, const RawConfig& overrides) {
  if (overrides.empty()) return base;
  RawConfig raw = parse_config_text(config_to_text(base));
  for (const auto& [k, v] : overrides) raw[k] = v;
  return validate_config(raw);
}

EpochSampler::EpochSampler(std::size_t n, Rng rng) : n_(n), rng_(std::move(rng)) {}

void EpochSampler::reshuffle() {
  order_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
  rng_.shuffle(order_);
  pos_ = 0;
}

std::size_t EpochSampler::next() {
  if (n_ == 0) throw ContractError("EpochSampler: empty pool");
  if (pos_ == order_.size()) reshuffle();
  return order_[pos_++];
}

std::vector<std::size_t> EpochSampler::take(std::size_t k) {
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(next());
  return out;
}

std::pair<std::size_t, std::size_t> mixed_batch_sizes(int batch_size, double sft_fraction) {
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  if (!(sft_fraction >= 0.0 && sft_fraction <= 1.0)) throw ContractError("sft_fraction outside [0, 1]");
  const auto n_sft = static_cast<std::size_t>(std::llround(batch_size * sft_fraction));
  return {n_sft, static_cast<std::size_t>(batch_size) - n_sft};
}

MixedBatch build_mixed_batch(EpochSampler& sft_pool, EpochSampler& pref_pool, int batch_size, double sft_fraction) {
  const auto [n_sft, n_pref] = mixed_batch_sizes(batch_size, sft_fraction);
  if (n_sft > 0 && sft_pool.size() == 0) throw ContractError("mixed batch needs demonstrations but the pool is empty");
  if (n_pref > 0 && pref_pool.size() == 0) throw ContractError("mixed batch needs prompts but the pool is empty");
  return {sft_pool.take(n_sft), pref_pool.take(n_pref)};
}

DiscriminatorKind make_discriminator(const DiscConfig& cfg, std::shared_ptr<const PolicyParams> teacher) {
  BaseDiscriminator base;
  if (cfg.kind == DiscKindTag::LogLikelihood) {
    if (!teacher) throw ConfigError("disc.kind", "log-likelihood discriminator needs a teacher policy");
    base = LogLikelihoodOracle{std::move(teacher), cfg.scale};
  } else {
    base = FeatureDistance{cfg.length_weight, cfg.count_weight};
  }
  if (cfg.anchored) return ReferenceAnchored{base};
  return std::visit([](const auto& b) -> DiscriminatorKind { return b; }, base);
}

std::map<std::string, Gradient> learning_signals(StageKind kind, const LossValue& lv, const PolicyParams& params) {
  std::map<std::string, Gradient> out;
  for (const char* s : kSignals) out.emplace(s, params.zero_gradient());
  auto add = [&](const char* signal, const char* part) {
    auto it = lv.parts.find(part);
    if (it != lv.parts.end()) out.at(signal).axpy(1.0, it->second);
  };
  switch (kind) {
    case StageKind::Unified:
      for (const char* s : kSignals) add(s, s);
      break;
    case StageKind::Sft:
    case StageKind::ASft:
      add("imitation", "sft");
      add("adv_sft", "adv");
      break;
    case StageKind::Grpo:
    case StageKind::AGrpo:
      add("preference", "clip");
      add("preference", "kl");
      add("adv_pref", "adv");
      break;
    case StageKind::Dpo: add("preference", "dpo"); break;
    case StageKind::Kto: add("preference", "kto"); break;
  }
  return out;
}

GradientReport gradient_decomposition(StageKind kind, const LossValue& lv, const PolicyParams& params,
                                      long long step) {
  const auto signals = learning_signals(kind, lv, params);
  GradientReport rep;
  rep.step = step;
  Gradient sum = params.zero_gradient();
  for (const char* s : kSignals) {
    sum.axpy(1.0, signals.at(s));
    rep.norms[s] = signals.at(s).norm();
  }
  rep.total_norm = lv.gradient.norm();
  rep.recomposition_error = sum.max_abs_diff(lv.gradient);
  if (!(rep.recomposition_error <= kRecompositionTol))
    throw ContractError("gradient recomposition off by " + std::to_string(rep.recomposition_error) + " at step " +
                        std::to_string(step));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      const double ni = rep.norms[kSignals[i]];
      const double nj = rep.norms[kSignals[j]];
      const double c = ni > 0.0 && nj > 0.0 ? signals.at(kSignals[i]).dot(signals.at(kSignals[j])) / (ni * nj) : 0.0;
      rep.cosines[std::string(kSignals[i]) + "|" + kSignals[j]] = c;
    }
  }
  return rep;
}

ConstraintReport constraint_diagnostic(const PolicyParams& params, const PolicyParams& teacher,
                                       const std::vector<Sequence>& prompts, double epsilon, int samples_per_prompt,
                                       int max_len, Rng& rng) {
  ConstraintReport rep;
  if (prompts.empty() || samples_per_prompt < 1) return rep;
  long long violations = 0;
  for (const auto& p : prompts) {
    double kl = 0.0;
    for (int i = 0; i < samples_per_prompt; ++i) {
      const Sequence y = sample_response(teacher, p, max_len, rng);
      kl += kl_to(teacher, params, p, y) * static_cast<double>(y.size());
    }
    kl /= samples_per_prompt;
    rep.per_prompt.push_back(kl);
    rep.mean_kl += kl;
    if (kl > epsilon) ++violations;
  }
  rep.mean_kl /= static_cast<double>(prompts.size());
  rep.violation_fraction = static_cast<double>(violations) / static_cast<double>(prompts.size());
  return rep;
}

PolicyParams initial_policy(const TrainingConfig& cfg, VocabPtr vocab) {
  PolicyParams p(std::move(vocab), cfg.context_order);
  if (cfg.init_scale > 0.0) {
    Rng rng = seeded_rng(cfg.seed, "init");
    for (double& v : p.logits().values()) v = cfg.init_scale * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

namespace {

struct StageRunner {
  PolicyParams& params;
  const StageSpec& stage;
  const TrainingConfig c;
  const TrainingData& data;
  int index;
  long long offset;
  std::string dump_dir;

  RewardMode mode = RewardMode::Rlvr;
  std::optional<DiscriminatorKind> disc;
  Detokenizer detok;
  std::string label;

  StageRunner(PolicyParams& p, const StageSpec& s, const TrainingConfig& cfg, const TrainingData& d, int idx,
              long long off, std::string dump)
      : params(p),
        stage(s),
        c(apply_overrides(cfg, s.overrides)),
        data(d),
        index(idx),
        offset(off),
        dump_dir(std::move(dump)),
        detok(d.vocab),
        label("stage" + std::to_string(idx) + "/") {
    mode = s.reward_mode.value_or(c.reward_mode);
  }

  const Sequence& teacher_response(const ExampleRecord& r) const {
    if (!r.teacher_response) throw ConfigError("teacher", "adversarial scoring needs teacher_response on every record");
    return *r.teacher_response;
  }

  DiscriminatorScore score(const ExampleRecord& r, const Sequence& y) const {
    return discriminate(*disc, r.prompt, teacher_response(r), y, r.gt_response);
  }

  std::vector<SftExample> sft_examples(const std::vector<std::size_t>& idx) const {
    std::vector<SftExample> out;
    for (auto i : idx) {
      const auto& r = data.sft[i];
      if (!r.gt_response) throw ContractError("demonstration record without gt_response");
      out.push_back({r.prompt, *r.gt_response});
    }
    return out;
  }

  std::vector<AdversarialSample> student_samples(const std::vector<std::size_t>& idx, Rng& rng, double& pass_sum) const {
    std::vector<AdversarialSample> out;
    for (auto i : idx) {
      const auto& r = data.sft[i];
      Sequence y = sample_response(params, r.prompt, c.max_len, rng);
      pass_sum += verifiable_reward(y, r.constraints, detok);
      const double coef = score(r, y).coef;
      out.push_back({r.prompt, std::move(y), coef});
    }
    return out;
  }

  std::vector<GroupRollout> rollouts(const std::vector<std::size_t>& idx, Rng& rng, bool with_disc,
                                     double& pass_sum, long long& n) const {
    std::vector<GroupRollout> out;
    for (auto i : idx) {
      const auto& r = data.prompts[i];
      GroupRollout ro;
      ro.prompt = r.prompt;
      for (int g = 0; g < c.group_size; ++g) {
        Sequence y = sample_response(params, r.prompt, c.max_len, rng);
        const int base = verifiable_reward(y, r.constraints, detok);
        pass_sum += base;
        ++n;
        double reward = base;
        if (with_disc) {
          const auto sc = score(r, y);
          ro.coefs.push_back(sc.coef);
          ro.raw_scores.push_back(sc.raw);
          reward = mixed_reward(base, sc.raw, sc.coef, mode);
        }
        ro.rewards.push_back(reward);
        ro.responses.push_back(std::move(y));
      }
      ro.advantages = group_advantages(ro.rewards, c.std_eps);
      out.push_back(std::move(ro));
    }
    attach_old_logprobs(params, out);
    return out;
  }

  [[noreturn]] void abort_numerical(long long step, const LossValue& lv, const std::string& what) const {
    std::string path;
    if (!dump_dir.empty()) {
      path = (fs::path(dump_dir) / ("nan_stage" + std::to_string(index) + "_step" + std::to_string(step))).string();
      nlohmann::ordered_json j;
      j["stage"] = index;
      j["kind"] = to_string(stage.kind);
      j["step"] = step;
      j["what"] = what;
      j["loss"] = lv.scalar;
      j["components"] = lv.components;
      write_file(path + "/state.json", j.dump(2) + "\n");
      write_file(path + "/params", policy_to_text(params));
      write_file(path + "/config", config_to_text(c));
    }
    throw NumericalError(what + " at stage " + std::to_string(index) + " step " + std::to_string(step) +
                             (path.empty() ? "" : " (state dumped to " + path + ")"),
                         path);
  }

  StageResult run() {
    const StageKind kind = stage.kind;
    if (stage.steps < 1) throw ContractError("stage steps must be >= 1");
    const bool needs_disc = is_adversarial(kind) || (uses_rollouts(kind) && mode != RewardMode::Rlvr);
    if (needs_disc) {
      if (!data.teacher) throw ConfigError("teacher", to_string(kind) + " stage needs a teacher policy");
      disc = make_discriminator(c.disc, data.teacher);
    }
    const double sft_fraction = effective_sft_fraction(c);
    auto require = [&](bool ok, const char* what) {
      if (!ok) throw ContractError(to_string(kind) + " stage needs " + what);
    };
    switch (kind) {
      case StageKind::Sft:
      case StageKind::ASft: require(!data.sft.empty(), "demonstration records"); break;
      case StageKind::Grpo:
      case StageKind::AGrpo: require(!data.prompts.empty(), "rollout prompts"); break;
      case StageKind::Unified:
        require(c.alpha == 0.0 || !data.sft.empty(), "demonstration records");
        require(c.alpha == 1.0 || !data.prompts.empty(), "rollout prompts");
        break;
      case StageKind::Dpo: require(!data.preference.empty(), "preference records"); break;
      case StageKind::Kto: require(!data.binary.empty(), "binary-labelled records"); break;
    }

    std::size_t pref_n = data.prompts.size();
    if (kind == StageKind::Dpo) pref_n = data.preference.size();
    if (kind == StageKind::Kto) pref_n = data.binary.size();
    EpochSampler sft_pool(data.sft.size(), seeded_rng(c.seed, label + "sft_batch"));
    EpochSampler pref_pool(pref_n, seeded_rng(c.seed, label + "pref_batch"));
    Rng student_rng = seeded_rng(c.seed, label + "sft_student");
    Rng rollout_rng = seeded_rng(c.seed, label + "rollout");

    const PolicySnapshot ref(params);
    const double lr = stage_learning_rate(kind, c);
    const auto batch = static_cast<std::size_t>(c.batch_size);

    std::vector<Sequence> diag_prompts;
    if (data.teacher) {
      const auto& pool = data.prompts.empty() ? data.sft : data.prompts;
      for (std::size_t i = 0; i < pool.size() && diag_prompts.size() < static_cast<std::size_t>(c.diag_prompts); ++i)
        diag_prompts.push_back(pool[i].prompt);
    }

    StageResult res;
    for (long long step = 1; step <= stage.steps; ++step) {
      const long long global = offset + step;
      LossValue lv;
      double pass_sum = 0.0;
      long long pass_n = 0;
      std::vector<double> coefs;
      double objective_mix_error = -1.0;

      switch (kind) {
        case StageKind::Sft: {
          const auto ex = sft_examples(sft_pool.take(batch));
          lv = sft_loss(params, ex);
          break;
        }
        case StageKind::ASft: {
          const auto idx = sft_pool.take(batch);
          const auto ex = sft_examples(idx);
          const auto samples = student_samples(idx, student_rng, pass_sum);
          pass_n = static_cast<long long>(samples.size());
          for (const auto& s : samples) coefs.push_back(s.coef);
          lv = asft_loss(params, ex, samples, c.lambda_adv);
          break;
        }
        case StageKind::Grpo:
        case StageKind::AGrpo: {
          const bool with_disc = needs_disc;
          const auto ro = rollouts(pref_pool.take(batch), rollout_rng, with_disc, pass_sum, pass_n);
          for (const auto& r : ro) coefs.insert(coefs.end(), r.coefs.begin(), r.coefs.end());
          if (kind == StageKind::AGrpo)
            lv = agrpo_loss(params, params, ref, ro, c.clip_eps, c.beta_kl, c.lambda_adv);
          else
            lv = grpo_loss(params, params, ref, ro, c.clip_eps, c.beta_kl);
          break;
        }
        case StageKind::Unified: {
          const MixedBatch mb = build_mixed_batch(sft_pool, pref_pool, c.batch_size, sft_fraction);
          const auto ex = sft_examples(mb.sft);
          const auto samples = student_samples(mb.sft, student_rng, pass_sum);
          pass_n = static_cast<long long>(samples.size());
          const auto ro = rollouts(mb.pref, rollout_rng, true, pass_sum, pass_n);
          for (const auto& s : samples) coefs.push_back(s.coef);
          for (const auto& r : ro) coefs.insert(coefs.end(), r.coefs.begin(), r.coefs.end());
          const UnifiedWeights w{c.alpha, c.lambda_adv, c.clip_eps, c.beta_kl};
          lv = unified_loss(params, ex, samples, params, ref, ro, w);
          // Cross-check against the two objectives computed on their own.
          Gradient combo = params.zero_gradient();
          if (!ex.empty() && c.alpha > 0.0) combo.axpy(c.alpha, asft_loss(params, ex, samples, c.lambda_adv).gradient);
          if (!ro.empty() && c.alpha < 1.0)
            combo.axpy(1.0 - c.alpha,
                       agrpo_loss(params, params, ref, ro, c.clip_eps, c.beta_kl, c.lambda_adv).gradient);
          objective_mix_error = combo.max_abs_diff(lv.gradient);
          if (!(objective_mix_error <= kRecompositionTol))
            throw ContractError("unified gradient differs from alpha-weighted objectives by " +
                                std::to_string(objective_mix_error));
          break;
        }
        case StageKind::Dpo: {
          std::vector<PreferenceRecord> b;
          for (auto i : pref_pool.take(batch)) b.push_back(data.preference[i]);
          lv = dpo_loss(params, ref, b, c.beta_dpo);
          break;
        }
        case StageKind::Kto: {
          std::vector<BinaryLabelRecord> b;
          for (auto i : pref_pool.take(batch)) b.push_back(data.binary[i]);
          lv = kto_loss(params, ref, b, c.beta_dpo, c.loss_aversion);
          break;
        }
      }

      if (!std::isfinite(lv.scalar)) abort_numerical(step, lv, "non-finite loss");
      if (!lv.gradient.all_finite()) abort_numerical(step, lv, "non-finite gradient");

      std::optional<GradientReport> gr;
      if (is_adversarial(kind)) gr = gradient_decomposition(kind, lv, params, global);

      // Plain gradient descent; "+ 0.0" folds -0 into +0 so that paths
      // that differ only in zero signs stay bit-identical.
      auto& v = params.logits().values();
      const auto& g = lv.gradient.values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - lr * g[i]) + 0.0;
      if (!params.logits().all_finite()) abort_numerical(step, lv, "non-finite parameters after update");

      nlohmann::ordered_json j;
      j["stage"] = index;
      j["kind"] = to_string(kind);
      j["step"] = step;
      j["global_step"] = global;
      j["loss"] = lv.scalar;
      j["components"] = lv.components;
      j["grad_norm"] = lv.gradient.norm();
      if (pass_n > 0) j["batch_pass_rate"] = pass_sum / static_cast<double>(pass_n);
      if (!coefs.empty()) j["coef_mean"] = mean_of(coefs);
      if (gr) {
        j["signals"] = gr->norms;
        j["cosines"] = gr->cosines;
        j["recomposition_error"] = gr->recomposition_error;
      }
      if (objective_mix_error >= 0.0) j["objective_mix_error"] = objective_mix_error;
      if (!diag_prompts.empty() && c.diag_every > 0 && global % c.diag_every == 0) {
        Rng diag_rng = seeded_rng(c.seed, "diag/" + std::to_string(global));
        const auto d = constraint_diagnostic(params, *data.teacher, diag_prompts, c.constraint_tol, 4, c.max_len,
                                             diag_rng);
        j["kl_diag"] = d.mean_kl;
        j["kl_violation"] = d.violation_fraction;
      }
      res.metrics.push_back(j.dump());
      res.final_loss = lv.scalar;
    }
    res.rng_state["sft_batch"] = sft_pool.rng().serialize();
    res.rng_state["pref_batch"] = pref_pool.rng().serialize();
    res.rng_state["sft_student"] = student_rng.serialize();
    res.rng_state["rollout"] = rollout_rng.serialize();
    return res;
  }
};

}  // namespace

StageResult run_stage(PolicyParams& params, const StageSpec& stage, const TrainingConfig& cfg,
                      const TrainingData& data, int stage_index, long long step_offset, const std::string& dump_dir) {
  if (!data.vocab || !(params.vocab() == *data.vocab))
    throw ContractError("run_stage: policy and data vocabularies differ");
  StageRunner r(params, stage, cfg, data, stage_index, step_offset, dump_dir);
  return r.run();
}

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

PipelineResult run_pipeline(const PipelineSpec& pipeline, const TrainingConfig& cfg, const TrainingData& data,
                            const PipelineOptions& opts) {
  if (pipeline.stages.empty()) throw ContractError("pipeline has no stages");
  if (!data.vocab) throw ContractError("training data has no vocabulary");
  PipelineResult res{initial_policy(cfg, data.vocab), {}, {}, 0, 0.0};
  const bool persist = !opts.out_dir.empty();
  const fs::path out(opts.out_dir);
  if (persist) write_file((out / "config.txt").string(), config_to_text(cfg));

  long long offset = 0;
  bool resuming = opts.resume;
  for (std::size_t i = 0; i < pipeline.stages.size(); ++i) {
    const StageSpec& st = pipeline.stages[i];
    const TrainingConfig stage_cfg = apply_overrides(cfg, st.overrides);
    const fs::path dir = out / "ckpt" / (std::to_string(i) + "_" + to_string(st.kind)) / std::to_string(st.steps);
    const std::string cfg_text = config_to_text(stage_cfg) +
                                 (st.reward_mode ? "# reward_mode override: " + to_string(*st.reward_mode) + "\n" : "");

    if (persist && resuming && fs::exists(dir / "complete")) {
      if (read_file((dir / "config").string()) != cfg_text)
        throw ConfigError("resume", "checkpoint " + dir.string() + " was written with a different config");
      res.params = load_policy((dir / "params").string());
      if (!res.params.compatible_with(initial_policy(cfg, data.vocab)))
        throw ConfigError("resume", "checkpoint policy does not match the configured vocabulary/context order");
      for (auto& l : split_lines(read_file((dir / "metrics.jsonl").string()))) res.metrics.push_back(std::move(l));
      res.stage_dirs.push_back(dir.string());
      ++res.resumed_stages;
      offset += st.steps;
      continue;
    }
    resuming = false;

    StageResult sr = run_stage(res.params, st, cfg, data, static_cast<int>(i), offset, persist ? opts.out_dir : "");
    offset += st.steps;
    res.final_loss = sr.final_loss;
    if (persist) {
      write_file((dir / "params").string(), policy_to_text(res.params));
      write_file((dir / "config").string(), cfg_text);
      nlohmann::ordered_json rj(sr.rng_state);
      write_file((dir / "rng").string(), rj.dump(1) + "\n");
      write_file((dir / "metrics.jsonl").string(), join_lines(sr.metrics));
      write_file((dir / "complete").string(), "");
      res.stage_dirs.push_back(dir.string());
    }
    for (auto& l : sr.metrics) res.metrics.push_back(std::move(l));
    if (opts.stop_after_stage >= 0 && static_cast<int>(i) >= opts.stop_after_stage) break;
  }
  if (persist) {
    write_file((out / "metrics.jsonl").string(), join_lines(res.metrics));
    write_file((out / "final.policy").string(), policy_to_text(res.params));
  }
  return res;
}

}  // namespace advpref
