#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "advpref/config.hpp"
#include "advpref/dataset.hpp"
#include "advpref/disc.hpp"
#include "advpref/loss.hpp"
#include "advpref/policy.hpp"

namespace advpref {

enum class StageKind { Sft, ASft, Grpo, AGrpo, Unified, Dpo, Kto };

std::string to_string(StageKind k);
StageKind parse_stage_kind(const std::string& s);  // UsageError on unknown names
bool is_adversarial(StageKind k);
bool uses_rollouts(StageKind k);
double stage_learning_rate(StageKind k, const TrainingConfig& cfg);

struct StageSpec {
  StageKind kind = StageKind::Sft;
  int steps = 1;
  RawConfig overrides;                     // stage-local config keys
  std::optional<RewardMode> reward_mode;   // overrides cfg.reward_mode
};

struct PipelineSpec {
  std::vector<StageSpec> stages;
};

// "SFT", "A-SFT->A-GRPO", "SFT:200 -> GRPO:50". Arrows may be "->" or the
// Unicode arrow; commas also separate stages. Stages without ":steps" run
// `default_steps` steps.
PipelineSpec parse_pipeline(const std::string& text, int default_steps);
std::string pipeline_to_string(const PipelineSpec& p);

// Re-validates `base` with `overrides` applied on top.
TrainingConfig apply_overrides(const TrainingConfig& base, const RawConfig& overrides);

// Everything a pipeline may read. Records in `sft` carry gt_response;
// records in `prompts` form the rollout pool.
struct TrainingData {
  VocabPtr vocab;
  std::vector<ExampleRecord> sft;
  std::vector<ExampleRecord> prompts;
  std::vector<PreferenceRecord> preference;
  std::vector<BinaryLabelRecord> binary;
  std::shared_ptr<const PolicyParams> teacher;
};

// Draws indices of an n-item pool without replacement; a fresh shuffle
// starts each epoch.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, Rng rng);
  std::size_t size() const noexcept { return n_; }
  std::size_t next();
  std::vector<std::size_t> take(std::size_t k);
  const Rng& rng() const noexcept { return rng_; }

 private:
  void reshuffle();
  std::size_t n_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

struct MixedBatch {
  std::vector<std::size_t> sft;
  std::vector<std::size_t> pref;
};

// Slice sizes round(batch_size * sft_fraction) and the remainder.
std::pair<std::size_t, std::size_t> mixed_batch_sizes(int batch_size, double sft_fraction);
MixedBatch build_mixed_batch(EpochSampler& sft_pool, EpochSampler& pref_pool, int batch_size, double sft_fraction);

DiscriminatorKind make_discriminator(const DiscConfig& cfg, std::shared_ptr<const PolicyParams> teacher);

// Norms and pairwise cosines of the four learning signals: imitation,
// preference, adv_sft, adv_pref.
struct GradientReport {
  long long step = 0;
  std::map<std::string, double> norms;
  std::map<std::string, double> cosines;  // "a|b"
  double total_norm = 0.0;
  double recomposition_error = 0.0;
};

inline constexpr double kRecompositionTol = 1e-9;

// Splits a stage loss into the four signals (absent ones are zero) and
// checks they sum to the loss gradient. ContractError past kRecompositionTol.
std::map<std::string, Gradient> learning_signals(StageKind kind, const LossValue& lv, const PolicyParams& params);
GradientReport gradient_decomposition(StageKind kind, const LossValue& lv, const PolicyParams& params, long long step);

// Sequence-level KL(teacher || params) per prompt, estimated on teacher
// samples (sum over positions of the per-position KL), and the fraction of
// prompts above epsilon.
struct ConstraintReport {
  double mean_kl = 0.0;
  double violation_fraction = 0.0;
  std::vector<double> per_prompt;
};
ConstraintReport constraint_diagnostic(const PolicyParams& params, const PolicyParams& teacher,
                                       const std::vector<Sequence>& prompts, double epsilon, int samples_per_prompt,
                                       int max_len, Rng& rng);

struct StageResult {
  std::vector<std::string> metrics;  // one JSON object per step
  std::map<std::string, std::string> rng_state;
  double final_loss = 0.0;
};

// Runs one stage in place. Streams derive from (cfg.seed, stage_index).
// dump_dir receives the state dump on a numerical abort (may be empty).
StageResult run_stage(PolicyParams& params, const StageSpec& stage, const TrainingConfig& cfg,
                      const TrainingData& data, int stage_index, long long step_offset,
                      const std::string& dump_dir = "");

PolicyParams initial_policy(const TrainingConfig& cfg, VocabPtr vocab);

struct PipelineOptions {
  std::string out_dir;         // empty: keep everything in memory
  bool resume = false;
  int stop_after_stage = -1;   // stop once this stage index has finished
};

struct PipelineResult {
  PolicyParams params;
  std::vector<std::string> metrics;
  std::vector<std::string> stage_dirs;
  int resumed_stages = 0;
  double final_loss = 0.0;
};

// Checkpoints go to <out>/ckpt/<idx>_<kind>/<steps>/{params,config,rng,metrics.jsonl}.
PipelineResult run_pipeline(const PipelineSpec& pipeline, const TrainingConfig& cfg, const TrainingData& data,
                            const PipelineOptions& opts = {});

}  // namespace advpref
