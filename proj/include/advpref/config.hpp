#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace advpref {

using RawConfig = std::map<std::string, std::string>;

// How the discriminator coefficient enters the GRPO reward. The separate
// adversarial loss term is not a reward mode; it is the A-GRPO stage itself.
enum class RewardMode { Rlvr, RlvrPlusRaw, RlvrPlusCoef };

enum class DiscKindTag { LogLikelihood, FeatureDistance };

enum class TeacherMode { HandBuilt, Trained };

struct DiscConfig {
  DiscKindTag kind = DiscKindTag::LogLikelihood;
  double scale = 4.0;  // oracle scale s
  bool anchored = false;
  double length_weight = 1.0;  // FeatureDistance weights
  double count_weight = 0.5;
};

// Synthetic instruction-following task. Words double as keywords; each
// enabled constraint gets one reserved prompt marker token.
struct TaskSpec {
  std::vector<std::string> words{"item", "peak", "team", "noon", "the", "[x]", "***"};
  std::vector<std::string> keyword_words{"item", "peak", "team"};
  std::vector<std::string> forbidden_words{"the"};
  std::vector<std::pair<int, int>> length_ranges{{1, 2}, {4, 6}};
  std::string placeholder_word = "[x]";
  int placeholder_n = 2;
  std::string divider_word = "***";
  int paragraph_n = 2;
  // keyword, palindrome, length, forbidden, placeholders, paragraphs
  double w_keyword = 1.0;
  double w_palindrome = 1.0;
  double w_length = 1.0;
  double w_forbidden = 1.0;
  double w_placeholders = 1.0;
  double w_paragraphs = 0.0;
  int max_constraints = 2;
  int max_len = 12;  // response length limit, eos included
  int n_sft = 64;
  int n_pref = 64;
  int n_eval = 64;
  int attempts_per_record = 4;
  std::uint64_t seed = 0;
};

struct TeacherSpec {
  TeacherMode mode = TeacherMode::HandBuilt;
  double p_sat = 0.9;
  int samples = 2000;      // pass-rate measurement size
  int train_budget = 4000; // SFT steps for the Trained mode
};

struct EvalSpec {
  int samples_per_prompt = 8;
  int gap_samples = 500;
  int histogram_bins = 20;
};

struct TrainingConfig {
  double alpha = 0.5;
  double lambda_adv = 0.001;
  double beta_kl = 0.001;
  double beta_dpo = 0.1;
  int group_size = 8;
  double clip_eps = 0.2;
  double lr_sft = 1e-5;
  double lr_rl = 1e-7;
  double lr_unified = 1e-6;
  double std_eps = 1e-8;
  std::uint64_t seed = 0;
  double constraint_tol = 0.1;

  int batch_size = 8;
  double sft_fraction = -1.0;  // -1: follow alpha
  int steps = 100;
  int max_len = 12;
  int context_order = 2;
  double init_scale = 0.0;
  double loss_aversion = 1.5;
  RewardMode reward_mode = RewardMode::Rlvr;
  int diag_every = 50;
  int diag_prompts = 16;
  std::string pipeline = "SFT";

  DiscConfig disc;
  TaskSpec task;
  TeacherSpec teacher;
  EvalSpec eval;
};

// Applies defaults for missing keys and range-checks everything present.
// Unknown keys are rejected with a ConfigError naming the key.
TrainingConfig validate_config(const RawConfig& raw);

// Parses "key = value" lines; '#' starts a comment. Throws ParseError.
RawConfig parse_config_text(const std::string& text);
RawConfig load_config_file(const std::string& path);

// Canonical, sorted "key = value" dump of every resolved field. Feeding it
// back through parse_config_text/validate_config reproduces the config.
std::string config_to_text(const TrainingConfig& cfg);

// sft_fraction with the "follow alpha" default resolved.
inline double effective_sft_fraction(const TrainingConfig& c) { return c.sft_fraction < 0.0 ? c.alpha : c.sft_fraction; }

std::string to_string(RewardMode m);
RewardMode parse_reward_mode(const std::string& s);

}  // namespace advpref
