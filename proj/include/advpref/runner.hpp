#pragma once

#include <string>
#include <vector>

#include "advpref/config.hpp"
#include "advpref/metrics.hpp"
#include "advpref/trainer.hpp"

namespace advpref {

// Files written by generate_data, relative to the data directory.
namespace data_files {
inline constexpr const char* vocab = "vocab.json";
inline constexpr const char* sft = "sft.jsonl";
inline constexpr const char* prompts = "prompts.jsonl";
inline constexpr const char* preference = "preference.jsonl";
inline constexpr const char* binary = "binary.jsonl";
inline constexpr const char* eval = "eval.jsonl";
inline constexpr const char* teacher = "teacher.policy";
inline constexpr const char* manifest = "manifest.json";
}  // namespace data_files

struct GenerateSummary {
  std::size_t n_sft = 0;
  std::size_t n_prompts = 0;
  std::size_t n_preference = 0;
  std::size_t n_binary = 0;
  std::size_t n_eval = 0;
  double retention = 0.0;
  double teacher_pass_rate = 0.0;
};

// In-memory data set built from cfg.task / cfg.teacher.
struct GeneratedData {
  TrainingData training;
  std::vector<ExampleRecord> eval;
  GenerateSummary summary;
  double teacher_margin = 0.0;
};

GeneratedData build_data(const TrainingConfig& cfg);
GenerateSummary generate_data(const TrainingConfig& cfg, const std::string& out_dir);

struct LoadedData {
  TrainingData training;
  std::vector<ExampleRecord> eval;
};
LoadedData load_data(const std::string& data_dir);

struct TrainOptions {
  std::string out_dir;
  std::string data_dir;  // empty: generate into <out>/data
  bool resume = false;
  int stop_after_stage = -1;
};

struct TrainSummary {
  PipelineResult pipeline;
  EvalReport eval;
  bool completed = false;
};

TrainSummary train(const TrainingConfig& cfg, const TrainOptions& opts);

// Writes eval.json, length_histogram.csv and gap_histogram.csv.
EvalReport evaluate_checkpoint(const TrainingConfig& cfg, const std::string& policy_path, const std::string& data_dir,
                               const std::string& out_dir);

// "separate" is the adversarial loss term (SFT->A-GRPO); the other modes mix
// the discriminator into the GRPO reward (SFT->GRPO).
inline const std::vector<std::string> kAblationModes{"rlvr", "rlvr_plus_raw", "rlvr_plus_coef", "separate"};

struct AblationRow {
  std::string cell;
  double lambda_adv = 0.0;
  std::string mode;
  std::string pipeline;
  bool ok = false;
  double pass_rate = 0.0;
  double gap_std = 0.0;
  double gap_mean = 0.0;
  double final_loss = 0.0;
  std::string error;
};

// One run per (lambda, mode) cell with shared data and seeds. Writes
// <out>/ablation.csv. Failed cells are recorded and the sweep continues.
std::vector<AblationRow> ablate(const TrainingConfig& cfg, const std::vector<double>& lambdas,
                                const std::vector<std::string>& modes, const std::string& out_dir,
                                const std::string& data_dir = "");
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Joins eval.json + config.txt of several run directories into one CSV.
std::string report(const std::vector<std::string>& run_dirs, const std::string& out_csv);

}  // namespace advpref
