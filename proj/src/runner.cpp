#include "advpref/runner.hpp"

#include <cstdio>
#include <filesystem>

#include "advpref/error.hpp"
#include "advpref/tasks.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace advpref {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string path_in(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

// Fills gt_response where a teacher sample passes within `attempts`; keeps
// every record either way.
void try_attach_gt(std::vector<ExampleRecord>& records, const PolicyParams& teacher, const Detokenizer& detok,
                   int attempts, int max_len, Rng& rng) {
  for (auto& r : records) {
    for (int a = 0; a < attempts; ++a) {
      auto y = sample_response(teacher, r.prompt, max_len, rng);
      if (verifiable_reward(y, r.constraints, detok) == 1) {
        r.gt_response = std::move(y);
        break;
      }
    }
  }
}

}  // namespace

GeneratedData build_data(const TrainingConfig& cfg) {
  const TaskSpec& ts = cfg.task;
  const TaskLayout layout(ts);
  const std::uint64_t seed = ts.seed;
  const Detokenizer detok(layout.vocab());
  const int max_len = cfg.max_len;

  GeneratedData out;
  out.training.vocab = layout.vocab();

  Rng teacher_rng = seeded_rng(seed, "data/teacher");
  TeacherBuild tb = build_teacher(cfg.teacher, layout, cfg.context_order, teacher_rng);
  out.summary.teacher_pass_rate = tb.pass_rate;
  out.teacher_margin = tb.margin;
  auto teacher = std::make_shared<const PolicyParams>(std::move(tb.policy));
  out.training.teacher = teacher;

  Rng sft_rng = seeded_rng(seed, "data/sft");
  const auto sft_raw = generate_dataset(layout, ts.n_sft, sft_rng);
  Rng gt_rng = seeded_rng(seed, "data/gt");
  auto gt = make_gt_dataset(sft_raw, *teacher, detok, ts.attempts_per_record, max_len, gt_rng);
  out.summary.retention = gt.retention;
  Rng tr_rng = seeded_rng(seed, "data/teacher_responses");
  attach_teacher_responses(gt.records, *teacher, max_len, tr_rng);
  out.training.sft = std::move(gt.records);

  Rng prompt_rng = seeded_rng(seed, "data/prompts");
  out.training.prompts = generate_dataset(layout, ts.n_pref, prompt_rng);
  Rng prompt_gt_rng = seeded_rng(seed, "data/prompt_gt");
  try_attach_gt(out.training.prompts, *teacher, detok, ts.attempts_per_record, max_len, prompt_gt_rng);
  Rng prompt_tr_rng = seeded_rng(seed, "data/prompt_teacher_responses");
  attach_teacher_responses(out.training.prompts, *teacher, max_len, prompt_tr_rng);

  // Preference pairs: a passing teacher response against a failing sample
  // from the uniform policy.
  const PolicyParams uniform(layout.vocab(), 1);
  Rng loser_rng = seeded_rng(seed, "data/losers");
  for (const auto& r : out.training.prompts) {
    if (!r.gt_response) continue;
    for (int a = 0; a < 32; ++a) {
      auto y = sample_response(uniform, r.prompt, max_len, loser_rng);
      if (verifiable_reward(y, r.constraints, detok) == 0 && y != *r.gt_response) {
        out.training.preference.push_back({r.prompt, *r.gt_response, y});
        out.training.binary.push_back({r.prompt, *r.gt_response, Label::Desirable});
        out.training.binary.push_back({r.prompt, std::move(y), Label::Undesirable});
        break;
      }
    }
  }

  Rng eval_rng = seeded_rng(seed, "data/eval");
  out.eval = generate_dataset(layout, ts.n_eval, eval_rng);
  Rng eval_tr_rng = seeded_rng(seed, "data/eval_teacher_responses");
  attach_teacher_responses(out.eval, *teacher, max_len, eval_tr_rng);

  out.summary.n_sft = out.training.sft.size();
  out.summary.n_prompts = out.training.prompts.size();
  out.summary.n_preference = out.training.preference.size();
  out.summary.n_binary = out.training.binary.size();
  out.summary.n_eval = out.eval.size();
  return out;
}

GenerateSummary generate_data(const TrainingConfig& cfg, const std::string& out_dir) {
  const GeneratedData d = build_data(cfg);
  save_vocabulary(path_in(out_dir, data_files::vocab), *d.training.vocab);
  save_dataset(path_in(out_dir, data_files::sft), d.training.sft);
  save_dataset(path_in(out_dir, data_files::prompts), d.training.prompts);
  save_dataset(path_in(out_dir, data_files::preference), d.training.preference);
  save_dataset(path_in(out_dir, data_files::binary), d.training.binary);
  save_dataset(path_in(out_dir, data_files::eval), d.eval);
  save_policy(path_in(out_dir, data_files::teacher), *d.training.teacher);
  write_file(path_in(out_dir, "config.txt"), config_to_text(cfg));

  nlohmann::ordered_json m;
  m["version"] = kSchemaVersion;
  m["seed"] = cfg.task.seed;
  m["vocab_size"] = d.training.vocab->size();
  m["teacher_mode"] = cfg.teacher.mode == TeacherMode::HandBuilt ? "handbuilt" : "trained";
  m["teacher_pass_rate"] = d.summary.teacher_pass_rate;
  m["teacher_margin"] = d.teacher_margin;
  m["gt_retention"] = d.summary.retention;
  m["counts"] = {{"sft", d.summary.n_sft},
                 {"prompts", d.summary.n_prompts},
                 {"preference", d.summary.n_preference},
                 {"binary", d.summary.n_binary},
                 {"eval", d.summary.n_eval}};
  write_file(path_in(out_dir, data_files::manifest), m.dump(2) + "\n");
  return d.summary;
}

LoadedData load_data(const std::string& data_dir) {
  LoadedData d;
  d.training.vocab = load_vocabulary(path_in(data_dir, data_files::vocab));
  const auto& v = d.training.vocab;
  d.training.sft = load_sft_dataset(path_in(data_dir, data_files::sft), v);
  d.training.prompts = load_sft_dataset(path_in(data_dir, data_files::prompts), v);
  d.training.preference = load_preference_dataset(path_in(data_dir, data_files::preference), v);
  d.training.binary = load_binary_dataset(path_in(data_dir, data_files::binary), v);
  d.eval = load_sft_dataset(path_in(data_dir, data_files::eval), v);
  const auto teacher_path = path_in(data_dir, data_files::teacher);
  if (fs::exists(teacher_path)) {
    auto t = load_policy(teacher_path);
    if (!(t.vocab() == *v)) throw ValidationError("teacher vocabulary differs from " + std::string(data_files::vocab));
    d.training.teacher = std::make_shared<const PolicyParams>(std::move(t));
  }
  return d;
}

namespace {

void write_eval(const EvalReport& rep, const std::string& out_dir) {
  write_file(path_in(out_dir, "eval.json"), rep.to_json());
  write_file(path_in(out_dir, "length_histogram.csv"), rep.length_histogram.to_csv());
  write_file(path_in(out_dir, "gap_histogram.csv"), rep.logp_gap.histogram.to_csv());
}

EvalReport run_eval(const TrainingConfig& cfg, const PolicyParams& params, const LoadedData& d) {
  if (!d.training.teacher) throw ConfigError("teacher", "evaluation needs the teacher policy in the data directory");
  if (!params.compatible_with(*d.training.teacher))
    throw ValidationError("policy vocabulary or context order differs from the teacher");
  return evaluate(params, *d.training.teacher, d.eval, cfg.eval.samples_per_prompt, cfg.eval.gap_samples,
                  cfg.eval.histogram_bins, cfg.max_len, cfg.seed);
}

}  // namespace

TrainSummary train(const TrainingConfig& cfg, const TrainOptions& opts) {
  if (opts.out_dir.empty()) throw UsageError("train needs an output directory");
  const PipelineSpec pipeline = parse_pipeline(cfg.pipeline, cfg.steps);
  std::string data_dir = opts.data_dir;
  if (data_dir.empty()) {
    data_dir = path_in(opts.out_dir, "data");
    if (!(opts.resume && fs::exists(path_in(data_dir, data_files::manifest)))) generate_data(cfg, data_dir);
  }
  const LoadedData d = load_data(data_dir);

  TrainSummary s{run_pipeline(pipeline, cfg, d.training, {opts.out_dir, opts.resume, opts.stop_after_stage}), {},
                 false};
  s.completed = opts.stop_after_stage < 0 ||
                opts.stop_after_stage >= static_cast<int>(pipeline.stages.size()) - 1;
  if (s.completed) {
    s.eval = run_eval(cfg, s.pipeline.params, d);
    write_eval(s.eval, opts.out_dir);
  }
  return s;
}

EvalReport evaluate_checkpoint(const TrainingConfig& cfg, const std::string& policy_path, const std::string& data_dir,
                               const std::string& out_dir) {
  if (!fs::exists(policy_path)) throw IoError("checkpoint not found: " + policy_path);
  const LoadedData d = load_data(data_dir);
  const PolicyParams params = load_policy(policy_path);
  const EvalReport rep = run_eval(cfg, params, d);
  write_eval(rep, out_dir);
  write_file(path_in(out_dir, "config.txt"), config_to_text(cfg));
  return rep;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "cell,lambda_adv,mode,pipeline,status,pass_rate,logp_gap_std,logp_gap_mean,final_loss,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (auto& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    out += r.cell + "," + num(r.lambda_adv) + "," + r.mode + "," + r.pipeline + "," + (r.ok ? "ok" : "failed") + "," +
           (r.ok ? num(r.pass_rate) : "") + "," + (r.ok ? num(r.gap_std) : "") + "," + (r.ok ? num(r.gap_mean) : "") +
           "," + (r.ok ? num(r.final_loss) : "") + "," + err + "\n";
  }
  return out;
}

std::vector<AblationRow> ablate(const TrainingConfig& cfg, const std::vector<double>& lambdas,
                                const std::vector<std::string>& modes, const std::string& out_dir,
                                const std::string& data_dir) {
  if (lambdas.empty()) throw UsageError("ablate: empty lambda grid");
  if (modes.empty()) throw UsageError("ablate: empty mode list");
  for (const auto& m : modes)
    if (std::find(kAblationModes.begin(), kAblationModes.end(), m) == kAblationModes.end())
      throw UsageError("ablate: unknown mode '" + m + "' (expected rlvr, rlvr_plus_raw, rlvr_plus_coef, separate)");
  for (double l : lambdas)
    if (!(l >= 0.0) || !std::isfinite(l)) throw UsageError("ablate: lambda values must be finite and >= 0");

  std::string shared = data_dir;
  if (shared.empty()) {
    shared = path_in(out_dir, "data");
    generate_data(cfg, shared);
  }
  std::vector<AblationRow> rows;
  int k = 0;
  for (double lambda : lambdas) {
    for (const auto& mode : modes) {
      AblationRow row;
      row.lambda_adv = lambda;
      row.mode = mode;
      row.cell = "cell" + std::to_string(k++) + "_" + mode + "_" + num(lambda);
      const bool separate = mode == "separate";
      row.pipeline = separate ? "SFT->A-GRPO" : "SFT->GRPO";
      try {
        RawConfig ov{{"lambda_adv", num(lambda)},
                     {"reward_mode", separate ? "rlvr" : mode},
                     {"pipeline", row.pipeline}};
        const TrainingConfig cell_cfg = apply_overrides(cfg, ov);
        const auto s = train(cell_cfg, {path_in(path_in(out_dir, "cells"), row.cell.c_str()), shared, false, -1});
        row.ok = true;
        row.pass_rate = s.eval.pass_rate;
        row.gap_std = s.eval.logp_gap.std;
        row.gap_mean = s.eval.logp_gap.mean;
        row.final_loss = s.pipeline.final_loss;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  write_file(path_in(out_dir, "ablation.csv"), ablation_csv(rows));
  write_file(path_in(out_dir, "config.txt"), config_to_text(cfg));
  return rows;
}

std::string report(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
  if (run_dirs.empty()) throw UsageError("report: no run directories given");
  std::string out = "run,pipeline,seed,alpha,lambda_adv,reward_mode,pass_rate,sample_count,logp_gap_mean,logp_gap_std\n";
  for (const auto& dir : run_dirs) {
    const auto eval_path = path_in(dir, "eval.json");
    if (!fs::exists(eval_path)) throw IoError("report: missing " + eval_path);
    const auto ev = nlohmann::json::parse(read_file(eval_path), nullptr, false);
    if (ev.is_discarded()) throw ParseError(1, "report: malformed " + eval_path);
    const TrainingConfig c = validate_config(load_config_file(path_in(dir, "config.txt")));
    out += fs::path(dir).filename().string() + "," + c.pipeline + "," + std::to_string(c.seed) + "," + num(c.alpha) +
           "," + num(c.lambda_adv) + "," + to_string(c.reward_mode) + "," + num(ev.at("pass_rate").get<double>()) +
           "," + std::to_string(ev.at("sample_count").get<long long>()) + "," +
           num(ev.at("logp_gap").at("mean").get<double>()) + "," + num(ev.at("logp_gap").at("std").get<double>()) +
           "\n";
  }
  if (!out_csv.empty()) write_file(out_csv, out);
  return out;
}

}  // namespace advpref
