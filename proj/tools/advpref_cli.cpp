// advpref command-line front end. Talks to the engine only through the C API.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "advpref/advpref.h"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string data;
  std::vector<std::string> sets;
  long long seed = -1;
  std::string pipeline;
  std::string lambda_adv;
  std::string alpha;
  std::string mode;
  bool resume = false;
};

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
  sub->add_option("--config", c.config, "config file (key = value lines)")->check(CLI::ExistingFile);
  auto* out = sub->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  sub->add_option("--data", c.data, "data directory written by generate-data");
  sub->add_option("--set", c.sets, "extra config override, key=value (repeatable)");
  sub->add_option("--seed", c.seed, "training seed")->check(CLI::NonNegativeNumber);
  sub->add_option("--pipeline", c.pipeline, "stages, e.g. \"A-SFT->A-GRPO\"");
  sub->add_option("--lambda-adv", c.lambda_adv, "adversarial weight");
  sub->add_option("--alpha", c.alpha, "imitation weight of the unified objective");
  sub->add_option("--mode", c.mode, "reward mode: rlvr | rlvr_plus_raw | rlvr_plus_coef");
  sub->add_flag("--resume", c.resume, "continue from the last completed stage checkpoint");
}

int fail(int code) {
  std::cerr << "error: " << advpref_last_error() << "\n";
  return code;
}

// Builds the config handle from --config plus flag overrides.
int make_config(const Common& c, advpref_config** cfg) {
  int rc = c.config.empty() ? advpref_config_new(cfg) : advpref_config_load(c.config.c_str(), cfg);
  if (rc) return rc;
  std::vector<std::pair<std::string, std::string>> kv;
  if (c.seed >= 0) kv.emplace_back("seed", std::to_string(c.seed));
  if (!c.pipeline.empty()) kv.emplace_back("pipeline", c.pipeline);
  if (!c.lambda_adv.empty()) kv.emplace_back("lambda_adv", c.lambda_adv);
  if (!c.alpha.empty()) kv.emplace_back("alpha", c.alpha);
  if (!c.mode.empty()) kv.emplace_back("reward_mode", c.mode);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << s << "'\n";
      advpref_config_free(*cfg);
      *cfg = nullptr;
      return ADVPREF_ERR_USAGE;
    }
    kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : kv) {
    if ((rc = advpref_config_set(*cfg, k.c_str(), v.c_str()))) {
      advpref_config_free(*cfg);
      *cfg = nullptr;
      return rc;
    }
  }
  return ADVPREF_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"advpref: adversarial preference-learning engine for tabular policies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", advpref_version());

  Common gen_c, train_c, eval_c, abl_c, rep_c;
  std::string checkpoint;
  std::vector<double> lambdas;
  std::vector<std::string> modes;
  std::vector<std::string> runs;
  std::string report_out;
  int stop_after = -1;

  auto* gen = app.add_subcommand("generate-data", "synthesize datasets, teacher and manifest");
  add_common(gen, gen_c);
  auto* tr = app.add_subcommand("train", "run a training pipeline");
  add_common(tr, train_c);
  tr->add_option("--stop-after-stage", stop_after, "stop once this stage index has finished");
  auto* ev = app.add_subcommand("evaluate", "evaluate a policy checkpoint");
  add_common(ev, eval_c);
  ev->add_option("--checkpoint", checkpoint, "policy file")->required();
  auto* ab = app.add_subcommand("ablate", "sweep lambda_adv and reward modes");
  add_common(ab, abl_c);
  ab->add_option("--lambdas", lambdas, "lambda_adv grid")->delimiter(',');
  ab->add_option("--modes", modes, "rlvr, rlvr_plus_raw, rlvr_plus_coef, separate")->delimiter(',');
  auto* rp = app.add_subcommand("report", "join run directories into one comparison CSV");
  rp->add_option("runs", runs, "run directories")->required();
  rp->add_option("--out", report_out, "CSV path (default: stdout only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ADVPREF_ERR_USAGE;
  }

  if (rp->parsed()) {
    std::vector<const char*> ptrs;
    for (const auto& r : runs) ptrs.push_back(r.c_str());
    if (int rc = advpref_report(ptrs.data(), ptrs.size(), report_out.c_str())) return fail(rc);
    if (report_out.empty()) std::cerr << "note: pass --out to keep the table\n";
    else std::cout << "wrote " << report_out << "\n";
    return 0;
  }

  const Common& c = gen->parsed() ? gen_c : tr->parsed() ? train_c : ev->parsed() ? eval_c : abl_c;
  advpref_config* cfg = nullptr;
  if (int rc = make_config(c, &cfg)) return advpref_last_error()[0] ? fail(rc) : rc;

  int rc = 0;
  if (gen->parsed()) {
    rc = advpref_generate_data(cfg, c.out.c_str());
  } else if (tr->parsed()) {
    rc = advpref_train(cfg, c.out.c_str(), c.data.c_str(), c.resume ? 1 : 0, stop_after);
  } else if (ev->parsed()) {
    if (c.data.empty()) {
      std::cerr << "error: evaluate needs --data\n";
      advpref_config_free(cfg);
      return ADVPREF_ERR_USAGE;
    }
    rc = advpref_evaluate(cfg, checkpoint.c_str(), c.data.c_str(), c.out.c_str());
  } else {
    if (lambdas.empty()) {
      char buf[64];
      size_t n = 0;
      advpref_config_get(cfg, "lambda_adv", buf, sizeof buf, &n);
      lambdas.push_back(std::stod(buf));
    }
    if (modes.empty()) modes.push_back("separate");
    std::vector<const char*> mp;
    for (const auto& m : modes) mp.push_back(m.c_str());
    rc = advpref_ablate(cfg, lambdas.data(), lambdas.size(), mp.data(), mp.size(), c.out.c_str(), c.data.c_str());
  }
  advpref_config_free(cfg);
  if (rc) return fail(rc);
  std::cout << "wrote " << c.out << "\n";
  return 0;
}
