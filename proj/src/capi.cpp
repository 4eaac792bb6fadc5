#include "advpref/advpref.h"

#include <cstring>
#include <exception>
#include <string>

#include "advpref/config.hpp"
#include "advpref/disc.hpp"
#include "advpref/error.hpp"
#include "advpref/policy.hpp"
#include "advpref/runner.hpp"
#include "advpref/verify.hpp"
#include "json.hpp"

struct advpref_config {
  advpref::RawConfig raw;
  advpref::TrainingConfig resolved;
};

struct advpref_policy {
  advpref::PolicyParams params;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
int guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return ADVPREF_OK;
  } catch (const advpref::Error& e) {
    g_last_error = e.what();
    return e.exit_code();
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ADVPREF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ADVPREF_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw advpref::UsageError(std::string(what) + " must not be null");
}

std::string str(const char* s) { return s ? s : ""; }

int copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buf && cap > 0) {
    const size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return ADVPREF_OK;
}

}  // namespace

extern "C" {

const char* advpref_version(void) { return "0.1.0"; }

const char* advpref_last_error(void) { return g_last_error.c_str(); }

int advpref_config_new(advpref_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new advpref_config{{}, advpref::validate_config({})};
  });
}

int advpref_config_load(const char* path, advpref_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto raw = advpref::load_config_file(path);
    auto resolved = advpref::validate_config(raw);
    *out = new advpref_config{std::move(raw), std::move(resolved)};
  });
}

int advpref_config_set(advpref_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    auto raw = cfg->raw;
    raw[key] = value;
    cfg->resolved = advpref::validate_config(raw);
    cfg->raw = std::move(raw);
  });
}

int advpref_config_get(const advpref_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    const auto all = advpref::parse_config_text(advpref::config_to_text(cfg->resolved));
    const auto it = all.find(key);
    if (it == all.end()) throw advpref::ConfigError(key, "unknown config key");
    copy_out(it->second, buf, cap, needed);
  });
}

int advpref_config_dump(const advpref_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    need(cfg, "cfg");
    copy_out(advpref::config_to_text(cfg->resolved), buf, cap, needed);
  });
}

void advpref_config_free(advpref_config* cfg) { delete cfg; }

int advpref_generate_data(const advpref_config* cfg, const char* out_dir) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out_dir, "out_dir");
    advpref::generate_data(cfg->resolved, out_dir);
  });
}

int advpref_train(const advpref_config* cfg, const char* out_dir, const char* data_dir, int resume,
                  int stop_after_stage) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out_dir, "out_dir");
    advpref::train(cfg->resolved, {out_dir, str(data_dir), resume != 0, stop_after_stage});
  });
}

int advpref_evaluate(const advpref_config* cfg, const char* policy_path, const char* data_dir, const char* out_dir) {
  return guarded([&] {
    need(cfg, "cfg");
    need(policy_path, "policy_path");
    need(data_dir, "data_dir");
    need(out_dir, "out_dir");
    advpref::evaluate_checkpoint(cfg->resolved, policy_path, data_dir, out_dir);
  });
}

int advpref_ablate(const advpref_config* cfg, const double* lambdas, size_t n_lambdas, const char* const* modes,
                   size_t n_modes, const char* out_dir, const char* data_dir) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out_dir, "out_dir");
    if (n_lambdas > 0) need(lambdas, "lambdas");
    if (n_modes > 0) need(modes, "modes");
    std::vector<double> ls(lambdas, lambdas + n_lambdas);
    std::vector<std::string> ms;
    for (size_t i = 0; i < n_modes; ++i) ms.push_back(str(modes[i]));
    advpref::ablate(cfg->resolved, ls, ms, out_dir, str(data_dir));
  });
}

int advpref_report(const char* const* run_dirs, size_t n_runs, const char* out_csv) {
  return guarded([&] {
    if (n_runs > 0) need(run_dirs, "run_dirs");
    std::vector<std::string> dirs;
    for (size_t i = 0; i < n_runs; ++i) dirs.push_back(str(run_dirs[i]));
    advpref::report(dirs, str(out_csv));
  });
}

int advpref_policy_load(const char* path, advpref_policy** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new advpref_policy{advpref::load_policy(path)};
  });
}

int advpref_policy_save(const advpref_policy* p, const char* path) {
  return guarded([&] {
    need(p, "policy");
    need(path, "path");
    advpref::save_policy(path, p->params);
  });
}

int advpref_policy_vocab_size(const advpref_policy* p, size_t* out) {
  return guarded([&] {
    need(p, "policy");
    need(out, "out");
    *out = p->params.vocab().size();
  });
}

int advpref_policy_num_states(const advpref_policy* p, size_t* out) {
  return guarded([&] {
    need(p, "policy");
    need(out, "out");
    *out = p->params.num_states();
  });
}

int advpref_policy_sequence_logprob(const advpref_policy* p, const int32_t* prompt, size_t prompt_len,
                                    const int32_t* response, size_t response_len, double* out) {
  return guarded([&] {
    need(p, "policy");
    need(out, "out");
    if (prompt_len > 0) need(prompt, "prompt");
    if (response_len > 0) need(response, "response");
    advpref::Sequence x{std::vector<advpref::Token>(prompt, prompt + prompt_len)};
    advpref::Sequence y{std::vector<advpref::Token>(response, response + response_len)};
    advpref::validate_sequence(x, p->params.vocab(), "prompt");
    advpref::validate_sequence(y, p->params.vocab(), "response");
    *out = advpref::sequence_logprob(p->params, x, y);
  });
}

void advpref_policy_free(advpref_policy* p) { delete p; }

double advpref_coef_transform(double r) { return advpref::coef_transform(r); }

int advpref_check_text(const char* constraint_json, const char* text, int* passes) {
  return guarded([&] {
    need(constraint_json, "constraint_json");
    need(text, "text");
    need(passes, "passes");
    const auto j = nlohmann::json::parse(constraint_json, nullptr, false);
    if (j.is_discarded()) throw advpref::ParseError(1, "constraint is not valid JSON");
    *passes = advpref::check(text, advpref::constraint_from_json(j)) ? 1 : 0;
  });
}

}  // extern "C"
