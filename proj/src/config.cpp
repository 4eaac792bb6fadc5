#include "advpref/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "advpref/error.hpp"

namespace advpref {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key, "expected a finite number, got '" + v + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true|false, got '" + v + "'");
}

struct Field {
  std::function<void(TrainingConfig&, const std::string&)> set;
  std::function<std::string(const TrainingConfig&)> get;
};

// Numeric field with an inclusive/exclusive range check.
enum class Bound { Any, Positive, NonNegative, Unit, UnitOrAuto };

void check_bound(const std::string& key, double x, Bound b) {
  switch (b) {
    case Bound::Any: break;
    case Bound::Positive:
      if (!(x > 0.0)) throw ConfigError(key, "must be > 0");
      break;
    case Bound::NonNegative:
      if (!(x >= 0.0)) throw ConfigError(key, "must be >= 0");
      break;
    case Bound::Unit:
      if (!(x >= 0.0 && x <= 1.0)) throw ConfigError(key, "must lie in [0, 1]");
      break;
    case Bound::UnitOrAuto:
      if (!(x == -1.0 || (x >= 0.0 && x <= 1.0))) throw ConfigError(key, "must lie in [0, 1] or be -1 (follow alpha)");
      break;
  }
}

template <typename Get>
Field real_field(const std::string& key, Get access, Bound b) {
  return {[key, access, b](TrainingConfig& c, const std::string& v) {
            const double x = parse_double(key, v);
            check_bound(key, x, b);
            access(c) = x;
          },
          [access](const TrainingConfig& c) {
            return fmt_double(access(c));
          }};
}

template <typename Get>
Field int_field(const std::string& key, Get access, long long lo, long long hi) {
  return {[key, access, lo, hi](TrainingConfig& c, const std::string& v) {
            const long long x = parse_int(key, v);
            if (x < lo || x > hi)
              throw ConfigError(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
            access(c) = static_cast<int>(x);
          },
          [access](const TrainingConfig& c) {
            return std::to_string(access(c));
          }};
}

template <typename Get>
Field list_field(const std::string& key, Get access, bool allow_empty) {
  return {[key, access, allow_empty](TrainingConfig& c, const std::string& v) {
            auto items = split(v, ',');
            if (!allow_empty && items.empty()) throw ConfigError(key, "list must be nonempty");
            for (const auto& it : items)
              if (it.find_first_of(" \t") != std::string::npos)
                throw ConfigError(key, "list items may not contain whitespace");
            access(c) = std::move(items);
          },
          [access](const TrainingConfig& c) {
            const auto& items = access(c);
            std::string out;
            for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
            return out;
          }};
}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    using C = TrainingConfig;
    f["alpha"] = real_field("alpha", [](auto& c) -> auto& { return c.alpha; }, Bound::Unit);
    f["lambda_adv"] = real_field("lambda_adv", [](auto& c) -> auto& { return c.lambda_adv; }, Bound::NonNegative);
    f["beta_kl"] = real_field("beta_kl", [](auto& c) -> auto& { return c.beta_kl; }, Bound::NonNegative);
    f["beta_dpo"] = real_field("beta_dpo", [](auto& c) -> auto& { return c.beta_dpo; }, Bound::Positive);
    f["group_size"] = int_field("group_size", [](auto& c) -> auto& { return c.group_size; }, 2, 1 << 16);
    f["clip_eps"] = real_field("clip_eps", [](auto& c) -> auto& { return c.clip_eps; }, Bound::Positive);
    f["lr_sft"] = real_field("lr_sft", [](auto& c) -> auto& { return c.lr_sft; }, Bound::Positive);
    f["lr_rl"] = real_field("lr_rl", [](auto& c) -> auto& { return c.lr_rl; }, Bound::Positive);
    f["lr_unified"] = real_field("lr_unified", [](auto& c) -> auto& { return c.lr_unified; }, Bound::Positive);
    f["std_eps"] = real_field("std_eps", [](auto& c) -> auto& { return c.std_eps; }, Bound::Positive);
    f["seed"] = {[](C& c, const std::string& v) {
                   const long long x = parse_int("seed", v);
                   if (x < 0) throw ConfigError("seed", "must be >= 0");
                   c.seed = static_cast<std::uint64_t>(x);
                 },
                 [](const C& c) { return std::to_string(c.seed); }};
    f["constraint_tol"] = real_field("constraint_tol", [](auto& c) -> auto& { return c.constraint_tol; }, Bound::Positive);
    f["batch_size"] = int_field("batch_size", [](auto& c) -> auto& { return c.batch_size; }, 1, 1 << 20);
    f["sft_fraction"] = real_field("sft_fraction", [](auto& c) -> auto& { return c.sft_fraction; }, Bound::UnitOrAuto);
    f["steps"] = int_field("steps", [](auto& c) -> auto& { return c.steps; }, 1, 1 << 30);
    f["max_len"] = int_field("max_len", [](auto& c) -> auto& { return c.max_len; }, 1, 64);
    f["context_order"] = int_field("context_order", [](auto& c) -> auto& { return c.context_order; }, 1, 4);
    f["init_scale"] = real_field("init_scale", [](auto& c) -> auto& { return c.init_scale; }, Bound::NonNegative);
    f["loss_aversion"] = {[](C& c, const std::string& v) {
                            const double x = parse_double("loss_aversion", v);
                            if (!(x >= 1.0)) throw ConfigError("loss_aversion", "must be >= 1");
                            c.loss_aversion = x;
                          },
                          [](const C& c) { return fmt_double(c.loss_aversion); }};
    f["reward_mode"] = {[](C& c, const std::string& v) { c.reward_mode = parse_reward_mode(v); },
                        [](const C& c) { return to_string(c.reward_mode); }};
    f["diag_every"] = int_field("diag_every", [](auto& c) -> auto& { return c.diag_every; }, 1, 1 << 30);
    f["diag_prompts"] = int_field("diag_prompts", [](auto& c) -> auto& { return c.diag_prompts; }, 1, 1 << 20);
    f["pipeline"] = {[](C& c, const std::string& v) {
                       if (v.empty()) throw ConfigError("pipeline", "must be nonempty");
                       c.pipeline = v;
                     },
                     [](const C& c) { return c.pipeline; }};

    f["disc.kind"] = {[](C& c, const std::string& v) {
                        if (v == "loglik") c.disc.kind = DiscKindTag::LogLikelihood;
                        else if (v == "feature") c.disc.kind = DiscKindTag::FeatureDistance;
                        else throw ConfigError("disc.kind", "expected loglik|feature, got '" + v + "'");
                      },
                      [](const C& c) {
                        return std::string(c.disc.kind == DiscKindTag::LogLikelihood ? "loglik" : "feature");
                      }};
    f["disc.scale"] = real_field("disc.scale", [](auto& c) -> auto& { return c.disc.scale; }, Bound::Positive);
    f["disc.anchored"] = {[](C& c, const std::string& v) { c.disc.anchored = parse_bool("disc.anchored", v); },
                          [](const C& c) { return std::string(c.disc.anchored ? "true" : "false"); }};
    f["disc.length_weight"] = real_field("disc.length_weight", [](auto& c) -> auto& { return c.disc.length_weight; }, Bound::NonNegative);
    f["disc.count_weight"] = real_field("disc.count_weight", [](auto& c) -> auto& { return c.disc.count_weight; }, Bound::NonNegative);

    f["task.words"] = list_field("task.words", [](auto& c) -> auto& { return c.task.words; }, false);
    f["task.keyword_words"] = list_field("task.keyword_words", [](auto& c) -> auto& { return c.task.keyword_words; }, true);
    f["task.forbidden_words"] = list_field("task.forbidden_words", [](auto& c) -> auto& { return c.task.forbidden_words; }, true);
    f["task.length_ranges"] = {[](C& c, const std::string& v) {
                                 std::vector<std::pair<int, int>> out;
                                 for (const auto& item : split(v, ',')) {
                                   const auto dash = item.find('-');
                                   if (dash == std::string::npos)
                                     throw ConfigError("task.length_ranges", "expected min-max, got '" + item + "'");
                                   const auto lo = parse_int("task.length_ranges", item.substr(0, dash));
                                   const auto hi = parse_int("task.length_ranges", item.substr(dash + 1));
                                   if (lo < 0 || lo > hi)
                                     throw ConfigError("task.length_ranges", "need 0 <= min <= max in '" + item + "'");
                                   out.emplace_back(static_cast<int>(lo), static_cast<int>(hi));
                                 }
                                 c.task.length_ranges = std::move(out);
                               },
                               [](const C& c) {
                                 std::string out;
                                 for (std::size_t i = 0; i < c.task.length_ranges.size(); ++i)
                                   out += (i ? "," : "") + std::to_string(c.task.length_ranges[i].first) + "-" +
                                          std::to_string(c.task.length_ranges[i].second);
                                 return out;
                               }};
    auto word = [](const std::string& key, std::string TaskSpec::*m) {
      return Field{[key, m](C& c, const std::string& v) {
                     if (v.empty() || v.find_first_of(" \t") != std::string::npos)
                       throw ConfigError(key, "expected a single word");
                     c.task.*m = v;
                   },
                   [m](const C& c) { return c.task.*m; }};
    };
    f["task.placeholder_word"] = word("task.placeholder_word", &TaskSpec::placeholder_word);
    f["task.divider_word"] = word("task.divider_word", &TaskSpec::divider_word);
    f["task.placeholder_n"] = int_field("task.placeholder_n", [](auto& c) -> auto& { return c.task.placeholder_n; }, 1, 64);
    f["task.paragraph_n"] = int_field("task.paragraph_n", [](auto& c) -> auto& { return c.task.paragraph_n; }, 1, 64);
    f["task.w_keyword"] = real_field("task.w_keyword", [](auto& c) -> auto& { return c.task.w_keyword; }, Bound::NonNegative);
    f["task.w_palindrome"] = real_field("task.w_palindrome", [](auto& c) -> auto& { return c.task.w_palindrome; }, Bound::NonNegative);
    f["task.w_length"] = real_field("task.w_length", [](auto& c) -> auto& { return c.task.w_length; }, Bound::NonNegative);
    f["task.w_forbidden"] = real_field("task.w_forbidden", [](auto& c) -> auto& { return c.task.w_forbidden; }, Bound::NonNegative);
    f["task.w_placeholders"] = real_field("task.w_placeholders", [](auto& c) -> auto& { return c.task.w_placeholders; }, Bound::NonNegative);
    f["task.w_paragraphs"] = real_field("task.w_paragraphs", [](auto& c) -> auto& { return c.task.w_paragraphs; }, Bound::NonNegative);
    f["task.max_constraints"] = int_field("task.max_constraints", [](auto& c) -> auto& { return c.task.max_constraints; }, 1, 4);
    f["task.n_sft"] = int_field("task.n_sft", [](auto& c) -> auto& { return c.task.n_sft; }, 0, 1 << 24);
    f["task.n_pref"] = int_field("task.n_pref", [](auto& c) -> auto& { return c.task.n_pref; }, 0, 1 << 24);
    f["task.n_eval"] = int_field("task.n_eval", [](auto& c) -> auto& { return c.task.n_eval; }, 0, 1 << 24);
    f["task.attempts_per_record"] = int_field("task.attempts_per_record", [](auto& c) -> auto& { return c.task.attempts_per_record; }, 1, 1 << 16);
    f["task.seed"] = {[](C& c, const std::string& v) {
                        const long long x = parse_int("task.seed", v);
                        if (x < 0) throw ConfigError("task.seed", "must be >= 0");
                        c.task.seed = static_cast<std::uint64_t>(x);
                      },
                      [](const C& c) { return std::to_string(c.task.seed); }};

    f["teacher.mode"] = {[](C& c, const std::string& v) {
                           if (v == "handbuilt") c.teacher.mode = TeacherMode::HandBuilt;
                           else if (v == "trained") c.teacher.mode = TeacherMode::Trained;
                           else throw ConfigError("teacher.mode", "expected handbuilt|trained, got '" + v + "'");
                         },
                         [](const C& c) {
                           return std::string(c.teacher.mode == TeacherMode::HandBuilt ? "handbuilt" : "trained");
                         }};
    f["teacher.p_sat"] = {[](C& c, const std::string& v) {
                            const double x = parse_double("teacher.p_sat", v);
                            if (!(x > 0.0 && x <= 1.0)) throw ConfigError("teacher.p_sat", "must lie in (0, 1]");
                            c.teacher.p_sat = x;
                          },
                          [](const C& c) { return fmt_double(c.teacher.p_sat); }};
    f["teacher.samples"] = int_field("teacher.samples", [](auto& c) -> auto& { return c.teacher.samples; }, 1, 1 << 24);
    f["teacher.train_budget"] = int_field("teacher.train_budget", [](auto& c) -> auto& { return c.teacher.train_budget; }, 1, 1 << 24);

    f["eval.samples_per_prompt"] = int_field("eval.samples_per_prompt", [](auto& c) -> auto& { return c.eval.samples_per_prompt; }, 1, 1 << 20);
    f["eval.gap_samples"] = int_field("eval.gap_samples", [](auto& c) -> auto& { return c.eval.gap_samples; }, 1, 1 << 24);
    f["eval.histogram_bins"] = int_field("eval.histogram_bins", [](auto& c) -> auto& { return c.eval.histogram_bins; }, 1, 1 << 16);
    return f;
  }();
  return fields;
}

}  // namespace

std::string to_string(RewardMode m) {
  switch (m) {
    case RewardMode::Rlvr: return "rlvr";
    case RewardMode::RlvrPlusRaw: return "rlvr_plus_raw";
    case RewardMode::RlvrPlusCoef: return "rlvr_plus_coef";
  }
  return "rlvr";
}

RewardMode parse_reward_mode(const std::string& s) {
  if (s == "rlvr") return RewardMode::Rlvr;
  if (s == "rlvr_plus_raw") return RewardMode::RlvrPlusRaw;
  if (s == "rlvr_plus_coef") return RewardMode::RlvrPlusCoef;
  throw ConfigError("reward_mode", "expected rlvr|rlvr_plus_raw|rlvr_plus_coef, got '" + s + "'");
}

TrainingConfig validate_config(const RawConfig& raw) {
  TrainingConfig cfg;
  const auto& fields = registry();
  for (const auto& [key, value] : raw) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(key, "unknown configuration key");
    it->second.set(cfg, trim(value));
  }
  if (!raw.contains("task.seed")) cfg.task.seed = cfg.seed;
  cfg.task.max_len = cfg.max_len;

  const auto& t = cfg.task;
  if (t.w_keyword + t.w_palindrome + t.w_length + t.w_forbidden + t.w_placeholders + t.w_paragraphs <= 0.0)
    throw ConfigError("task.w_keyword", "constraint family weights are all zero");
  return cfg;
}

RawConfig parse_config_text(const std::string& text) {
  RawConfig out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(lineno, "empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

RawConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_text(const TrainingConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : registry()) out += key + " = " + field.get(cfg) + "\n";
  return out;
}

}  // namespace advpref
