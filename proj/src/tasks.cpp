#include "advpref/tasks.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "advpref/error.hpp"
#include "advpref/loss.hpp"

namespace advpref {
namespace {

enum Family { kKeyword = 0, kPalindrome, kLength, kForbidden, kPlaceholders, kParagraphs, kNumFamilies };

std::string combo_name(const std::vector<ConstraintSpec>& cs) {
  std::string s = "{";
  for (std::size_t i = 0; i < cs.size(); ++i) s += (i ? " + " : "") + describe(cs[i]);
  return s + "}";
}

}  // namespace

TaskLayout::TaskLayout(const TaskSpec& spec) : spec_(spec) {
  std::vector<std::string> symbols = spec_.words;
  if (symbols.empty()) throw ConfigError("task.words", "need at least one word");
  auto has_word = [&](const std::string& w) {
    return std::find(spec_.words.begin(), spec_.words.end(), w) != spec_.words.end();
  };
  const Token eos = static_cast<Token>(symbols.size());
  symbols.push_back("<eos>");

  auto add = [&](std::string symbol, ConstraintSpec c, int family, double weight) {
    validate_constraint(c);
    markers_.push_back(static_cast<Token>(symbols.size()));
    symbols.push_back(std::move(symbol));
    marker_specs_.push_back(std::move(c));
    marker_family_.push_back(family);
    marker_weight_.push_back(weight);
  };
  if (spec_.w_keyword > 0.0) {
    for (const auto& k : spec_.keyword_words) {
      if (!has_word(k)) throw ConfigError("task.keyword_words", "keyword '" + k + "' is not in task.words");
      add("<kw:" + k + ">", KeywordInclusion{{k}}, kKeyword, spec_.w_keyword / spec_.keyword_words.size());
    }
  }
  if (spec_.w_palindrome > 0.0) add("<pal>", PalindromeRequired{}, kPalindrome, spec_.w_palindrome);
  if (spec_.w_length > 0.0) {
    for (const auto& [lo, hi] : spec_.length_ranges)
      add("<len:" + std::to_string(lo) + "-" + std::to_string(hi) + ">", LengthRange{lo, hi}, kLength,
          spec_.w_length / spec_.length_ranges.size());
  }
  if (spec_.w_forbidden > 0.0) {
    for (const auto& f : spec_.forbidden_words) {
      if (std::find(spec_.keyword_words.begin(), spec_.keyword_words.end(), f) != spec_.keyword_words.end())
        throw ConfigError("task.forbidden_words", "'" + f + "' is also a keyword");
      add("<no:" + f + ">", ForbiddenWords{{f}}, kForbidden, spec_.w_forbidden / spec_.forbidden_words.size());
    }
  }
  if (spec_.w_placeholders > 0.0) {
    if (!has_word(spec_.placeholder_word))
      throw ConfigError("task.placeholder_word", "'" + spec_.placeholder_word + "' is not in task.words");
    add("<ph:" + std::to_string(spec_.placeholder_n) + ">", MinPlaceholders{spec_.placeholder_n, "[", "]"},
        kPlaceholders, spec_.w_placeholders);
  }
  if (spec_.w_paragraphs > 0.0) {
    if (!has_word(spec_.divider_word))
      throw ConfigError("task.divider_word", "'" + spec_.divider_word + "' is not in task.words");
    add("<para:" + std::to_string(spec_.paragraph_n) + ">", ParagraphCount{spec_.paragraph_n, spec_.divider_word},
        kParagraphs, spec_.w_paragraphs);
  }
  if (markers_.empty()) throw ConfigError("task.w_keyword", "no constraint family is enabled");
  try {
    vocab_ = std::make_shared<const Vocabulary>(std::move(symbols), eos);
  } catch (const ValidationError& e) {
    throw ConfigError("task.words", e.what());
  }
}

bool TaskLayout::is_marker(Token t) const noexcept {
  return std::find(markers_.begin(), markers_.end(), t) != markers_.end();
}

const ConstraintSpec& TaskLayout::constraint_of(Token marker) const {
  const auto it = std::find(markers_.begin(), markers_.end(), marker);
  if (it == markers_.end()) throw ValidationError("token " + std::to_string(marker) + " is not a prompt marker");
  return marker_specs_[static_cast<std::size_t>(it - markers_.begin())];
}

Token TaskLayout::marker_of(const ConstraintSpec& spec) const {
  for (std::size_t i = 0; i < marker_specs_.size(); ++i)
    if (marker_specs_[i] == spec) return markers_[i];
  throw ContractError("constraint " + describe(spec) + " has no prompt marker");
}

double TaskLayout::weight_of(Token marker) const {
  const auto it = std::find(markers_.begin(), markers_.end(), marker);
  if (it == markers_.end()) throw ContractError("not a marker");
  return marker_weight_[static_cast<std::size_t>(it - markers_.begin())];
}

Sequence TaskLayout::encode(const std::vector<ConstraintSpec>& constraints) const {
  Sequence s;
  for (const auto& c : constraints) s.tokens.push_back(marker_of(c));
  std::sort(s.tokens.begin(), s.tokens.end());
  return s;
}

std::vector<ConstraintSpec> TaskLayout::decode(const Sequence& prompt) const {
  std::vector<ConstraintSpec> out;
  for (Token t : prompt.tokens) out.push_back(constraint_of(t));
  return out;
}

std::vector<Sequence> TaskLayout::prompt_space() const {
  std::vector<Sequence> out;
  const int k_max = spec_.max_constraints;
  std::vector<std::size_t> pick;
  auto rec = [&](auto&& self, std::size_t start) -> void {
    if (!pick.empty()) {
      Sequence s;
      for (auto i : pick) s.tokens.push_back(markers_[i]);
      out.push_back(std::move(s));
    }
    if (static_cast<int>(pick.size()) == k_max) return;
    for (std::size_t i = start; i < markers_.size(); ++i) {
      const bool clash = std::any_of(pick.begin(), pick.end(),
                                     [&](std::size_t j) { return marker_family_[j] == marker_family_[i]; });
      if (clash) continue;
      pick.push_back(i);
      self(self, i + 1);
      pick.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

std::vector<Sequence> satisfying_responses(const TaskLayout& layout, const std::vector<ConstraintSpec>& constraints,
                                           std::size_t limit, std::size_t node_budget, int length_slack) {
  const Detokenizer detok(layout.vocab());
  const auto n_words = static_cast<Token>(layout.num_words());
  const int max_len = layout.spec().max_len;
  const Token eos = layout.vocab()->eos();
  std::vector<Sequence> hits;
  std::size_t nodes = 0;
  // L words; eos appended when L < max_len.
  for (int len = 0; len <= max_len; ++len) {
    if (!hits.empty() && static_cast<int>(strip_eos(hits.front(), *layout.vocab()).size()) + length_slack < len) break;
    std::vector<Token> words(static_cast<std::size_t>(len), 0);
    while (true) {
      if (++nodes > node_budget) return hits;
      Sequence y{words};
      if (len < max_len) y.tokens.push_back(eos);
      if (verifiable_reward(y, constraints, detok) == 1) {
        hits.push_back(std::move(y));
        if (hits.size() >= limit) return hits;
      }
      // Odometer increment.
      int pos = len - 1;
      while (pos >= 0 && ++words[static_cast<std::size_t>(pos)] == n_words) words[static_cast<std::size_t>(pos--)] = 0;
      if (pos < 0) break;
    }
  }
  return hits;
}

std::vector<ExampleRecord> generate_dataset(const TaskLayout& layout, int n, Rng& rng) {
  if (n < 0) throw ContractError("generate_dataset: negative size");
  if (n == 0) return {};
  for (const auto& prompt : layout.prompt_space()) {
    const auto cs = layout.decode(prompt);
    if (satisfying_responses(layout, cs, 1).empty())
      throw GenerationError("constraint combination " + combo_name(cs) + " has no satisfying response within max_len " +
                            std::to_string(layout.spec().max_len));
  }
  std::vector<ExampleRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  const auto& markers = layout.markers();
  const int k_max = std::min<int>(layout.spec().max_constraints, static_cast<int>(markers.size()));
  for (int i = 0; i < n; ++i) {
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k_max)));
    std::vector<ConstraintSpec> chosen;
    for (int c = 0; c < k; ++c) {
      std::vector<double> w;
      for (Token m : markers) {
        bool clash = false;
        for (const auto& prev : chosen)
          if (prev.index() == layout.constraint_of(m).index()) clash = true;
        w.push_back(clash ? 0.0 : layout.weight_of(m));
      }
      if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) break;
      chosen.push_back(layout.constraint_of(markers[rng.categorical(w)]));
    }
    ExampleRecord r;
    r.prompt = layout.encode(chosen);
    r.constraints = layout.decode(r.prompt);
    out.push_back(std::move(r));
  }
  return out;
}

double measure_pass_rate(const PolicyParams& policy, const TaskLayout& layout, int samples, Rng& rng) {
  const auto prompts = layout.prompt_space();
  const Detokenizer detok(layout.vocab());
  int passes = 0;
  for (int i = 0; i < samples; ++i) {
    const auto& prompt = prompts[rng.below(prompts.size())];
    const auto y = sample_response(policy, prompt, layout.spec().max_len, rng);
    passes += verifiable_reward(y, layout.decode(prompt), detok);
  }
  return samples > 0 ? static_cast<double>(passes) / samples : 0.0;
}

namespace {

// One target response per prompt, chosen so that prompts sharing a context
// state agree on the next token whenever possible.
std::vector<std::pair<Sequence, Sequence>> choose_targets(const TaskLayout& layout, const PolicyParams& shape,
                                                          Rng& rng) {
  std::map<std::size_t, Token> assigned;
  std::vector<std::pair<Sequence, Sequence>> targets;
  for (const auto& prompt : layout.prompt_space()) {
    auto cands = satisfying_responses(layout, layout.decode(prompt), 512, 3'000'000, 2);
    if (cands.empty()) continue;
    rng.shuffle(cands);
    std::size_t best = 0;
    std::size_t best_conflicts = SIZE_MAX;
    for (std::size_t c = 0; c < cands.size() && best_conflicts > 0; ++c) {
      // Clashes with earlier targets and with the candidate itself (a
      // revisited state that must emit a different token).
      std::size_t conflicts = 0;
      std::map<std::size_t, Token> own;
      for (std::size_t t = 0; t < cands[c].size(); ++t) {
        const auto s = shape.state_at(prompt.view(), cands[c].view(), t);
        const Token tok = cands[c].tokens[t];
        const auto it = assigned.find(s);
        if (it != assigned.end() && it->second != tok) ++conflicts;
        const auto [o, fresh] = own.emplace(s, tok);
        if (!fresh && o->second != tok) conflicts += 1000;
      }
      if (conflicts < best_conflicts) {
        best = c;
        best_conflicts = conflicts;
      }
    }
    const Sequence& y = cands[best];
    for (std::size_t t = 0; t < y.size(); ++t) assigned.emplace(shape.state_at(prompt.view(), y.view(), t), y.tokens[t]);
    targets.emplace_back(prompt, y);
  }
  return targets;
}

}  // namespace

TeacherBuild build_teacher(const TeacherSpec& spec, const TaskLayout& layout, int context_order, Rng& rng) {
  PolicyParams shape(layout.vocab(), context_order);
  const auto targets = choose_targets(layout, shape, rng);
  const std::uint64_t measure_seed = rng.next_u64();

  if (spec.mode == TeacherMode::HandBuilt) {
    // First-come assignment of each context state to a target token.
    std::map<std::size_t, Token> assigned;
    for (const auto& [prompt, y] : targets)
      for (std::size_t t = 0; t < y.size(); ++t)
        assigned.emplace(shape.state_at(prompt.view(), y.view(), t), y.tokens[t]);
    for (double margin = 1.0; margin <= 16.0; margin += 0.25) {
      PolicyParams p = shape;
      for (const auto& [s, tok] : assigned) p.logits().at(s, static_cast<std::size_t>(tok)) = margin;
      Rng m(measure_seed);
      const double rate = measure_pass_rate(p, layout, spec.samples, m);
      if (rate >= spec.p_sat) return {std::move(p), rate, margin, 0};
    }
    throw BuildError("hand-built teacher could not reach pass rate " + std::to_string(spec.p_sat));
  }

  std::vector<SftExample> demos;
  for (const auto& [prompt, y] : targets) demos.push_back({prompt, y});
  PolicyParams p = shape;
  constexpr double kLearningRate = 2.0;
  constexpr int kCheckEvery = 25;
  for (int step = 1; step <= spec.train_budget; ++step) {
    const LossValue lv = sft_loss(p, demos);
    p.logits().axpy(-kLearningRate, lv.gradient);
    if (step % kCheckEvery == 0 || step == spec.train_budget) {
      Rng m(measure_seed);
      const double rate = measure_pass_rate(p, layout, spec.samples, m);
      if (rate >= spec.p_sat) return {std::move(p), rate, 0.0, step};
    }
  }
  throw BuildError("trained teacher did not reach pass rate " + std::to_string(spec.p_sat) + " within " +
                   std::to_string(spec.train_budget) + " steps");
}

GtFilterResult make_gt_dataset(const std::vector<ExampleRecord>& records, const PolicyParams& teacher,
                               const Detokenizer& detok, int attempts, int max_len, Rng& rng) {
  std::vector<std::optional<Sequence>> candidates(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (int a = 0; a < attempts; ++a) {
      auto y = sample_response(teacher, records[i].prompt, max_len, rng);
      if (verifiable_reward(y, records[i].constraints, detok) == 1) {
        candidates[i] = std::move(y);
        break;
      }
    }
  }
  GtFilterResult out;
  out.records = filter_by_verifier(records, candidates, detok);
  out.retention = records.empty() ? 0.0 : static_cast<double>(out.records.size()) / records.size();
  return out;
}

void attach_teacher_responses(std::vector<ExampleRecord>& records, const PolicyParams& teacher, int max_len,
                              Rng& rng) {
  for (auto& r : records) r.teacher_response = sample_response(teacher, r.prompt, max_len, rng);
}

}  // namespace advpref
