#include "advpref/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "advpref/error.hpp"
#include "advpref/rng.hpp"
#include "json.hpp"

namespace advpref {

long long Histogram::total() const {
  long long t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::string Histogram::to_csv() const {
  std::string out = "bin,count\n";
  char buf[64];
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", lo + width * static_cast<double>(i));
    out += std::string(buf) + "," + std::to_string(counts[i]) + "\n";
  }
  return out;
}

long long LengthHistogram::total() const {
  long long t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::string LengthHistogram::to_csv() const {
  std::string out = "bin,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) out += std::to_string(i) + "," + std::to_string(counts[i]) + "\n";
  return out;
}

void EvalReport::check_consistency() const {
  if (length_histogram.total() != sample_count)
    throw ValidationError("length histogram total differs from sample count");
  if (sample_count > 0 && std::abs(pass_rate - static_cast<double>(passes) / sample_count) > 1e-12)
    throw ValidationError("pass rate differs from recounted passes");
  if (logp_gap.histogram.total() != static_cast<long long>(logp_gap.gaps.size()))
    throw ValidationError("gap histogram total differs from gap count");
  if (pass_rate < 0.0 || pass_rate > 1.0) throw ValidationError("pass rate outside [0, 1]");
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["pass_rate"] = pass_rate;
  j["passes"] = passes;
  j["sample_count"] = sample_count;
  j["seed"] = seed;
  j["length_histogram"] = length_histogram.counts;
  j["logp_gap"] = {{"mean", logp_gap.mean},
                   {"std", logp_gap.std},
                   {"mean_per_token", logp_gap.mean_per_token},
                   {"count", logp_gap.gaps.size()},
                   {"histogram_lo", logp_gap.histogram.lo},
                   {"histogram_width", logp_gap.histogram.width},
                   {"histogram", logp_gap.histogram.counts}};
  return j.dump(2) + "\n";
}

PassCount count_passes(const PolicyParams& params, const std::vector<ExampleRecord>& records, int n_samples_per_prompt,
                       int max_len, Rng& rng) {
  const Detokenizer detok(params.vocab_ptr());
  PassCount pc;
  for (const auto& r : records) {
    for (int i = 0; i < n_samples_per_prompt; ++i) {
      const auto y = sample_response(params, r.prompt, max_len, rng);
      pc.passes += verifiable_reward(y, r.constraints, detok);
      ++pc.samples;
    }
  }
  return pc;
}

double evaluate_pass_rate(const PolicyParams& params, const std::vector<ExampleRecord>& records,
                          int n_samples_per_prompt, int max_len, Rng& rng) {
  return count_passes(params, records, n_samples_per_prompt, max_len, rng).rate();
}

LengthHistogram length_distribution(const PolicyParams& params, const std::vector<Sequence>& prompts, int n,
                                    int max_len, Rng& rng) {
  LengthHistogram h;
  h.counts.assign(static_cast<std::size_t>(max_len) + 1, 0);
  for (const auto& p : prompts)
    for (int i = 0; i < n; ++i) ++h.counts[sample_response(params, p, max_len, rng).size()];
  return h;
}

double total_variation(const LengthHistogram& a, const LengthHistogram& b) {
  const double ta = static_cast<double>(a.total());
  const double tb = static_cast<double>(b.total());
  if (ta == 0.0 || tb == 0.0) throw ContractError("total_variation: empty histogram");
  const std::size_t n = std::max(a.counts.size(), b.counts.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pa = i < a.counts.size() ? a.counts[i] / ta : 0.0;
    const double pb = i < b.counts.size() ? b.counts[i] / tb : 0.0;
    tv += std::abs(pa - pb);
  }
  return 0.5 * tv;
}

std::vector<ScoredResponse> teacher_response_set(const PolicyParams& teacher, const std::vector<Sequence>& prompts,
                                                 int count, int max_len, Rng& rng) {
  if (prompts.empty()) throw ContractError("teacher_response_set: no prompts");
  std::vector<ScoredResponse> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto& p = prompts[static_cast<std::size_t>(i) % prompts.size()];
    out.push_back({p, sample_response(teacher, p, max_len, rng)});
  }
  return out;
}

GapStats logp_divergence(const PolicyParams& student, const PolicyParams& teacher,
                         const std::vector<ScoredResponse>& responses, int bins) {
  GapStats st;
  double per_token = 0.0;
  for (const auto& r : responses) {
    const double gap = sequence_logprob(student, r.prompt, r.response) - sequence_logprob(teacher, r.prompt, r.response);
    st.gaps.push_back(gap);
    per_token += gap / static_cast<double>(std::max<std::size_t>(1, r.response.size()));
  }
  const double n = static_cast<double>(st.gaps.size());
  if (n == 0) return st;
  for (double g : st.gaps) st.mean += g;
  st.mean /= n;
  double var = 0.0;
  for (double g : st.gaps) var += (g - st.mean) * (g - st.mean);
  st.std = std::sqrt(var / n);
  st.mean_per_token = per_token / n;

  const auto [mn, mx] = std::minmax_element(st.gaps.begin(), st.gaps.end());
  st.histogram.lo = *mn;
  st.histogram.width = *mx > *mn ? (*mx - *mn) / bins : 1.0;
  st.histogram.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double g : st.gaps) {
    auto b = static_cast<std::size_t>((g - st.histogram.lo) / st.histogram.width);
    ++st.histogram.counts[std::min(b, static_cast<std::size_t>(bins) - 1)];
  }
  return st;
}

EvalReport evaluate(const PolicyParams& params, const PolicyParams& teacher, const std::vector<ExampleRecord>& records,
                    int n_samples_per_prompt, int gap_samples, int bins, int max_len, std::uint64_t seed) {
  EvalReport rep;
  rep.seed = seed;
  Rng pass_rng = seeded_rng(seed, "eval/pass");
  const Detokenizer detok(params.vocab_ptr());
  rep.length_histogram.counts.assign(static_cast<std::size_t>(max_len) + 1, 0);
  for (const auto& r : records) {
    for (int i = 0; i < n_samples_per_prompt; ++i) {
      const auto y = sample_response(params, r.prompt, max_len, pass_rng);
      rep.passes += verifiable_reward(y, r.constraints, detok);
      ++rep.length_histogram.counts[y.size()];
      ++rep.sample_count;
    }
  }
  rep.pass_rate = rep.sample_count ? static_cast<double>(rep.passes) / rep.sample_count : 0.0;
  std::vector<Sequence> prompts;
  for (const auto& r : records) prompts.push_back(r.prompt);
  if (!prompts.empty()) {
    Rng gap_rng = seeded_rng(seed, "eval/gap");
    const auto set = teacher_response_set(teacher, prompts, gap_samples, max_len, gap_rng);
    rep.logp_gap = logp_divergence(params, teacher, set, bins);
  }
  rep.check_consistency();
  return rep;
}

}  // namespace advpref
