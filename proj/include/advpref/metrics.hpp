#pragma once

#include <map>
#include <string>
#include <vector>

#include "advpref/dataset.hpp"
#include "advpref/policy.hpp"

namespace advpref {

struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<long long> counts;

  long long total() const;
  std::string to_csv() const;  // "bin_lo,count" rows
};

// Counts of sampled response lengths; bin i holds length i (eos included).
struct LengthHistogram {
  std::vector<long long> counts;
  long long total() const;
  std::string to_csv() const;
};

struct GapStats {
  double mean = 0.0;
  double std = 0.0;
  double mean_per_token = 0.0;
  std::vector<double> gaps;
  Histogram histogram;
};

struct EvalReport {
  double pass_rate = 0.0;
  long long passes = 0;
  long long sample_count = 0;
  LengthHistogram length_histogram;
  GapStats logp_gap;
  std::uint64_t seed = 0;

  // Throws ValidationError when counts disagree.
  void check_consistency() const;
  std::string to_json() const;
};

struct PassCount {
  long long passes = 0;
  long long samples = 0;
  double rate() const { return samples ? static_cast<double>(passes) / samples : 0.0; }
};

PassCount count_passes(const PolicyParams& params, const std::vector<ExampleRecord>& records, int n_samples_per_prompt,
                       int max_len, Rng& rng);
double evaluate_pass_rate(const PolicyParams& params, const std::vector<ExampleRecord>& records,
                          int n_samples_per_prompt, int max_len, Rng& rng);

LengthHistogram length_distribution(const PolicyParams& params, const std::vector<Sequence>& prompts, int n,
                                    int max_len, Rng& rng);
// Total variation distance between the normalized histograms.
double total_variation(const LengthHistogram& a, const LengthHistogram& b);

struct ScoredResponse {
  Sequence prompt;
  Sequence response;
};

// Responses sampled from the teacher on the given prompts (round robin).
std::vector<ScoredResponse> teacher_response_set(const PolicyParams& teacher, const std::vector<Sequence>& prompts,
                                                 int count, int max_len, Rng& rng);

// Per-response total logp(student) - logp(teacher), summary stats and a
// histogram with `bins` equal-width bins over the observed range.
GapStats logp_divergence(const PolicyParams& student, const PolicyParams& teacher,
                         const std::vector<ScoredResponse>& responses, int bins = 20);

EvalReport evaluate(const PolicyParams& params, const PolicyParams& teacher, const std::vector<ExampleRecord>& records,
                    int n_samples_per_prompt, int gap_samples, int bins, int max_len, std::uint64_t seed);

}  // namespace advpref
