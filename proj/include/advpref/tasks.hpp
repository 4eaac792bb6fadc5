#pragma once

#include <optional>
#include <string>
#include <vector>

#include "advpref/config.hpp"
#include "advpref/dataset.hpp"
#include "advpref/policy.hpp"

namespace advpref {

// Vocabulary and prompt-marker encoding derived from a TaskSpec. Symbols are
// laid out as: words, "<eos>", then one marker per enabled constraint.
class TaskLayout {
 public:
  explicit TaskLayout(const TaskSpec& spec);

  const TaskSpec& spec() const noexcept { return spec_; }
  const VocabPtr& vocab() const noexcept { return vocab_; }
  const std::vector<Token>& markers() const noexcept { return markers_; }
  std::size_t num_words() const noexcept { return spec_.words.size(); }

  bool is_marker(Token t) const noexcept;
  const ConstraintSpec& constraint_of(Token marker) const;
  Token marker_of(const ConstraintSpec& spec) const;  // throws ContractError when absent
  double weight_of(Token marker) const;

  // Prompt markers in ascending token order; decode is the exact inverse.
  Sequence encode(const std::vector<ConstraintSpec>& constraints) const;
  std::vector<ConstraintSpec> decode(const Sequence& prompt) const;

  // Every prompt the generator can emit: 1..max_constraints distinct
  // markers, at most one per constraint family.
  std::vector<Sequence> prompt_space() const;

 private:
  TaskSpec spec_;
  VocabPtr vocab_;
  std::vector<Token> markers_;
  std::vector<ConstraintSpec> marker_specs_;
  std::vector<int> marker_family_;
  std::vector<double> marker_weight_;
};

// Shortest word-only responses (eos-terminated, or truncated at max_len)
// satisfying every constraint, searched in length-major lexicographic order.
// Returns up to `limit` hits; stops after `node_budget` candidates or once
// the length exceeds the shortest hit by more than `length_slack` words.
std::vector<Sequence> satisfying_responses(const TaskLayout& layout, const std::vector<ConstraintSpec>& constraints,
                                           std::size_t limit, std::size_t node_budget = 3'000'000,
                                           int length_slack = 1 << 20);

// Records with prompts and constraints only. Throws GenerationError naming the
// first unsatisfiable constraint combination in the prompt space.
std::vector<ExampleRecord> generate_dataset(const TaskLayout& layout, int n, Rng& rng);

struct TeacherBuild {
  PolicyParams policy;
  double pass_rate = 0.0;  // measured on the teacher's own samples
  double margin = 0.0;     // HandBuilt: logit margin on target tokens
  int train_steps = 0;     // Trained: SFT steps used
};

// Frozen expert policy whose sampled pass rate over the prompt space is at
// least p_sat. Throws BuildError when that cannot be reached.
TeacherBuild build_teacher(const TeacherSpec& spec, const TaskLayout& layout, int context_order, Rng& rng);

// Mean verifiable reward of `samples` seeded draws over the prompt space.
double measure_pass_rate(const PolicyParams& policy, const TaskLayout& layout, int samples, Rng& rng);

struct GtFilterResult {
  std::vector<ExampleRecord> records;
  double retention = 0.0;
};

// For each record, up to `attempts` teacher samples; the first passing one
// becomes gt_response. Records without a passing sample are dropped.
GtFilterResult make_gt_dataset(const std::vector<ExampleRecord>& records, const PolicyParams& teacher,
                               const Detokenizer& detok, int attempts, int max_len, Rng& rng);

// One seeded teacher sample per record, stored as teacher_response.
void attach_teacher_responses(std::vector<ExampleRecord>& records, const PolicyParams& teacher, int max_len, Rng& rng);

}  // namespace advpref
