#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "advpref/types.hpp"
#include "advpref/verify.hpp"

namespace advpref {

inline constexpr int kSchemaVersion = 1;

// One row of the demonstration set / rollout prompt pool.
struct ExampleRecord {
  Sequence prompt;
  std::vector<ConstraintSpec> constraints;
  std::optional<Sequence> gt_response;
  std::optional<Sequence> teacher_response;
  bool operator==(const ExampleRecord&) const = default;
};

struct PreferenceRecord {
  Sequence prompt;
  Sequence winner;
  Sequence loser;
  bool operator==(const PreferenceRecord&) const = default;
};

enum class Label { Desirable, Undesirable };

struct BinaryLabelRecord {
  Sequence prompt;
  Sequence response;
  Label label = Label::Desirable;
  bool operator==(const BinaryLabelRecord&) const = default;
};

enum class DatasetKind { Sft, Preference, Binary };

// Throws ValidationError when a record breaks its type invariants (bad
// tokens, empty prompt, gt failing its own constraints, winner == loser).
void validate_record(const ExampleRecord& r, const Detokenizer& detok);
void validate_record(const PreferenceRecord& r, const Vocabulary& vocab);
void validate_record(const BinaryLabelRecord& r, const Vocabulary& vocab);

std::string to_json_line(const ExampleRecord& r);
std::string to_json_line(const PreferenceRecord& r);
std::string to_json_line(const BinaryLabelRecord& r);

std::vector<ExampleRecord> load_sft_dataset(const std::string& path, VocabPtr vocab);
std::vector<PreferenceRecord> load_preference_dataset(const std::string& path, VocabPtr vocab);
std::vector<BinaryLabelRecord> load_binary_dataset(const std::string& path, VocabPtr vocab);

using AnyDataset =
    std::variant<std::vector<ExampleRecord>, std::vector<PreferenceRecord>, std::vector<BinaryLabelRecord>>;
AnyDataset load_dataset(const std::string& path, DatasetKind kind, VocabPtr vocab);

// Canonical form: one compact JSON object per line, fields in schema order.
template <typename Record>
void save_dataset(const std::string& path, const std::vector<Record>& records);

void save_vocabulary(const std::string& path, const Vocabulary& vocab);
VocabPtr load_vocabulary(const std::string& path);

// Keeps exactly the records whose candidate passes the verifier, with the
// candidate stored as gt_response. candidates[i] belongs to records[i].
std::vector<ExampleRecord> filter_by_verifier(const std::vector<ExampleRecord>& records,
                                              const std::vector<std::optional<Sequence>>& candidates,
                                              const Detokenizer& detok);

// Whole-file helpers used across modules.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace advpref
