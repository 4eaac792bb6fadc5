#include "advpref/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "advpref/error.hpp"

namespace advpref {
namespace {

using ojson = nlohmann::ordered_json;

ojson seq_json(const Sequence& s) { return s.tokens; }

ojson opt_seq_json(const std::optional<Sequence>& s) { return s ? seq_json(*s) : ojson(nullptr); }

Sequence seq_from(const nlohmann::json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) throw ParseError(line, std::string("missing field '") + key + "'");
  const auto& a = j.at(key);
  if (!a.is_array()) throw ParseError(line, std::string("field '") + key + "' must be an integer array");
  Sequence s;
  for (const auto& e : a) {
    if (!e.is_number_integer()) throw ParseError(line, std::string("field '") + key + "' must be an integer array");
    s.tokens.push_back(e.get<Token>());
  }
  return s;
}

std::optional<Sequence> opt_seq_from(const nlohmann::json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return seq_from(j, key, line);
}

void check_version(const nlohmann::json& j, std::size_t line) {
  if (!j.contains("version") || !j.at("version").is_number_integer())
    throw ParseError(line, "missing integer 'version'");
  if (j.at("version").get<int>() != kSchemaVersion)
    throw ParseError(line, "unsupported schema version " + j.at("version").dump());
}

template <typename Fn>
void for_each_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    if (!j.is_object()) throw ParseError(lineno, "expected a JSON object");
    check_version(j, lineno);
    try {
      fn(j, lineno);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

void validate_record(const ExampleRecord& r, const Detokenizer& detok) {
  const auto& vocab = detok.vocab();
  if (r.prompt.empty()) throw ValidationError("prompt must be nonempty");
  validate_sequence(r.prompt, vocab, "prompt");
  for (Token t : r.prompt.tokens)
    if (t == vocab.eos()) throw ValidationError("prompt contains eos");
  for (const auto& c : r.constraints) validate_constraint(c);
  if (r.teacher_response) validate_sequence(*r.teacher_response, vocab, "teacher_response");
  if (r.gt_response) {
    validate_sequence(*r.gt_response, vocab, "gt_response");
    if (verifiable_reward(*r.gt_response, r.constraints, detok) != 1)
      throw ValidationError("gt_response fails its own constraints");
  }
}

void validate_record(const PreferenceRecord& r, const Vocabulary& vocab) {
  if (r.prompt.empty()) throw ValidationError("prompt must be nonempty");
  validate_sequence(r.prompt, vocab, "prompt");
  validate_sequence(r.winner, vocab, "winner");
  validate_sequence(r.loser, vocab, "loser");
  if (r.winner == r.loser) throw ValidationError("winner and loser are identical");
}

void validate_record(const BinaryLabelRecord& r, const Vocabulary& vocab) {
  if (r.prompt.empty()) throw ValidationError("prompt must be nonempty");
  validate_sequence(r.prompt, vocab, "prompt");
  validate_sequence(r.response, vocab, "response");
}

std::string to_json_line(const ExampleRecord& r) {
  ojson cons = ojson::array();
  for (const auto& c : r.constraints) cons.push_back(constraint_to_json(c));
  ojson j;
  j["prompt"] = seq_json(r.prompt);
  j["constraints"] = std::move(cons);
  j["gt_response"] = opt_seq_json(r.gt_response);
  j["teacher_response"] = opt_seq_json(r.teacher_response);
  j["version"] = kSchemaVersion;
  return j.dump();
}

std::string to_json_line(const PreferenceRecord& r) {
  ojson j;
  j["prompt"] = seq_json(r.prompt);
  j["winner"] = seq_json(r.winner);
  j["loser"] = seq_json(r.loser);
  j["version"] = kSchemaVersion;
  return j.dump();
}

std::string to_json_line(const BinaryLabelRecord& r) {
  ojson j;
  j["prompt"] = seq_json(r.prompt);
  j["response"] = seq_json(r.response);
  j["label"] = r.label == Label::Desirable ? "desirable" : "undesirable";
  j["version"] = kSchemaVersion;
  return j.dump();
}

std::vector<ExampleRecord> load_sft_dataset(const std::string& path, VocabPtr vocab) {
  const Detokenizer detok(vocab);
  std::vector<ExampleRecord> out;
  for_each_line(path, [&](const nlohmann::json& j, std::size_t line) {
    ExampleRecord r;
    r.prompt = seq_from(j, "prompt", line);
    if (!j.contains("constraints") || !j.at("constraints").is_array())
      throw ParseError(line, "missing array 'constraints'");
    for (const auto& c : j.at("constraints")) r.constraints.push_back(constraint_from_json(c));
    r.gt_response = opt_seq_from(j, "gt_response", line);
    r.teacher_response = opt_seq_from(j, "teacher_response", line);
    validate_record(r, detok);
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<PreferenceRecord> load_preference_dataset(const std::string& path, VocabPtr vocab) {
  std::vector<PreferenceRecord> out;
  for_each_line(path, [&](const nlohmann::json& j, std::size_t line) {
    PreferenceRecord r{seq_from(j, "prompt", line), seq_from(j, "winner", line), seq_from(j, "loser", line)};
    validate_record(r, *vocab);
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<BinaryLabelRecord> load_binary_dataset(const std::string& path, VocabPtr vocab) {
  std::vector<BinaryLabelRecord> out;
  for_each_line(path, [&](const nlohmann::json& j, std::size_t line) {
    BinaryLabelRecord r;
    r.prompt = seq_from(j, "prompt", line);
    r.response = seq_from(j, "response", line);
    if (!j.contains("label") || !j.at("label").is_string()) throw ParseError(line, "missing string 'label'");
    const auto label = j.at("label").get<std::string>();
    if (label == "desirable") r.label = Label::Desirable;
    else if (label == "undesirable") r.label = Label::Undesirable;
    else throw ParseError(line, "label must be desirable|undesirable");
    validate_record(r, *vocab);
    out.push_back(std::move(r));
  });
  return out;
}

AnyDataset load_dataset(const std::string& path, DatasetKind kind, VocabPtr vocab) {
  switch (kind) {
    case DatasetKind::Sft: return load_sft_dataset(path, std::move(vocab));
    case DatasetKind::Preference: return load_preference_dataset(path, std::move(vocab));
    case DatasetKind::Binary: return load_binary_dataset(path, std::move(vocab));
  }
  throw ContractError("unknown dataset kind");
}

template <typename Record>
void save_dataset(const std::string& path, const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) out += to_json_line(r) + "\n";
  write_file(path, out);
}

template void save_dataset(const std::string&, const std::vector<ExampleRecord>&);
template void save_dataset(const std::string&, const std::vector<PreferenceRecord>&);
template void save_dataset(const std::string&, const std::vector<BinaryLabelRecord>&);

void save_vocabulary(const std::string& path, const Vocabulary& vocab) {
  ojson j;
  j["symbols"] = vocab.symbols();
  j["eos_index"] = vocab.eos();
  j["version"] = kSchemaVersion;
  write_file(path, j.dump() + "\n");
}

VocabPtr load_vocabulary(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, std::string("vocabulary: ") + e.what());
  }
  check_version(j, 1);
  if (!j.contains("symbols") || !j.contains("eos_index")) throw ParseError(1, "vocabulary needs symbols and eos_index");
  return std::make_shared<const Vocabulary>(j.at("symbols").get<std::vector<std::string>>(),
                                            j.at("eos_index").get<Token>());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace advpref
