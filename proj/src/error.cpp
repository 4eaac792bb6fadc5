#include "advpref/error.hpp"

namespace advpref {

ConfigError::ConfigError(std::string field, const std::string& what)
    : Error("config error on '" + field + "': " + what), field_(std::move(field)) {}

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error("parse error at line " + std::to_string(line) + ": " + what), line_(line) {}

NumericalError::NumericalError(const std::string& what, std::string dump_path)
    : Error(what + " (state dumped to " + dump_path + ")"), dump_path_(std::move(dump_path)) {}

}  // namespace advpref
