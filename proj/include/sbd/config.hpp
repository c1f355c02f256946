#pragma once

#include <map>
#include <string>
#include <vector>

#include "sbd/common.hpp"

namespace sbd {

/// Invalid configuration: unknown key, bad type, missing file. The message
/// names the offending field path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg, std::string field = "")
      : std::runtime_error(msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class FieldType { kInt, kReal, kString, kBool };

struct FieldSpec {
  FieldType type = FieldType::kString;
  std::string default_value;
};

using ConfigSchema = std::map<std::string, FieldSpec>;

/// Structured key-value configuration ("key = value" lines, '#' comments,
/// dotted key paths). Every key must appear in the schema; values are
/// type-checked at load. No environment-variable lookups.
class Config {
 public:
  static Config from_file(const std::string& path, const ConfigSchema& schema);
  static Config from_string(const std::string& text, const ConfigSchema& schema);
  static Config defaults(const ConfigSchema& schema);

  long long get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  void override_value(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void validate_key(const std::string& key, const std::string& value);

  const ConfigSchema* schema_ = nullptr;
  std::map<std::string, std::string> values_;
};

}  // namespace sbd
