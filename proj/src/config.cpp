#include "sbd/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sbd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void check_type(const std::string& key, const FieldSpec& spec, const std::string& value) {
  switch (spec.type) {
    case FieldType::kInt: {
      char* end = nullptr;
      std::strtoll(value.c_str(), &end, 10);
      if (end == value.c_str() || *end != '\0')
        throw ConfigError("config: field '" + key + "' expects an integer, got '" + value + "'",
                          key);
      break;
    }
    case FieldType::kReal: {
      char* end = nullptr;
      std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0')
        throw ConfigError("config: field '" + key + "' expects a real number, got '" + value + "'",
                          key);
      break;
    }
    case FieldType::kBool:
      if (value != "true" && value != "false")
        throw ConfigError("config: field '" + key + "' expects true/false, got '" + value + "'",
                          key);
      break;
    case FieldType::kString:
      break;
  }
}

}  // namespace

void Config::validate_key(const std::string& key, const std::string& value) {
  const auto it = schema_->find(key);
  if (it == schema_->end()) throw ConfigError("config: unknown key '" + key + "'", key);
  check_type(key, it->second, value);
  values_[key] = value;
}

Config Config::defaults(const ConfigSchema& schema) {
  Config cfg;
  cfg.schema_ = &schema;
  for (const auto& [key, spec] : schema) cfg.values_[key] = spec.default_value;
  return cfg;
}

Config Config::from_string(const std::string& text, const ConfigSchema& schema) {
  Config cfg = defaults(schema);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) + " is not 'key = value'");
    cfg.validate_key(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config Config::from_file(const std::string& path, const ConfigSchema& schema) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_string(buf.str(), schema);
}

void Config::override_value(const std::string& key, const std::string& value) {
  validate_key(key, value);
}

long long Config::get_int(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'", key);
  return std::strtoll(it->second.c_str(), nullptr, 10);
}

double Config::get_real(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'", key);
  return std::strtod(it->second.c_str(), nullptr);
}

std::string Config::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'", key);
  return it->second;
}

bool Config::get_bool(const std::string& key) const {
  return get_string(key) == "true";
}

}  // namespace sbd
