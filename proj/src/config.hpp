// Line-oriented `key = value` configuration with bracketed sections.
// Every key is registered with a default and a help line; unknown keys
// are rejected by name so typos surface as config errors, not silent
// fallbacks to defaults.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ivy {

struct ConfigKey {
  const char* name;  // "section.key"
  const char* def;
  const char* help;
};

class Config {
 public:
  Config();  // all keys at defaults

  static const std::vector<ConfigKey>& keys();

  // Parses `[section]` headers and `key = value` lines; `#` starts a
  // comment. Keys outside any section must be fully qualified.
  void load_file(const std::string& path);
  // Accepts "section.key=value" or ("section.key", "value").
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get_str(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  // Full key = value listing in registry order, suitable for --help
  // and for recording the effective configuration of a run.
  std::string dump() const;

 private:
  std::vector<std::string> values_;  // parallel to keys()
  std::size_t index_of(const std::string& key) const;
};

}  // namespace ivy
