#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace carlwave {

/// Flat, typed key-value configuration grouped into [sections].
/// Lines: `[section]`, `key = value`, blank, or comment (# or ;). Values are
/// trimmed strings; typed getters parse on access and raise ConfigError with
/// the offending field name. The literal value "auto" selects the built-in
/// parameter pipeline wherever a knob supports it.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  bool is_auto(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& def) const;
  double get_double(const std::string& section, const std::string& key, double def) const;
  int get_int(const std::string& section, const std::string& key, int def) const;
  bool get_bool(const std::string& section, const std::string& key, bool def) const;
  std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                      const std::vector<double>& def) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  void set_double(const std::string& section, const std::string& key, double value);

  /// Sections and keys in sorted order; re-parsing the result yields an
  /// equal configuration.
  std::string canonical_text() const;

  /// FNV-1a of the canonical text, as 16 hex digits.
  std::string hash_hex() const;

  /// Raises ConfigError naming the first key not present in `known`
  /// (entries are "section.key").
  void reject_unknown(const std::set<std::string>& known) const;

  bool operator==(const Config& other) const { return kv_ == other.kv_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> kv_;
};

}  // namespace carlwave
