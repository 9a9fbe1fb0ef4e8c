#include "carlwave/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "carlwave/errors.hpp"

namespace carlwave {

namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string field(const std::string& section, const std::string& key) {
  return section + "." + key;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": key outside of any [section]");
    }
    if (cfg.kv_[section].count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " +
                        field(section, key));
    }
    cfg.kv_[section][key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool Config::has(const std::string& section, const std::string& key) const {
  auto s = kv_.find(section);
  return s != kv_.end() && s->second.count(key) > 0;
}

bool Config::is_auto(const std::string& section, const std::string& key) const {
  return !has(section, key) || get_string(section, key, "auto") == "auto";
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& def) const {
  auto s = kv_.find(section);
  if (s == kv_.end()) return def;
  auto k = s->second.find(key);
  return k == s->second.end() ? def : k->second;
}

double Config::get_double(const std::string& section, const std::string& key, double def) const {
  if (!has(section, key)) return def;
  const std::string v = get_string(section, key, "");
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    throw ConfigError("field " + field(section, key) + ": not a number: '" + v + "'");
  }
  return x;
}

int Config::get_int(const std::string& section, const std::string& key, int def) const {
  if (!has(section, key)) return def;
  const std::string v = get_string(section, key, "");
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    throw ConfigError("field " + field(section, key) + ": not an integer: '" + v + "'");
  }
  return static_cast<int>(x);
}

bool Config::get_bool(const std::string& section, const std::string& key, bool def) const {
  if (!has(section, key)) return def;
  const std::string v = get_string(section, key, "");
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("field " + field(section, key) + ": not a boolean: '" + v + "'");
}

std::vector<double> Config::get_double_list(const std::string& section, const std::string& key,
                                            const std::vector<double>& def) const {
  if (!has(section, key)) return def;
  const std::string v = get_string(section, key, "");
  std::vector<double> out;
  std::istringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) {
      throw ConfigError("field " + field(section, key) + ": empty list entry in '" + v + "'");
    }
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') {
      throw ConfigError("field " + field(section, key) + ": not a number: '" + tok + "'");
    }
    out.push_back(x);
  }
  if (out.empty()) {
    throw ConfigError("field " + field(section, key) + ": empty list");
  }
  return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  kv_[section][key] = value;
}

void Config::set_double(const std::string& section, const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  set(section, key, buf);
}

std::string Config::canonical_text() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : kv_) {
    if (!first) out << "\n";
    first = false;
    out << "[" << section << "]\n";
    for (const auto& [key, value] : keys) out << key << " = " << value << "\n";
  }
  return out.str();
}

std::string Config::hash_hex() const {
  const std::string text = canonical_text();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void Config::reject_unknown(const std::set<std::string>& known) const {
  for (const auto& [section, keys] : kv_)
    for (const auto& [key, value] : keys) {
      (void)value;
      if (!known.count(field(section, key))) {
        throw ConfigError("unknown config key " + field(section, key));
      }
    }
}

}  // namespace carlwave
