#include "lieflow/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lieflow {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::from_string(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                 ": empty key");
    if (c.entries_.count(key))
      throw std::invalid_argument("config: duplicate key '" + key + "'");
    c.entries_[key] = value;
  }
  return c;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

namespace {
const std::string& fetch(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw std::invalid_argument("config: missing required key '" + key + "'");
  return it->second;
}
}  // namespace

int Config::get_int(const std::string& key) const {
  const std::string& v = fetch(entries_, key);
  char* end = nullptr;
  long r = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw std::invalid_argument("config: key '" + key + "' is not an integer: " + v);
  return static_cast<int>(r);
}

int Config::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = fetch(entries_, key);
  char* end = nullptr;
  double r = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw std::invalid_argument("config: key '" + key + "' is not a number: " + v);
  return r;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::string Config::get_string(const std::string& key) const { return fetch(entries_, key); }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? entries_.at(key) : fallback;
}

std::vector<double> Config::get_double_array(const std::string& key) const {
  const std::string& v = fetch(entries_, key);
  std::vector<double> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    double r = std::strtod(item.c_str(), &end);
    if (end == item.c_str())
      throw std::invalid_argument("config: key '" + key + "' has a non-numeric entry: " + item);
    out.push_back(r);
  }
  if (out.empty()) throw std::invalid_argument("config: key '" + key + "' is an empty array");
  return out;
}

std::vector<double> Config::get_double_array(const std::string& key,
                                             const std::vector<double>& fallback) const {
  return has(key) ? get_double_array(key) : fallback;
}

void Config::require_known_keys(const std::set<std::string>& known) const {
  for (const auto& [key, value] : entries_)
    if (!known.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");
}

}  // namespace lieflow
