#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace lieflow {

/// Flat key=value configuration with typed access. '#' starts a comment;
/// arrays of floats are comma-separated.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_double_array(const std::string& key) const;
  std::vector<double> get_double_array(const std::string& key,
                                       const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Rejects the configuration if it contains a key outside `known`.
  void require_known_keys(const std::set<std::string>& known) const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace lieflow
