#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mug {

/// Flat `key = value` configuration.
///
/// Format: one assignment per line, `#` starts a comment, blank lines are
/// ignored, keys are dotted paths (`graph.tab.sim = knn`). Later assignments
/// override earlier ones. Values are taken verbatim after trimming.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  /// Keys sharing `prefix` (e.g. "column."), prefix stripped, in key order.
  std::vector<std::pair<std::string, std::string>> with_prefix(const std::string& prefix) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace mug
