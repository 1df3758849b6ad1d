#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mug/keyvalue.hpp"

namespace mugcli {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// ISO-8601 UTC timestamp with millisecond precision.
std::string iso_timestamp(std::chrono::system_clock::time_point t);

/// One record per invocation. Inputs are hashed when registered, before any
/// processing reads them.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void add_input(const std::filesystem::path& path);
  /// Every regular file under `dir`, in path order.
  void add_input_tree(const std::filesystem::path& dir);
  void set_config(const mug::KeyValueConfig& config) { config_ = config; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set_duration(const std::string& name, double seconds) { durations_[name] = seconds; }
  void set_output(const std::filesystem::path& path) { output_ = path; }
  const std::optional<std::filesystem::path>& output() const { return output_; }

  /// Stamps the end time and writes JSON; creates parent directories.
  void write(int exit_code, const std::string& error) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::chrono::system_clock::time_point started_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  mug::KeyValueConfig config_;
  std::optional<std::uint64_t> seed_;
  std::map<std::string, double> durations_;
  std::optional<std::filesystem::path> output_;
};

}  // namespace mugcli
