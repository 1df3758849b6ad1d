#include "manifest.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>

#include <json.hpp>
#include <openssl/evp.h>

#include "mug/error.hpp"

namespace mugcli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mug::IngestionError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 initialisation failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

std::string iso_timestamp(std::chrono::system_clock::time_point t) {
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(t);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t - secs).count();
  const std::time_t tt = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), started_(std::chrono::system_clock::now()) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.emplace_back(path.string(), sha256_file(path));
}

void RunManifest::add_input_tree(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) add_input(f);
}

void RunManifest::write(int exit_code, const std::string& error) const {
  if (!output_) return;
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["argv"] = argv_;
  j["exit_code"] = exit_code;
  if (!error.empty()) j["error"] = error;
  if (seed_) j["seed"] = *seed_;
  j["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_.entries()) j["config"][k] = v;
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& [path, digest] : inputs_) j["inputs"].push_back({{"path", path}, {"sha256", digest}});
  j["started_at"] = iso_timestamp(started_);
  j["finished_at"] = iso_timestamp(std::chrono::system_clock::now());
  j["durations"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : durations_) j["durations"][k] = v;

  if (output_->has_parent_path()) std::filesystem::create_directories(output_->parent_path());
  std::ofstream out(*output_);
  if (!out) throw mug::IngestionError("cannot write manifest " + output_->string());
  out << j.dump(2) << '\n';
}

}  // namespace mugcli
