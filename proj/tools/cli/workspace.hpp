#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "config.hpp"

namespace xlp::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kLockFile = ".lock";

/// Exclusive hold on an output directory (advisory flock on `.lock`), released on destruction.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

/// `manifest.json`: config echo, input and artifact hashes, timestamps.
///
/// The manifest hash covers the tool version and the config echo only, so reruns of the
/// same config agree on it regardless of where or when they ran.
class Manifest {
 public:
  /// Loads or starts the manifest of `dir`. One recorded under a different config is a
  /// ConfigError unless `force`, which adopts the new config.
  static Manifest open(const std::filesystem::path& dir, const ExperimentConfig& config, bool force);

  const std::string& hash() const { return hash_; }
  const std::filesystem::path& dir() const { return dir_; }

  /// Hashes an input file. A file whose hash differs from the recorded one is stale: a
  /// DataError unless `force`, which records the new hash.
  void check_input(const std::string& role, const std::filesystem::path& path);
  /// Records an input unconditionally (for inputs this tool just generated).
  void record_input(const std::string& role, const std::filesystem::path& path);

  /// An upstream output (path relative to the directory) must exist and match its record.
  void require_artifact(const std::string& relative);
  /// Verifies the artifact only when a record exists.
  void verify_if_recorded(const std::string& relative);
  void record_artifact(const std::string& relative, const std::string& command);
  bool has_artifact(const std::string& relative) const;

  /// Writes atomically, stamping `updated`.
  void save();

 private:
  std::filesystem::path dir_;
  std::string hash_;
  bool force_ = false;
  nlohmann::json doc_;
};

std::string manifest_hash(const ExperimentConfig& config);

}  // namespace xlp::cli
