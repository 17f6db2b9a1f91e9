#include "workspace.hpp"

#include <chrono>
#include <ctime>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "xlprime/error.hpp"
#include "xlprime/hash.hpp"
#include "xlprime/io.hpp"

namespace xlp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

DirectoryLock::DirectoryLock(const fs::path& dir) {
  fs::create_directories(dir);
  const auto path = dir / kLockFile;
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw DataError("cannot open lock file '" + path.string() + "'");
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw ConfigError("output directory '" + dir.string() + "' is in use by another xlprime command");
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

std::string manifest_hash(const ExperimentConfig& config) {
  return sha256_hex(std::string(kToolVersion) + "\n" + config.to_json());
}

Manifest Manifest::open(const fs::path& dir, const ExperimentConfig& config, bool force) {
  Manifest m;
  m.dir_ = dir;
  m.hash_ = manifest_hash(config);
  m.force_ = force;
  const auto path = dir / kManifestFile;
  const auto config_echo = json::parse(config.to_json());
  if (fs::exists(path)) {
    try {
      m.doc_ = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    const auto old = m.doc_.value("manifest_hash", std::string());
    if (old != m.hash_) {
      if (!force) {
        throw ConfigError("output directory '" + dir.string() + "' was produced by a different config (manifest " +
                          old.substr(0, 12) + ", now " + m.hash_.substr(0, 12) + "); rerun with --force to adopt it");
      }
      m.doc_["previous_manifest_hash"] = old;
    }
  } else {
    m.doc_ = json{{"created", utc_now()}, {"inputs", json::object()}, {"artifacts", json::object()}};
  }
  m.doc_["manifest_hash"] = m.hash_;
  m.doc_["tool_version"] = kToolVersion;
  m.doc_["config"] = config_echo;
  m.doc_["lock_file"] = kLockFile;
  return m;
}

void Manifest::check_input(const std::string& role, const fs::path& path) {
  if (path.empty()) throw ConfigError("input '" + role + "' is not configured");
  if (!fs::exists(path)) throw ConfigError("input '" + role + "' ('" + path.string() + "') does not exist");
  const auto digest = sha256_file(path);
  auto& rec = doc_["inputs"][role];
  if (rec.is_object() && rec.value("sha256", "") != digest && rec.value("path", "") == path.string()) {
    if (!force_) {
      throw DataError("input '" + role + "' ('" + path.string() + "') changed since it was recorded; rerun with "
                      "--force to accept the new content");
    }
  }
  rec = json{{"path", path.string()}, {"sha256", digest}};
}

void Manifest::record_input(const std::string& role, const fs::path& path) {
  doc_["inputs"][role] = json{{"path", path.string()}, {"sha256", sha256_file(path)}};
}

bool Manifest::has_artifact(const std::string& relative) const {
  return doc_["artifacts"].contains(relative);
}

void Manifest::require_artifact(const std::string& relative) {
  const auto path = dir_ / relative;
  if (!fs::exists(path)) {
    throw DataError("required artifact '" + path.string() + "' is missing; run the upstream command first");
  }
  if (!has_artifact(relative)) {
    if (!force_) {
      throw DataError("artifact '" + path.string() + "' is not recorded in the manifest; rerun with --force to use it");
    }
    return;
  }
  verify_if_recorded(relative);
}

void Manifest::verify_if_recorded(const std::string& relative) {
  if (!has_artifact(relative)) return;
  const auto path = dir_ / relative;
  const auto expected = doc_["artifacts"][relative].value("sha256", "");
  if (fs::exists(path) && sha256_file(path) == expected) return;
  if (!force_) {
    throw DataError("artifact '" + path.string() + "' does not match its manifest hash (stale or modified); rerun "
                    "with --force to accept it");
  }
}

void Manifest::record_artifact(const std::string& relative, const std::string& command) {
  doc_["artifacts"][relative] =
      json{{"sha256", sha256_file(dir_ / relative)}, {"command", command}, {"manifest_hash", hash_}};
}

void Manifest::save() {
  doc_["updated"] = utc_now();
  write_file_atomic(dir_ / kManifestFile, doc_.dump(2) + "\n");
}

}  // namespace xlp::cli
