#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace unires {

struct ManifestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One manifest line: lq_path, hq_path, dominating_kind, recipe-id.
struct ManifestRecord {
  std::filesystem::path lq_path;
  std::filesystem::path hq_path;
  std::string kind;
  std::string recipe_id;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Relative paths are resolved against the manifest's directory.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

/// Paths below the manifest's directory are written relative to it.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);

}  // namespace unires
