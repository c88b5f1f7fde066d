#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "frnet/volume.hpp"

namespace frnet {

inline constexpr const char* kSplitTrain = "train";
inline constexpr const char* kSplitTest = "test";

struct ManifestEntry {
  // Paths relative to the manifest's directory (or absolute).
  std::string volume;
  std::string mask;
  std::string group;
  std::string split;
  // Set on entries produced by corrupt_dataset.
  std::optional<double> motion_sigma;
  std::optional<std::size_t> source;
};

struct DatasetManifest {
  int format_version = 1;
  Extents extents;
  std::vector<ManifestEntry> entries;
  // Directory relative paths resolve against; not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
  std::vector<std::size_t> indices_with_split(std::string_view split) const;
};

// JSON manifest files.
DatasetManifest load_manifest(const std::filesystem::path& path);
// Rebases relative paths when saving to a directory other than base_dir.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Throws when a referenced file is missing or its extents differ.
void validate_manifest(const DatasetManifest& manifest);

// Stratified per group: ceil(fraction * n) entries of each group become test,
// the rest train. Groups keep their first-appearance order.
void make_split(DatasetManifest& manifest, double test_fraction, std::uint64_t seed);

}  // namespace frnet
