#include "frnet/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "frnet/error.hpp"
#include "frnet/random.hpp"
#include "frnet/volume_io.hpp"
#include "io_util.hpp"

namespace frnet {

std::filesystem::path DatasetManifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::size_t> DatasetManifest::indices_with_split(std::string_view split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == split) out.push_back(i);
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(detail::read_file(path));
    m.format_version = j.at("format_version");
    if (m.format_version != 1) throw IoError(path.string() + ": unsupported manifest version");
    const auto ext = j.at("extents");
    m.extents = {ext.at(0), ext.at(1), ext.at(2)};
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.volume = e.at("volume");
      entry.mask = e.at("mask");
      entry.group = e.value("group", "");
      entry.split = e.value("split", "");
      if (e.contains("motion_sigma")) entry.motion_sigma = e.at("motion_sigma").get<double>();
      if (e.contains("source")) entry.source = e.at("source").get<std::size_t>();
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  m.base_dir = path.parent_path();
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const fs::path target_dir = fs::absolute(path).parent_path();
  auto rebase = [&](const std::string& p) {
    if (fs::path(p).is_absolute()) return p;
    const fs::path abs = fs::absolute(manifest.resolve(p)).lexically_normal();
    return abs.lexically_relative(target_dir).generic_string();
  };
  nlohmann::json j;
  j["format_version"] = manifest.format_version;
  j["extents"] = {manifest.extents.depth, manifest.extents.height, manifest.extents.width};
  auto entries = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::json je{{"volume", rebase(e.volume)}, {"mask", rebase(e.mask)}, {"group", e.group}, {"split", e.split}};
    if (e.motion_sigma) je["motion_sigma"] = *e.motion_sigma;
    if (e.source) je["source"] = *e.source;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  detail::write_file_atomic(path, j.dump(2) + "\n");
}

void validate_manifest(const DatasetManifest& manifest) {
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    for (const auto& rel : {e.volume, e.mask}) {
      const auto header = read_volume_header(manifest.resolve(rel));
      if (!(header.extents == manifest.extents)) {
        throw ShapeError("manifest entry " + std::to_string(i) + ": " + rel + " has extents " +
                         header.extents.to_string() + ", manifest declares " + manifest.extents.to_string());
      }
    }
  }
}

void make_split(DatasetManifest& manifest, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& g = manifest.entries[i].group;
    if (!groups.contains(g)) order.push_back(g);
    groups[g].push_back(i);
  }
  for (const auto& g : order) {
    if (groups[g].size() < 2) {
      throw ConfigError("group '" + g + "' has " + std::to_string(groups[g].size()) +
                        " entries; stratified splitting needs at least 2");
    }
  }
  Rng rng(seed);
  for (const auto& g : order) {
    auto members = groups[g];
    // Fisher-Yates
    for (std::size_t i = members.size() - 1; i > 0; --i) std::swap(members[i], members[rng.below(i + 1)]);
    const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(members.size()) - 1e-9));
    for (std::size_t k = 0; k < members.size(); ++k) {
      manifest.entries[members[k]].split = k < n_test ? kSplitTest : kSplitTrain;
    }
  }
}

}  // namespace frnet
