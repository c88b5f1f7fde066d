#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frnet/manifest.hpp"
#include "frnet/model.hpp"
#include "frnet/volume.hpp"

namespace frnet {

// 2|A n B| / (|A| + |B|) over binary masks; 1 when both are empty.
double dice(const LabelVolume& pred, const LabelVolume& gt);

struct VolumeScore {
  std::size_t entry = 0;
  std::string group;
  std::string volume;
  double dice = 0.0;
  bool ok = false;
  std::string error;
};

// Mean and sample standard deviation (n - 1; 0 for a single member).
struct Summary {
  std::string group;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Summary summarize(std::string group, std::span<const double> values);

struct EvalReport {
  std::vector<VolumeScore> volumes;  // manifest order
  std::vector<Summary> groups;       // first-appearance order
  Summary overall;
  bool complete = true;

  std::string to_json() const;
};

using Segmenter = std::function<LabelVolume(const RealVolume& volume, const ManifestEntry& entry)>;

// Segments every entry of `split`, scores it against its mask and aggregates
// per group and overall. Entries that fail to load are recorded and mark the
// report incomplete. An empty split is a ConfigError.
EvalReport evaluate(const Segmenter& segmenter, const DatasetManifest& manifest, std::string_view split = "test");
EvalReport evaluate(const LayerGraph& model, const DatasetManifest& manifest, std::string_view split = "test");

}  // namespace frnet
