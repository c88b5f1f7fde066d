#include "frnet/eval.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "frnet/error.hpp"
#include "frnet/trainer.hpp"
#include "frnet/volume_io.hpp"

namespace frnet {

double dice(const LabelVolume& pred, const LabelVolume& gt) {
  if (!(pred.extents() == gt.extents())) {
    throw ContractError("dice: prediction " + pred.extents().to_string() + " vs ground truth " +
                        gt.extents().to_string());
  }
  require_binary(pred, "dice prediction");
  require_binary(gt, "dice ground truth");
  std::size_t both = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    a += pred[i];
    b += gt[i];
    both += pred[i] & gt[i];
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

Summary summarize(std::string group, std::span<const double> values) {
  Summary s;
  s.group = std::move(group);
  s.count = values.size();
  if (values.empty()) return s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

std::string EvalReport::to_json() const {
  auto summary_json = [](const Summary& s) {
    return nlohmann::json{{"group", s.group}, {"n", s.count}, {"mean", s.mean},
                          {"std", s.stddev},  {"min", s.min}, {"max", s.max}};
  };
  nlohmann::json j;
  j["metric"] = "dice";
  j["complete"] = complete;
  auto groups_json = nlohmann::json::array();
  for (const auto& g : groups) groups_json.push_back(summary_json(g));
  j["groups"] = std::move(groups_json);
  j["overall"] = summary_json(overall);
  auto vols = nlohmann::json::array();
  for (const auto& v : volumes) {
    nlohmann::json jv{{"entry", v.entry}, {"group", v.group}, {"volume", v.volume}, {"ok", v.ok}};
    if (v.ok) {
      jv["dice"] = v.dice;
    } else {
      jv["error"] = v.error;
    }
    vols.push_back(std::move(jv));
  }
  j["volumes"] = std::move(vols);
  return j.dump(2) + "\n";
}

EvalReport evaluate(const Segmenter& segmenter, const DatasetManifest& manifest, std::string_view split) {
  const auto indices = manifest.indices_with_split(split);
  if (indices.empty()) throw ConfigError("no manifest entries in split '" + std::string(split) + "'");

  EvalReport report;
  std::vector<std::string> group_order;
  for (std::size_t i : indices) {
    const auto& entry = manifest.entries[i];
    VolumeScore score;
    score.entry = i;
    score.group = entry.group;
    score.volume = entry.volume;
    try {
      const RealVolume volume = read_real_volume(manifest.resolve(entry.volume));
      const LabelVolume mask = read_binary_mask(manifest.resolve(entry.mask));
      score.dice = dice(segmenter(volume, entry), mask);
      score.ok = true;
    } catch (const Error& e) {
      score.error = e.what();
      report.complete = false;
    }
    if (std::find(group_order.begin(), group_order.end(), entry.group) == group_order.end()) {
      group_order.push_back(entry.group);
    }
    report.volumes.push_back(std::move(score));
  }

  std::vector<double> all;
  for (const auto& g : group_order) {
    std::vector<double> members;
    for (const auto& v : report.volumes) {
      if (v.ok && v.group == g) members.push_back(v.dice);
    }
    report.groups.push_back(summarize(g, members));
  }
  for (const auto& v : report.volumes) {
    if (v.ok) all.push_back(v.dice);
  }
  report.overall = summarize("overall", all);
  return report;
}

EvalReport evaluate(const LayerGraph& model, const DatasetManifest& manifest, std::string_view split) {
  return evaluate([&model](const RealVolume& volume, const ManifestEntry&) { return segment(model, volume); },
                  manifest, split);
}

}  // namespace frnet
