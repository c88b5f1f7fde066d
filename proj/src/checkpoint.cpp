#include <json.hpp>

#include "frnet/error.hpp"
#include "frnet/model.hpp"
#include "io_util.hpp"

namespace frnet {

namespace {
constexpr const char* kFormat = "frnet-checkpoint";
constexpr int kVersion = 1;

std::filesystem::path payload_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".bin";
  return p;
}
}  // namespace

void save_checkpoint(const LayerGraph& graph, const std::filesystem::path& path) {
  const auto& spec = graph.spec();
  nlohmann::json manifest;
  manifest["format"] = kFormat;
  manifest["version"] = kVersion;
  manifest["spec"] = {{"arch", to_string(spec.arch)},
                      {"levels", spec.levels},
                      {"base_channels", spec.base_channels},
                      {"in_channels", spec.in_channels},
                      {"num_classes", spec.num_classes}};
  manifest["payload"] = payload_path(path).filename().string();
  manifest["dtype"] = "float64-le";

  std::string payload;
  payload.reserve(graph.parameter_count() * sizeof(double));
  auto table = nlohmann::json::array();
  for (const auto& p : graph.parameters()) {
    table.push_back({{"id", p.id},
                     {"shape", p.value.shape()},
                     {"offset", payload.size()},
                     {"count", p.value.numel()}});
    for (double v : p.value.data()) detail::append_le(payload, v);
  }
  manifest["parameters"] = std::move(table);
  manifest["payload_bytes"] = payload.size();

  detail::write_file_atomic(payload_path(path), payload);
  detail::write_file_atomic(path, manifest.dump(2) + "\n");
}

LayerGraph load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (manifest.at("format") != kFormat) throw IoError(path.string() + " is not an frnet checkpoint");
    if (manifest.at("version") != kVersion) throw IoError("unsupported checkpoint version in " + path.string());
    const auto& js = manifest.at("spec");
    ArchitectureSpec spec;
    spec.arch = parse_arch(js.at("arch").get<std::string>());
    spec.levels = js.at("levels");
    spec.base_channels = js.at("base_channels");
    spec.in_channels = js.at("in_channels");
    spec.num_classes = js.at("num_classes");

    LayerGraph graph = build_model(spec);
    const auto payload_file = path.parent_path() / manifest.at("payload").get<std::string>();
    const std::string payload = detail::read_file(payload_file);
    const std::size_t expected = manifest.at("payload_bytes");
    if (payload.size() != expected) {
      throw IoError("checkpoint payload " + payload_file.string() + ": expected " + std::to_string(expected) +
                    " bytes, got " + std::to_string(payload.size()));
    }

    const auto& table = manifest.at("parameters");
    if (table.size() != graph.parameters().size()) {
      throw IoError("checkpoint lists " + std::to_string(table.size()) + " parameters, architecture has " +
                    std::to_string(graph.parameters().size()));
    }
    for (auto& p : graph.parameters()) {
      const nlohmann::json* entry = nullptr;
      for (const auto& e : table) {
        if (e.at("id") == p.id) entry = &e;
      }
      if (!entry) throw IoError("checkpoint is missing parameter " + p.id);
      if (entry->at("shape").get<Shape>() != p.value.shape()) {
        throw IoError("checkpoint parameter " + p.id + " has the wrong shape");
      }
      const std::size_t offset = entry->at("offset");
      const std::size_t count = entry->at("count");
      if (count != p.value.numel() || offset + count * sizeof(double) > payload.size()) {
        throw IoError("checkpoint parameter " + p.id + " lies outside the payload");
      }
      auto dst = p.value.mutable_data();
      for (std::size_t i = 0; i < count; ++i) dst[i] = detail::load_le<double>(payload.data() + offset + 8 * i);
    }
    return graph;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace frnet
