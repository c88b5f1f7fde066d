#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "frnet/tensor.hpp"

namespace frnet {

enum class ArchKind { frnet, unet };

std::string to_string(ArchKind kind);
ArchKind parse_arch(const std::string& name);

struct ArchitectureSpec {
  std::size_t levels = 4;
  std::size_t base_channels = 16;
  std::size_t in_channels = 1;
  std::size_t num_classes = 2;
  ArchKind arch = ArchKind::frnet;

  // Throws ConfigError on zero-valued knobs.
  void validate() const;
  // Throws ConfigError unless every spatial extent divides by 2^levels.
  void check_extents(std::size_t depth, std::size_t height, std::size_t width) const;

  bool operator==(const ArchitectureSpec&) const = default;
};

enum class LayerKind { conv, deconv, relu, concat, add, softmax };
enum class Section { stem, encoder, decoder, head };

// Role of a layer inside its level; used by the structural queries.
enum class LayerRole {
  body,        // 3x3x3 feature convolution
  downsample,  // 2x2x2 stride-2 convolution
  upsample,    // 2x2x2 stride-2 deconvolution
  projection,  // 1x1x1 channel-matching convolution on a residual path
  classifier,  // 1x1x1 class head
  activation,
  merge,
};

struct Layer {
  LayerKind kind;
  LayerRole role;
  Section section;
  std::size_t level = 0;
  std::string name;
  // Value slots; slot 0 is the network input. `input_b` is used by concat/add.
  std::size_t input = 0;
  std::size_t input_b = 0;
  std::size_t output = 0;
  // Convolution parameters, unused for the other kinds.
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t weight_param = 0;
  std::size_t bias_param = 0;
};

// Encoder feature slot -> decoder concat layer at the same resolution.
struct SkipEdge {
  std::size_t level;
  std::size_t from_slot;
  std::size_t to_layer;
};

// Decoder-internal identity path: input of a conv pair added to its output.
struct ResidualEdge {
  std::size_t level;
  std::size_t from_slot;
  std::size_t to_layer;
};

struct Parameter {
  std::string id;
  Tensor value;
};

// Directed acyclic network description plus its parameter store. Layers are
// stored in execution order; each writes exactly one new value slot.
class LayerGraph {
 public:
  LayerGraph() = default;
  explicit LayerGraph(ArchitectureSpec spec) : spec_(spec) {}

  const ArchitectureSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const std::vector<SkipEdge>& skip_edges() const { return skips_; }
  const std::vector<ResidualEdge>& residual_edges() const { return residuals_; }
  std::size_t slot_count() const { return slots_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  const Parameter& parameter(const std::string& id) const;

  std::size_t count_layers(Section section, std::size_t level, LayerRole role) const;

  // Deep copy of the parameter values.
  LayerGraph clone() const;

  // Builder API.
  std::size_t add_conv(Section section, std::size_t level, LayerRole role, const std::string& name,
                       std::size_t input, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                       std::size_t stride, std::size_t padding);
  std::size_t add_deconv(Section section, std::size_t level, const std::string& name, std::size_t input,
                         std::size_t in_ch, std::size_t out_ch, std::size_t factor);
  std::size_t add_relu(Section section, std::size_t level, const std::string& name, std::size_t input);
  std::size_t add_concat(Section section, std::size_t level, const std::string& name, std::size_t a,
                         std::size_t b);
  std::size_t add_add(Section section, std::size_t level, const std::string& name, std::size_t a,
                      std::size_t b);
  std::size_t add_softmax(const std::string& name, std::size_t input);
  void add_skip(std::size_t level, std::size_t from_slot, std::size_t to_layer);
  void add_residual(std::size_t level, std::size_t from_slot, std::size_t to_layer);

  // Layer index that produced a slot.
  std::size_t producer(std::size_t slot) const;

 private:
  std::size_t push(Layer layer);
  std::size_t add_param(const std::string& id, const Shape& shape);

  ArchitectureSpec spec_;
  std::vector<Layer> layers_;
  std::vector<SkipEdge> skips_;
  std::vector<ResidualEdge> residuals_;
  std::vector<Parameter> params_;
  std::size_t slots_ = 1;
};

// FRnet: one body conv per encoder level after the stride-2 down-sampling
// conv, stride-2 deconv up-sampling, concat skips, and a residual identity
// path around the two decoder convs at every level.
LayerGraph build_frnet(const ArchitectureSpec& spec);

// Baseline UNet with the same resamplers and head, two body convs per level,
// and no residual paths.
LayerGraph build_unet(const ArchitectureSpec& spec);

// Dispatches on spec.arch.
LayerGraph build_model(const ArchitectureSpec& spec);

// Glorot-uniform weights, zero biases.
void xavier_init(LayerGraph& graph, std::uint64_t seed);

double xavier_bound(const Shape& weight_shape);

// Class probabilities [N, num_classes, D, H, W].
Tensor forward(const LayerGraph& graph, const Tensor& input);

// Checkpoint: `path` holds a JSON manifest (spec plus parameter offset
// table), `path` + ".bin" the little-endian float64 payload.
void save_checkpoint(const LayerGraph& graph, const std::filesystem::path& path);
LayerGraph load_checkpoint(const std::filesystem::path& path);

}  // namespace frnet
