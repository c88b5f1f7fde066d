#include "frnet/model.hpp"

#include <cmath>

#include "frnet/error.hpp"
#include "frnet/random.hpp"

namespace frnet {

std::string to_string(ArchKind kind) { return kind == ArchKind::frnet ? "frnet" : "unet"; }

ArchKind parse_arch(const std::string& name) {
  if (name == "frnet") return ArchKind::frnet;
  if (name == "unet") return ArchKind::unet;
  throw ConfigError("unknown architecture '" + name + "' (expected frnet or unet)");
}

void ArchitectureSpec::validate() const {
  if (levels < 1) throw ConfigError("architecture needs at least one level");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
}

void ArchitectureSpec::check_extents(std::size_t depth, std::size_t height, std::size_t width) const {
  const std::size_t factor = std::size_t{1} << levels;
  const std::size_t extents[] = {depth, height, width};
  const char* names[] = {"depth", "height", "width"};
  for (int a = 0; a < 3; ++a) {
    if (extents[a] == 0 || extents[a] % factor != 0) {
      throw ConfigError(std::string(names[a]) + " extent " + std::to_string(extents[a]) +
                        " is not divisible by 2^levels = " + std::to_string(factor));
    }
  }
}

std::size_t LayerGraph::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

const Parameter& LayerGraph::parameter(const std::string& id) const {
  for (const auto& p : params_) {
    if (p.id == id) return p;
  }
  throw ContractError("no parameter named '" + id + "'");
}

std::size_t LayerGraph::count_layers(Section section, std::size_t level, LayerRole role) const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    if (layer.section == section && layer.level == level && layer.role == role) ++n;
  }
  return n;
}

LayerGraph LayerGraph::clone() const {
  LayerGraph copy = *this;
  for (auto& p : copy.params_) p.value = p.value.detach();
  return copy;
}

std::size_t LayerGraph::push(Layer layer) {
  layer.output = slots_++;
  layers_.push_back(std::move(layer));
  return layers_.back().output;
}

std::size_t LayerGraph::add_param(const std::string& id, const Shape& shape) {
  params_.push_back({id, Tensor::zeros(shape, true)});
  return params_.size() - 1;
}

std::size_t LayerGraph::add_conv(Section section, std::size_t level, LayerRole role, const std::string& name,
                                 std::size_t input, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                                 std::size_t stride, std::size_t padding) {
  Layer l{LayerKind::conv, role, section, level, name};
  l.input = input;
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  l.weight_param = add_param(name + ".weight", {out_ch, in_ch, kernel, kernel, kernel});
  l.bias_param = add_param(name + ".bias", {out_ch});
  return push(std::move(l));
}

std::size_t LayerGraph::add_deconv(Section section, std::size_t level, const std::string& name,
                                   std::size_t input, std::size_t in_ch, std::size_t out_ch, std::size_t factor) {
  Layer l{LayerKind::deconv, LayerRole::upsample, section, level, name};
  l.input = input;
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel = factor;
  l.stride = factor;
  l.weight_param = add_param(name + ".weight", {in_ch, out_ch, factor, factor, factor});
  l.bias_param = add_param(name + ".bias", {out_ch});
  return push(std::move(l));
}

std::size_t LayerGraph::add_relu(Section section, std::size_t level, const std::string& name, std::size_t input) {
  Layer l{LayerKind::relu, LayerRole::activation, section, level, name};
  l.input = input;
  return push(std::move(l));
}

std::size_t LayerGraph::add_concat(Section section, std::size_t level, const std::string& name, std::size_t a,
                                   std::size_t b) {
  Layer l{LayerKind::concat, LayerRole::merge, section, level, name};
  l.input = a;
  l.input_b = b;
  return push(std::move(l));
}

std::size_t LayerGraph::add_add(Section section, std::size_t level, const std::string& name, std::size_t a,
                                std::size_t b) {
  Layer l{LayerKind::add, LayerRole::merge, section, level, name};
  l.input = a;
  l.input_b = b;
  return push(std::move(l));
}

std::size_t LayerGraph::add_softmax(const std::string& name, std::size_t input) {
  Layer l{LayerKind::softmax, LayerRole::activation, Section::head, 0, name};
  l.input = input;
  return push(std::move(l));
}

void LayerGraph::add_skip(std::size_t level, std::size_t from_slot, std::size_t to_layer) {
  skips_.push_back({level, from_slot, to_layer});
}

void LayerGraph::add_residual(std::size_t level, std::size_t from_slot, std::size_t to_layer) {
  residuals_.push_back({level, from_slot, to_layer});
}

std::size_t LayerGraph::producer(std::size_t slot) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].output == slot) return i;
  }
  throw ContractError("slot " + std::to_string(slot) + " has no producing layer");
}

namespace {

std::string level_name(const char* prefix, std::size_t level, const char* suffix) {
  return std::string(prefix) + std::to_string(level) + "." + suffix;
}

// conv + relu
std::size_t conv_block(LayerGraph& g, Section section, std::size_t level, LayerRole role, const std::string& name,
                       std::size_t input, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                       std::size_t stride, std::size_t padding) {
  const std::size_t c = g.add_conv(section, level, role, name, input, in_ch, out_ch, kernel, stride, padding);
  return g.add_relu(section, level, name + ".relu", c);
}

LayerGraph build_encoder_decoder(const ArchitectureSpec& spec, std::size_t body_convs, bool residual_decoder) {
  spec.validate();
  LayerGraph g(spec);
  const std::size_t L = spec.levels;
  std::size_t ch = spec.base_channels;

  std::vector<std::size_t> skip_slots(L);
  std::size_t cur = conv_block(g, Section::stem, 0, LayerRole::body, "stem.conv1", 0, spec.in_channels, ch, 3, 1, 1);
  for (std::size_t i = 1; i < body_convs; ++i) {
    cur = conv_block(g, Section::stem, 0, LayerRole::body, "stem.conv" + std::to_string(i + 1), cur, ch, ch, 3, 1, 1);
  }
  skip_slots[0] = cur;

  for (std::size_t level = 1; level <= L; ++level) {
    cur = conv_block(g, Section::encoder, level, LayerRole::downsample, level_name("enc", level, "down"), cur, ch,
                     2 * ch, 2, 2, 0);
    ch *= 2;
    for (std::size_t i = 0; i < body_convs; ++i) {
      cur = conv_block(g, Section::encoder, level, LayerRole::body,
                       level_name("enc", level, ("conv" + std::to_string(i + 1)).c_str()), cur, ch, ch, 3, 1, 1);
    }
    if (level < L) skip_slots[level] = cur;
  }

  for (std::size_t level = L; level >= 1; --level) {
    const std::size_t up = g.add_deconv(Section::decoder, level, level_name("dec", level, "up"), cur, ch, ch / 2, 2);
    const std::size_t up_act = g.add_relu(Section::decoder, level, level_name("dec", level, "up.relu"), up);
    ch /= 2;
    const std::size_t merged =
        g.add_concat(Section::decoder, level, level_name("dec", level, "concat"), up_act, skip_slots[level - 1]);
    g.add_skip(level, skip_slots[level - 1], g.producer(merged));

    std::size_t body = conv_block(g, Section::decoder, level, LayerRole::body, level_name("dec", level, "conv1"),
                                  merged, 2 * ch, ch, 3, 1, 1);
    body = conv_block(g, Section::decoder, level, LayerRole::body, level_name("dec", level, "conv2"), body, ch, ch,
                      3, 1, 1);
    if (residual_decoder) {
      // The concat output has 2*ch channels, so the identity path needs a
      // 1x1x1 projection down to ch.
      const std::size_t proj = g.add_conv(Section::decoder, level, LayerRole::projection,
                                          level_name("dec", level, "proj"), merged, 2 * ch, ch, 1, 1, 0);
      body = g.add_add(Section::decoder, level, level_name("dec", level, "residual"), body, proj);
      g.add_residual(level, merged, g.producer(body));
    }
    cur = body;
  }

  const std::size_t logits =
      g.add_conv(Section::head, 0, LayerRole::classifier, "head.conv", cur, ch, spec.num_classes, 1, 1, 0);
  g.add_softmax("head.softmax", logits);
  return g;
}

}  // namespace

LayerGraph build_frnet(const ArchitectureSpec& spec) {
  if (spec.arch != ArchKind::frnet) throw ConfigError("build_frnet called with a non-frnet spec");
  return build_encoder_decoder(spec, 1, true);
}

LayerGraph build_unet(const ArchitectureSpec& spec) {
  if (spec.arch != ArchKind::unet) throw ConfigError("build_unet called with a non-unet spec");
  return build_encoder_decoder(spec, 2, false);
}

LayerGraph build_model(const ArchitectureSpec& spec) {
  return spec.arch == ArchKind::frnet ? build_frnet(spec) : build_unet(spec);
}

double xavier_bound(const Shape& weight_shape) {
  if (weight_shape.size() < 2) throw ShapeError("xavier_bound: weight needs rank >= 2");
  std::size_t receptive = 1;
  for (std::size_t a = 2; a < weight_shape.size(); ++a) receptive *= weight_shape[a];
  const double fan_in = static_cast<double>(weight_shape[1] * receptive);
  const double fan_out = static_cast<double>(weight_shape[0] * receptive);
  return std::sqrt(6.0 / (fan_in + fan_out));
}

void xavier_init(LayerGraph& graph, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : graph.layers()) {
    if (layer.kind != LayerKind::conv && layer.kind != LayerKind::deconv) continue;
    auto& weight = graph.parameters()[layer.weight_param].value;
    auto& bias = graph.parameters()[layer.bias_param].value;
    const double bound = xavier_bound(weight.shape());
    for (auto& w : weight.mutable_data()) w = rng.uniform(-bound, bound);
    for (auto& b : bias.mutable_data()) b = 0.0;
  }
}

Tensor forward(const LayerGraph& graph, const Tensor& input) {
  const auto& spec = graph.spec();
  if (input.rank() != 5) throw ShapeError("forward: input must be [N, C, D, H, W], got " + shape_string(input.shape()));
  if (input.dim(1) != spec.in_channels) {
    throw ShapeError("forward: channel axis has " + std::to_string(input.dim(1)) + " channels, model expects " +
                     std::to_string(spec.in_channels));
  }
  spec.check_extents(input.dim(2), input.dim(3), input.dim(4));

  const auto& params = graph.parameters();
  std::vector<Tensor> slots(graph.slot_count());
  slots[0] = input;
  for (const auto& layer : graph.layers()) {
    const Tensor& x = slots[layer.input];
    Tensor y;
    switch (layer.kind) {
      case LayerKind::conv:
        y = conv3d(x, params[layer.weight_param].value, params[layer.bias_param].value, layer.stride, layer.padding);
        break;
      case LayerKind::deconv:
        y = conv_transpose3d(x, params[layer.weight_param].value, params[layer.bias_param].value, layer.stride);
        break;
      case LayerKind::relu:
        y = relu(x);
        break;
      case LayerKind::concat:
        y = concat_channels(x, slots[layer.input_b]);
        break;
      case LayerKind::add:
        y = add(x, slots[layer.input_b]);
        break;
      case LayerKind::softmax:
        y = softmax_channels(x);
        break;
    }
    slots[layer.output] = std::move(y);
  }
  return slots[graph.layers().back().output];
}

}  // namespace frnet
