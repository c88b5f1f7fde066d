#include "frnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "frnet/artifact.hpp"
#include "frnet/error.hpp"
#include "frnet/eval.hpp"
#include "frnet/random.hpp"
#include "frnet/volume_io.hpp"

namespace frnet {

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamOptions& options, std::uint64_t t) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ContractError("adam_update: parameter, gradient and moment buffers differ in size");
  }
  if (t < 1) throw ContractError("adam_update: step counter starts at 1");
  const double b1 = options.beta1, b2 = options.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    param[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
  }
}

void adam_step(std::span<Parameter> params, AdamState& state, const AdamOptions& options) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value.numel(), 0.0);
      state.second_moment.emplace_back(p.value.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: optimizer state tracks a different parameter set");
  }
  ++state.step;
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value;
    if (state.first_moment[i].size() != p.numel()) {
      throw ContractError("adam_step: moment buffer shape mismatch for " + params[i].id);
    }
    std::span<const double> grad;
    if (p.has_grad()) {
      grad = p.grad();
    } else {
      zeros.assign(p.numel(), 0.0);
      grad = zeros;
    }
    adam_update(p.mutable_data(), grad, state.first_moment[i], state.second_moment[i], options, state.step);
  }
}

void TrainConfig::validate() const {
  arch.validate();
  loss.validate(arch.num_classes);
  if (!(adam.learning_rate >= 0.0)) throw ConfigError("learning rate must be nonnegative");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  for (double s : artifact_sigmas) {
    if (!(s >= 0.0)) throw ConfigError("artifact sigmas must be nonnegative");
  }
}

std::string TrainHistory::to_jsonl(bool include_timing) const {
  std::string out;
  for (const auto& s : steps) {
    out += nlohmann::json{{"type", "step"}, {"epoch", s.epoch}, {"step", s.step}, {"loss", s.loss}}.dump() + "\n";
  }
  for (const auto& e : epochs) {
    nlohmann::json j{{"type", "epoch"}, {"epoch", e.epoch}, {"dice", e.dice}, {"on_validation", e.on_validation}};
    if (include_timing) j["seconds"] = e.seconds;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest, std::span<const std::size_t> indices) {
  std::vector<Sample> samples;
  samples.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto& e = manifest.entries.at(i);
    samples.push_back(
        {read_real_volume(manifest.resolve(e.volume)), read_binary_mask(manifest.resolve(e.mask)), e.group});
    require_same_extents(samples.back().volume.extents(), samples.back().mask.extents(), "manifest entry");
  }
  return samples;
}

Tensor volume_to_input(const RealVolume& volume) {
  const auto& e = volume.extents();
  const double n = static_cast<double>(volume.size());
  double mean = 0.0;
  for (double v : volume.values()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : volume.values()) var += (v - mean) * (v - mean);
  const double stddev = std::sqrt(var / n);
  const double inv = stddev > 0.0 ? 1.0 / stddev : 1.0;
  std::vector<double> data(volume.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = (volume[i] - mean) * inv;
  return Tensor::from_data({1, 1, e.depth, e.height, e.width}, std::move(data));
}

LabelVolume segment(const LayerGraph& model, const RealVolume& volume) {
  const NoGradGuard no_grad;
  const Tensor probs = forward(model, volume_to_input(volume));
  const auto& e = volume.extents();
  const std::size_t plane = e.count();
  const std::size_t classes = probs.dim(1);
  const auto p = probs.data();
  LabelVolume out(e, 0);
  for (std::size_t v = 0; v < plane; ++v) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (p[c * plane + v] > p[best * plane + v]) best = c;
    }
    out[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

namespace {

double mean_dice(const LayerGraph& model, std::span<const Sample> samples) {
  double total = 0.0;
  for (const auto& s : samples) total += dice(segment(model, s.volume), s.mask);
  return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

Sample prepare(const TrainConfig& config, const Sample& source, std::uint64_t seed) {
  Sample s = source;
  Rng rng(seed);
  if (config.reorient || config.resize) {
    AugmentOptions options;
    options.reorient = config.reorient;
    options.resize = config.resize;
    Phantom out = augment(s.volume, s.mask, rng.next_u64(), options);
    s.volume = std::move(out.volume);
    s.mask = std::move(out.mask);
  }
  if (!config.artifact_sigmas.empty()) {
    const std::size_t choice = rng.below(config.artifact_sigmas.size() + 1);
    if (choice > 0) {
      ArtifactConfig artifact;
      artifact.sigma = config.artifact_sigmas[choice - 1];
      artifact.seed = rng.next_u64();
      s.volume = simulate_motion(s.volume, artifact);
    }
  }
  return s;
}

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const Sample> training, std::span<const Sample> validation,
                  const TrainHooks& hooks) {
  config.validate();
  if (training.empty()) throw ConfigError("training set is empty");
  const Extents extents = training.front().volume.extents();
  config.arch.check_extents(extents.depth, extents.height, extents.width);
  for (const auto& s : training) {
    require_same_extents(s.volume.extents(), extents, "training volume");
    require_same_extents(s.mask.extents(), extents, "training mask");
  }

  TrainResult result{build_model(config.arch), {}};
  LayerGraph& model = result.model;
  xavier_init(model, config.seeds.init);
  AdamState state;
  Rng order_rng(config.seeds.data_order);

  std::vector<std::size_t> order(training.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[order_rng.below(i + 1)]);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<LabelVolume> labels;
      std::vector<DensityMap> density;
      std::vector<double> input_data;
      input_data.reserve(count * extents.count());
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t idx = order[start + b];
        Sample s = prepare(config, training[idx], mix_seed(config.seeds.augmentation, epoch, idx));
        const Tensor x = volume_to_input(s.volume);
        input_data.insert(input_data.end(), x.data().begin(), x.data().end());
        if (config.loss.kind == LossKind::boundary) density.push_back(boundary_density(s.mask, config.loss).map);
        labels.push_back(std::move(s.mask));
      }
      const Tensor input =
          Tensor::from_data({count, 1, extents.depth, extents.height, extents.width}, std::move(input_data));
      const Tensor probs = forward(model, input);
      const Tensor loss = compute_loss(config.loss, probs, labels, density);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite " + to_string(config.loss.kind) + " loss at step " + std::to_string(step) +
                           " (epoch " + std::to_string(epoch) + ")");
      }
      loss.backward();
      adam_step(model.parameters(), state, config.adam);
      for (auto& p : model.parameters()) p.value.zero_grad();

      result.history.steps.push_back({epoch, step, value});
      if (hooks.on_step) hooks.on_step(result.history.steps.back());
      ++step;
    }

    EpochRecord record{epoch, 0.0, !validation.empty(), 0.0};
    record.dice = validation.empty() ? mean_dice(model, training) : mean_dice(model, validation);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);

    if (!hooks.checkpoint_dir.empty()) {
      const bool last = epoch + 1 == config.epochs;
      if (last) {
        save_checkpoint(model, hooks.checkpoint_dir / "model.json");
      } else if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) {
        save_checkpoint(model, hooks.checkpoint_dir / ("model_epoch" + std::to_string(epoch + 1) + ".json"));
      }
    }
  }
  return result;
}

namespace {

std::vector<std::size_t> training_indices(const DatasetManifest& manifest) {
  auto indices = manifest.indices_with_split(kSplitTrain);
  if (indices.empty()) {
    // An unsplit manifest trains on everything.
    const bool unsplit = std::all_of(manifest.entries.begin(), manifest.entries.end(),
                                     [](const ManifestEntry& e) { return e.split.empty(); });
    if (unsplit) {
      indices.resize(manifest.entries.size());
      std::iota(indices.begin(), indices.end(), std::size_t{0});
    }
  }
  return indices;
}

}  // namespace

TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const TrainHooks& hooks) {
  const auto indices = training_indices(manifest);
  if (indices.empty()) throw ConfigError("manifest has no training entries");
  const auto samples = load_samples(manifest, indices);
  const auto val_indices = manifest.indices_with_split("val");
  const auto validation = load_samples(manifest, val_indices);
  return train(config, samples, validation, hooks);
}

std::vector<std::vector<std::size_t>> make_folds(std::span<const std::size_t> entries, std::size_t k,
                                                 std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs k >= 2");
  if (k > entries.size()) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds the " + std::to_string(entries.size()) +
                      " training entries");
  }
  std::vector<std::size_t> shuffled(entries.begin(), entries.end());
  Rng rng(seed);
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.below(i + 1)]);
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = shuffled.size() / k, extra = shuffled.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(shuffled.begin() + static_cast<long>(pos), shuffled.begin() + static_cast<long>(pos + size));
    pos += size;
  }
  return folds;
}

CrossValidationResult cross_validate(std::span<const TrainConfig> candidates, const DatasetManifest& manifest,
                                     std::size_t k, std::uint64_t seed) {
  if (candidates.empty()) throw ConfigError("cross-validation needs at least one candidate configuration");
  const auto indices = training_indices(manifest);
  if (indices.size() < 2) throw ConfigError("cross-validation needs at least 2 training entries");

  CrossValidationResult result;
  result.folds = make_folds(indices, k, seed);
  const auto all = load_samples(manifest, indices);
  auto position = [&](std::size_t manifest_index) {
    return static_cast<std::size_t>(std::find(indices.begin(), indices.end(), manifest_index) - indices.begin());
  };

  std::vector<std::vector<LayerGraph>> models(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    CandidateReport report{c, {}, 0.0, 0.0};
    for (std::size_t f = 0; f < k; ++f) {
      std::vector<Sample> train_set, val_set;
      for (std::size_t g = 0; g < k; ++g) {
        for (std::size_t idx : result.folds[g]) (g == f ? val_set : train_set).push_back(all[position(idx)]);
      }
      TrainResult trained = train(candidates[c], train_set, val_set);
      const double score = mean_dice(trained.model, val_set);
      result.folds_run.push_back({c, f, result.folds[f], score});
      report.fold_dice.push_back(score);
      models[c].push_back(std::move(trained.model));
    }
    const double n = static_cast<double>(report.fold_dice.size());
    for (double d : report.fold_dice) report.mean_dice += d;
    report.mean_dice /= n;
    for (double d : report.fold_dice) report.variance += (d - report.mean_dice) * (d - report.mean_dice);
    report.variance /= n;
    result.candidates.push_back(std::move(report));
  }

  std::size_t best = 0;
  for (std::size_t c = 1; c < result.candidates.size(); ++c) {
    const auto& a = result.candidates[c];
    const auto& b = result.candidates[best];
    if (a.mean_dice > b.mean_dice || (a.mean_dice == b.mean_dice && a.variance < b.variance)) best = c;
  }
  const auto& dices = result.candidates[best].fold_dice;
  const std::size_t fold =
      static_cast<std::size_t>(std::max_element(dices.begin(), dices.end()) - dices.begin());
  result.selected_candidate = best;
  result.selected_fold = fold;
  result.selected_model = std::move(models[best][fold]);
  return result;
}

}  // namespace frnet
