#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "frnet/losses.hpp"
#include "frnet/manifest.hpp"
#include "frnet/model.hpp"
#include "frnet/phantom.hpp"

namespace frnet {

struct AdamOptions {
  double learning_rate = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update of a single buffer at step t >= 1.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 const AdamOptions& options, std::uint64_t t);

// Advances state.step and updates every parameter from its gradient.
// Parameters without a gradient are treated as having a zero gradient.
void adam_step(std::span<Parameter> params, AdamState& state, const AdamOptions& options);

struct TrainSeeds {
  std::uint64_t init = 1;
  std::uint64_t data_order = 2;
  std::uint64_t augmentation = 3;
};

struct TrainConfig {
  ArchitectureSpec arch;
  LossConfig loss;
  AdamOptions adam;
  std::size_t epochs = 10;
  std::size_t batch_size = 1;
  bool reorient = false;
  bool resize = false;
  // Each sample is replaced, with equal probability, by the original or one
  // motion-corrupted copy per listed sigma.
  std::vector<double> artifact_sigmas;
  TrainSeeds seeds;
  // Epochs between checkpoints in the output directory; 0 = final only.
  std::size_t checkpoint_every = 0;

  void validate() const;
};

struct StepRecord {
  std::size_t epoch;
  std::size_t step;
  double loss;
};

struct EpochRecord {
  std::size_t epoch;
  // Mean Dice over the validation entries, or the training entries when no
  // validation entries were given.
  double dice;
  bool on_validation;
  double seconds;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  // Line-delimited JSON, one record per step and per epoch.
  std::string to_jsonl(bool include_timing = true) const;
};

struct TrainResult {
  LayerGraph model;
  TrainHistory history;
};

// Loaded, unaugmented training example.
struct Sample {
  RealVolume volume;
  LabelVolume mask;
  std::string group;
};

std::vector<Sample> load_samples(const DatasetManifest& manifest, std::span<const std::size_t> indices);

// Zero-mean, unit-variance input tensor [1, 1, D, H, W].
Tensor volume_to_input(const RealVolume& volume);

// Argmax over channels, ties towards class 0.
LabelVolume segment(const LayerGraph& model, const RealVolume& volume);

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints written
};

TrainResult train(const TrainConfig& config, std::span<const Sample> training, std::span<const Sample> validation = {},
                  const TrainHooks& hooks = {});

// Trains on the manifest's train split.
TrainResult train(const TrainConfig& config, const DatasetManifest& manifest, const TrainHooks& hooks = {});

struct FoldReport {
  std::size_t candidate;
  std::size_t fold;
  std::vector<std::size_t> validation_entries;
  double dice;
};

struct CandidateReport {
  std::size_t candidate;
  std::vector<double> fold_dice;
  double mean_dice;
  double variance;
};

struct CrossValidationResult {
  std::vector<std::vector<std::size_t>> folds;  // manifest indices
  std::vector<FoldReport> folds_run;
  std::vector<CandidateReport> candidates;
  std::size_t selected_candidate;
  std::size_t selected_fold;
  LayerGraph selected_model;
};

// Seeded partition of `entries` into k folds whose sizes differ by at most 1.
std::vector<std::vector<std::size_t>> make_folds(std::span<const std::size_t> entries, std::size_t k,
                                                 std::uint64_t seed);

// Trains every candidate on every fold, scores by mean fold validation Dice
// and picks the best (ties: lower fold variance, then earlier candidate).
// The selected checkpoint is that candidate's best-scoring fold model.
CrossValidationResult cross_validate(std::span<const TrainConfig> candidates, const DatasetManifest& manifest,
                                     std::size_t k, std::uint64_t seed);

}  // namespace frnet
