#include "frnet/frnet.h"

#include <string>
#include <variant>

#include <json.hpp>

#include "frnet/artifact.hpp"
#include "frnet/error.hpp"
#include "frnet/eval.hpp"
#include "frnet/losses.hpp"
#include "frnet/manifest.hpp"
#include "frnet/phantom.hpp"
#include "frnet/random.hpp"
#include "frnet/trainer.hpp"
#include "frnet/volume_io.hpp"
#include "io_util.hpp"

struct frnet_volume {
  frnet::AnyVolume value;
};

struct frnet_model {
  frnet::LayerGraph graph;
};

namespace {

thread_local std::string g_last_error;

class InvalidArgument : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class F>
frnet_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return FRNET_OK;
  } catch (const InvalidArgument& e) {
    g_last_error = e.what();
    return FRNET_ERROR_INVALID_ARGUMENT;
  } catch (const frnet::ShapeError& e) {
    g_last_error = e.what();
    return FRNET_ERROR_SHAPE;
  } catch (const frnet::ConfigError& e) {
    g_last_error = e.what();
    return FRNET_ERROR_CONFIG;
  } catch (const frnet::ContractError& e) {
    g_last_error = e.what();
    return FRNET_ERROR_CONTRACT;
  } catch (const frnet::IoError& e) {
    g_last_error = e.what();
    return FRNET_ERROR_IO;
  } catch (const frnet::NumericError& e) {
    g_last_error = e.what();
    return FRNET_ERROR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FRNET_ERROR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return FRNET_ERROR_INTERNAL;
  }
}

template <class T>
T* require(T* p, const char* name) {
  if (!p) throw InvalidArgument(std::string(name) + " must not be NULL");
  return p;
}

const frnet::RealVolume& as_real(const frnet_volume* v, const char* name) {
  require(v, name);
  if (const auto* r = std::get_if<frnet::RealVolume>(&v->value)) return *r;
  throw frnet::ContractError(std::string(name) + " must be a real64 volume");
}

const frnet::LabelVolume& as_labels(const frnet_volume* v, const char* name) {
  require(v, name);
  if (const auto* r = std::get_if<frnet::LabelVolume>(&v->value)) return *r;
  throw frnet::ContractError(std::string(name) + " must be a uint8 label volume");
}

frnet::Extents to_extents(uint32_t d, uint32_t h, uint32_t w) { return {d, h, w}; }

frnet::TrainConfig to_config(const frnet_train_options& o) {
  frnet::TrainConfig c;
  switch (o.arch) {
    case FRNET_ARCH_FRNET: c.arch.arch = frnet::ArchKind::frnet; break;
    case FRNET_ARCH_UNET: c.arch.arch = frnet::ArchKind::unet; break;
    default: throw InvalidArgument("unknown architecture code");
  }
  c.arch.levels = o.levels;
  c.arch.base_channels = o.base_channels;
  switch (o.loss) {
    case FRNET_LOSS_CE: c.loss.kind = frnet::LossKind::ce; break;
    case FRNET_LOSS_WCE: c.loss.kind = frnet::LossKind::wce; break;
    case FRNET_LOSS_FOCAL: c.loss.kind = frnet::LossKind::focal; break;
    case FRNET_LOSS_BOUNDARY: c.loss.kind = frnet::LossKind::boundary; break;
    default: throw InvalidArgument("unknown loss code");
  }
  c.loss.alpha = {o.alpha[0], o.alpha[1]};
  c.loss.gamma = o.gamma;
  c.loss.density_sigma = o.density_sigma;
  c.loss.density_floor = o.density_floor;
  c.adam = {o.learning_rate, o.beta1, o.beta2, o.epsilon};
  c.epochs = o.epochs;
  c.batch_size = o.batch_size;
  c.reorient = o.reorient != 0;
  c.resize = o.resize != 0;
  if (o.artifact_sigma_count > 0) {
    require(o.artifact_sigmas, "artifact_sigmas");
    c.artifact_sigmas.assign(o.artifact_sigmas, o.artifact_sigmas + o.artifact_sigma_count);
  }
  c.seeds = {o.seed_init, o.seed_order, o.seed_augment};
  c.checkpoint_every = o.checkpoint_every;
  return c;
}

}  // namespace

extern "C" {

const char* frnet_version(void) { return "1.0.0"; }

const char* frnet_last_error(void) { return g_last_error.c_str(); }

const char* frnet_status_string(frnet_status status) {
  switch (status) {
    case FRNET_OK: return "ok";
    case FRNET_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case FRNET_ERROR_SHAPE: return "shape error";
    case FRNET_ERROR_CONFIG: return "configuration error";
    case FRNET_ERROR_CONTRACT: return "contract violation";
    case FRNET_ERROR_IO: return "i/o error";
    case FRNET_ERROR_NUMERIC: return "numeric error";
    case FRNET_ERROR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

frnet_status frnet_volume_create_real(uint32_t depth, uint32_t height, uint32_t width, const double* values,
                                      frnet_volume** out) {
  return guarded([&] {
    require(out, "out");
    const auto e = to_extents(depth, height, width);
    frnet::RealVolume v(e);
    if (e.count() > 0) std::copy_n(require(values, "values"), e.count(), v.values().begin());
    *out = new frnet_volume{std::move(v)};
  });
}

frnet_status frnet_volume_create_labels(uint32_t depth, uint32_t height, uint32_t width, const uint8_t* values,
                                        frnet_volume** out) {
  return guarded([&] {
    require(out, "out");
    const auto e = to_extents(depth, height, width);
    frnet::LabelVolume v(e);
    if (e.count() > 0) std::copy_n(require(values, "values"), e.count(), v.values().begin());
    *out = new frnet_volume{std::move(v)};
  });
}

frnet_status frnet_volume_read(const char* path, frnet_volume** out) {
  return guarded([&] {
    require(out, "out");
    *out = new frnet_volume{frnet::read_volume(require(path, "path"))};
  });
}

frnet_status frnet_volume_write(const frnet_volume* volume, const char* path) {
  return guarded([&] {
    require(volume, "volume");
    require(path, "path");
    std::visit([&](const auto& v) { frnet::write_volume(path, v); }, volume->value);
  });
}

void frnet_volume_free(frnet_volume* volume) { delete volume; }

frnet_status frnet_volume_info(const frnet_volume* volume, uint32_t extents[3], frnet_dtype* dtype) {
  return guarded([&] {
    require(volume, "volume");
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if (extents) {
            extents[0] = static_cast<uint32_t>(v.extents().depth);
            extents[1] = static_cast<uint32_t>(v.extents().height);
            extents[2] = static_cast<uint32_t>(v.extents().width);
          }
          if (dtype) {
            if constexpr (std::is_same_v<T, frnet::RealVolume>) *dtype = FRNET_DTYPE_REAL64;
            else if constexpr (std::is_same_v<T, frnet::LabelVolume>) *dtype = FRNET_DTYPE_UINT8;
            else *dtype = FRNET_DTYPE_COMPLEX;
          }
        },
        volume->value);
  });
}

frnet_status frnet_volume_copy_real(const frnet_volume* volume, double* out, size_t count) {
  return guarded([&] {
    const auto& v = as_real(volume, "volume");
    if (count != v.size()) throw frnet::ShapeError("buffer holds " + std::to_string(count) + " values, volume has " + std::to_string(v.size()));
    std::copy(v.values().begin(), v.values().end(), require(out, "out"));
  });
}

frnet_status frnet_volume_copy_labels(const frnet_volume* volume, uint8_t* out, size_t count) {
  return guarded([&] {
    const auto& v = as_labels(volume, "volume");
    if (count != v.size()) throw frnet::ShapeError("buffer holds " + std::to_string(count) + " values, volume has " + std::to_string(v.size()));
    std::copy(v.values().begin(), v.values().end(), require(out, "out"));
  });
}

frnet_status frnet_simulate_motion(const frnet_volume* input, double sigma, uint64_t seed, char readout,
                                   frnet_volume** out) {
  return guarded([&] {
    require(out, "out");
    frnet::ArtifactConfig config;
    config.sigma = sigma;
    config.seed = seed;
    if (readout != 'x' && readout != 'y' && readout != 'z') throw InvalidArgument("readout must be 'x', 'y' or 'z'");
    config.readout = frnet::parse_axis(std::string(1, readout));
    *out = new frnet_volume{frnet::simulate_motion(as_real(input, "input"), config)};
  });
}

frnet_status frnet_corrupt_dataset(const char* manifest_in, const double* sigmas, size_t sigma_count, uint64_t seed,
                                   const char* out_dir, const char* manifest_out, size_t* error_count) {
  return guarded([&] {
    auto manifest = frnet::load_manifest(require(manifest_in, "manifest_in"));
    std::vector<double> list;
    if (sigma_count > 0) list.assign(require(sigmas, "sigmas"), sigmas + sigma_count);
    const auto result = frnet::corrupt_dataset(manifest, list, seed, require(out_dir, "out_dir"));
    frnet::save_manifest(manifest, require(manifest_out, "manifest_out"));
    if (error_count) *error_count = result.errors.size();
  });
}

frnet_status frnet_extract_boundary(const frnet_volume* mask, frnet_volume** out) {
  return guarded([&] {
    require(out, "out");
    *out = new frnet_volume{frnet::extract_boundary(as_labels(mask, "mask"))};
  });
}

frnet_status frnet_density_map(const frnet_volume* mask, double sigma, double floor, frnet_volume** out,
                               int* empty_boundary) {
  return guarded([&] {
    require(out, "out");
    auto result = frnet::density_map(frnet::extract_boundary(as_labels(mask, "mask")), sigma, floor);
    if (empty_boundary) *empty_boundary = result.empty_boundary ? 1 : 0;
    *out = new frnet_volume{std::move(result.map)};
  });
}

frnet_status frnet_dice(const frnet_volume* prediction, const frnet_volume* truth, double* out) {
  return guarded([&] {
    *require(out, "out") = frnet::dice(as_labels(prediction, "prediction"), as_labels(truth, "truth"));
  });
}

void frnet_phantom_options_init(frnet_phantom_options* options) {
  if (!options) return;
  options->count = 40;
  options->extent = 32;
  options->groups = "4";
  options->seed = 0;
}

frnet_status frnet_phantom_generate(const frnet_phantom_options* options, const char* out_dir) {
  return guarded([&] {
    require(options, "options");
    const auto families = frnet::parse_groups(options->groups ? options->groups : "4");
    frnet::generate_dataset(families, options->count, options->extent, options->seed, require(out_dir, "out_dir"));
  });
}

frnet_status frnet_manifest_split(const char* manifest_path, double test_fraction, uint64_t seed) {
  return guarded([&] {
    auto manifest = frnet::load_manifest(require(manifest_path, "manifest_path"));
    frnet::make_split(manifest, test_fraction, seed);
    frnet::save_manifest(manifest, manifest_path);
  });
}

void frnet_train_options_init(frnet_train_options* o) {
  if (!o) return;
  const frnet::TrainConfig c;
  *o = frnet_train_options{};
  o->arch = FRNET_ARCH_FRNET;
  o->levels = c.arch.levels;
  o->base_channels = c.arch.base_channels;
  o->loss = FRNET_LOSS_BOUNDARY;
  o->alpha[0] = c.loss.alpha[0];
  o->alpha[1] = c.loss.alpha[1];
  o->gamma = c.loss.gamma;
  o->density_sigma = c.loss.density_sigma;
  o->density_floor = c.loss.density_floor;
  o->learning_rate = c.adam.learning_rate;
  o->beta1 = c.adam.beta1;
  o->beta2 = c.adam.beta2;
  o->epsilon = c.adam.epsilon;
  o->epochs = c.epochs;
  o->batch_size = c.batch_size;
  o->reorient = c.reorient;
  o->resize = c.resize;
  o->seed_init = c.seeds.init;
  o->seed_order = c.seeds.data_order;
  o->seed_augment = c.seeds.augmentation;
  o->checkpoint_every = c.checkpoint_every;
}

void frnet_train_options_seed(frnet_train_options* o, uint64_t seed) {
  if (!o) return;
  o->seed_init = frnet::mix_seed(seed, 1);
  o->seed_order = frnet::mix_seed(seed, 2);
  o->seed_augment = frnet::mix_seed(seed, 3);
}

frnet_status frnet_train(const frnet_train_options* options, const char* manifest_path, const char* out_dir,
                         frnet_record_fn on_record, void* user) {
  return guarded([&] {
    const auto config = to_config(*require(options, "options"));
    const auto manifest = frnet::load_manifest(require(manifest_path, "manifest_path"));
    const std::filesystem::path dir(require(out_dir, "out_dir"));
    std::filesystem::create_directories(dir);

    frnet::TrainHooks hooks;
    hooks.checkpoint_dir = dir;
    if (on_record) {
      hooks.on_step = [&](const frnet::StepRecord& s) {
        frnet::TrainHistory h;
        h.steps.push_back(s);
        std::string line = h.to_jsonl();
        line.pop_back();
        on_record(line.c_str(), user);
      };
      hooks.on_epoch = [&](const frnet::EpochRecord& e) {
        frnet::TrainHistory h;
        h.epochs.push_back(e);
        std::string line = h.to_jsonl();
        line.pop_back();
        on_record(line.c_str(), user);
      };
    }
    const auto result = frnet::train(config, manifest, hooks);
    frnet::detail::write_file_atomic(dir / "history.jsonl", result.history.to_jsonl(false));
  });
}

frnet_status frnet_cross_validate(const frnet_train_options* candidates, size_t candidate_count, size_t k,
                                  uint64_t seed, const char* manifest_path, const char* out_dir, size_t* selected) {
  return guarded([&] {
    require(candidates, "candidates");
    std::vector<frnet::TrainConfig> configs;
    for (size_t i = 0; i < candidate_count; ++i) configs.push_back(to_config(candidates[i]));
    const auto manifest = frnet::load_manifest(require(manifest_path, "manifest_path"));
    const std::filesystem::path dir(require(out_dir, "out_dir"));

    const auto result = frnet::cross_validate(configs, manifest, k, seed);

    nlohmann::json report;
    report["k"] = k;
    report["folds"] = result.folds;
    auto cands = nlohmann::json::array();
    for (const auto& c : result.candidates) {
      const auto& cfg = configs[c.candidate];
      cands.push_back({{"candidate", c.candidate},
                       {"arch", frnet::to_string(cfg.arch.arch)},
                       {"loss", frnet::to_string(cfg.loss.kind)},
                       {"fold_dice", c.fold_dice},
                       {"mean_dice", c.mean_dice},
                       {"variance", c.variance}});
    }
    report["candidates"] = std::move(cands);
    report["selected_candidate"] = result.selected_candidate;
    report["selected_fold"] = result.selected_fold;
    report["tie_break"] = "highest mean fold Dice, then lowest fold variance, then candidate order";
    frnet::detail::write_file_atomic(dir / "cv_report.json", report.dump(2) + "\n");
    frnet::save_checkpoint(result.selected_model, dir / "model.json");
    if (selected) *selected = result.selected_candidate;
  });
}

frnet_status frnet_model_load(const char* checkpoint_path, frnet_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = new frnet_model{frnet::load_checkpoint(require(checkpoint_path, "checkpoint_path"))};
  });
}

void frnet_model_free(frnet_model* model) { delete model; }

frnet_status frnet_model_parameter_count(const frnet_model* model, size_t* out) {
  return guarded([&] { *require(out, "out") = require(model, "model")->graph.parameter_count(); });
}

frnet_status frnet_model_segment(const frnet_model* model, const frnet_volume* input, frnet_volume** mask) {
  return guarded([&] {
    require(mask, "mask");
    *mask = new frnet_volume{frnet::segment(require(model, "model")->graph, as_real(input, "input"))};
  });
}

frnet_status frnet_evaluate(const frnet_model* model, const char* manifest_path, const char* split,
                            const char* report_path, double* overall_mean, int* complete) {
  return guarded([&] {
    require(model, "model");
    const auto manifest = frnet::load_manifest(require(manifest_path, "manifest_path"));
    const auto report = frnet::evaluate(model->graph, manifest, split ? split : frnet::kSplitTest);
    if (report_path) frnet::detail::write_file_atomic(report_path, report.to_json());
    if (overall_mean) *overall_mean = report.overall.mean;
    if (complete) *complete = report.complete ? 1 : 0;
  });
}

}  // extern "C"
