/*
 * C interface to the frnet segmentation toolkit.
 *
 * Every fallible call returns an frnet_status. On failure a human-readable
 * message is available from frnet_last_error() on the calling thread until
 * the next frnet call on that thread. Objects are opaque handles owned by the
 * caller and released with the matching *_free function (NULL is accepted).
 */
#ifndef FRNET_FRNET_H_
#define FRNET_FRNET_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FRNET_BUILDING_LIBRARY)
#    define FRNET_API __declspec(dllexport)
#  else
#    define FRNET_API __declspec(dllimport)
#  endif
#else
#  define FRNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum frnet_status {
  FRNET_OK = 0,
  FRNET_ERROR_INVALID_ARGUMENT = 1, /* null handle or out-of-range enum */
  FRNET_ERROR_SHAPE = 2,
  FRNET_ERROR_CONFIG = 3,
  FRNET_ERROR_CONTRACT = 4,
  FRNET_ERROR_IO = 5,
  FRNET_ERROR_NUMERIC = 6,
  FRNET_ERROR_INTERNAL = 7
} frnet_status;

typedef enum frnet_dtype {
  FRNET_DTYPE_REAL64 = 1,
  FRNET_DTYPE_UINT8 = 2,
  FRNET_DTYPE_COMPLEX = 3
} frnet_dtype;

typedef enum frnet_arch { FRNET_ARCH_FRNET = 0, FRNET_ARCH_UNET = 1 } frnet_arch;

typedef enum frnet_loss {
  FRNET_LOSS_CE = 0,
  FRNET_LOSS_WCE = 1,
  FRNET_LOSS_FOCAL = 2,
  FRNET_LOSS_BOUNDARY = 3
} frnet_loss;

typedef struct frnet_volume frnet_volume;
typedef struct frnet_model frnet_model;

FRNET_API const char* frnet_version(void);
FRNET_API const char* frnet_last_error(void);
FRNET_API const char* frnet_status_string(frnet_status status);

/* ---- volumes (FRV1 files) ---- */

FRNET_API frnet_status frnet_volume_create_real(uint32_t depth, uint32_t height, uint32_t width,
                                                const double* values, frnet_volume** out);
FRNET_API frnet_status frnet_volume_create_labels(uint32_t depth, uint32_t height, uint32_t width,
                                                  const uint8_t* values, frnet_volume** out);
FRNET_API frnet_status frnet_volume_read(const char* path, frnet_volume** out);
FRNET_API frnet_status frnet_volume_write(const frnet_volume* volume, const char* path);
FRNET_API void frnet_volume_free(frnet_volume* volume);
/* extents receives depth, height, width. Either output may be NULL. */
FRNET_API frnet_status frnet_volume_info(const frnet_volume* volume, uint32_t extents[3], frnet_dtype* dtype);
/* count must equal the voxel count; dtype must match. */
FRNET_API frnet_status frnet_volume_copy_real(const frnet_volume* volume, double* out, size_t count);
FRNET_API frnet_status frnet_volume_copy_labels(const frnet_volume* volume, uint8_t* out, size_t count);

/* ---- motion-artifact simulator ---- */

/* readout is 'x', 'y' or 'z'. Output is the magnitude image. */
FRNET_API frnet_status frnet_simulate_motion(const frnet_volume* input, double sigma, uint64_t seed, char readout,
                                             frnet_volume** out);
/* Appends one corrupted copy per (entry, sigma) to the manifest, writing
 * volumes into out_dir and the augmented manifest to manifest_out.
 * error_count (optional) receives the number of unreadable entries. */
FRNET_API frnet_status frnet_corrupt_dataset(const char* manifest_in, const double* sigmas, size_t sigma_count,
                                             uint64_t seed, const char* out_dir, const char* manifest_out,
                                             size_t* error_count);

/* ---- boundary weighting ---- */

FRNET_API frnet_status frnet_extract_boundary(const frnet_volume* mask, frnet_volume** out);
/* Boundary extraction + Gaussian density map. empty_boundary (optional) is
 * set to 1 when the mask had no boundary and the map is the floor. */
FRNET_API frnet_status frnet_density_map(const frnet_volume* mask, double sigma, double floor, frnet_volume** out,
                                         int* empty_boundary);

/* ---- evaluation ---- */

FRNET_API frnet_status frnet_dice(const frnet_volume* prediction, const frnet_volume* truth, double* out);

/* ---- synthetic data ---- */

typedef struct frnet_phantom_options {
  size_t count;
  size_t extent;
  /* "4" for the first four built-in groups or a comma list of
   * large, small, low-contrast, thin-rim. */
  const char* groups;
  uint64_t seed;
} frnet_phantom_options;

FRNET_API void frnet_phantom_options_init(frnet_phantom_options* options);
/* Writes volumes, masks and manifest.json into out_dir. */
FRNET_API frnet_status frnet_phantom_generate(const frnet_phantom_options* options, const char* out_dir);
/* Stratified train/test tags, rewritten in place. */
FRNET_API frnet_status frnet_manifest_split(const char* manifest_path, double test_fraction, uint64_t seed);

/* ---- training ---- */

typedef struct frnet_train_options {
  frnet_arch arch;
  size_t levels;
  size_t base_channels;
  frnet_loss loss;
  double alpha[2];
  double gamma;
  double density_sigma;
  double density_floor;
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  size_t epochs;
  size_t batch_size;
  int reorient;
  int resize;
  const double* artifact_sigmas;
  size_t artifact_sigma_count;
  uint64_t seed_init;
  uint64_t seed_order;
  uint64_t seed_augment;
  size_t checkpoint_every;
} frnet_train_options;

/* Receives one JSON record (no trailing newline) per training step/epoch. */
typedef void (*frnet_record_fn)(const char* record, void* user);

FRNET_API void frnet_train_options_init(frnet_train_options* options);
/* Derives the init, data-order and augmentation seeds from one seed. */
FRNET_API void frnet_train_options_seed(frnet_train_options* options, uint64_t seed);
/* Trains on the manifest's train split. Writes out_dir/model.json (+ .bin)
 * and out_dir/history.jsonl. */
FRNET_API frnet_status frnet_train(const frnet_train_options* options, const char* manifest_path, const char* out_dir,
                                   frnet_record_fn on_record, void* user);
/* k-fold model selection over the train split. Writes out_dir/cv_report.json
 * and the selected out_dir/model.json. */
FRNET_API frnet_status frnet_cross_validate(const frnet_train_options* candidates, size_t candidate_count, size_t k,
                                            uint64_t seed, const char* manifest_path, const char* out_dir,
                                            size_t* selected);

/* ---- inference ---- */

FRNET_API frnet_status frnet_model_load(const char* checkpoint_path, frnet_model** out);
FRNET_API void frnet_model_free(frnet_model* model);
FRNET_API frnet_status frnet_model_parameter_count(const frnet_model* model, size_t* out);
FRNET_API frnet_status frnet_model_segment(const frnet_model* model, const frnet_volume* input, frnet_volume** mask);
/* Scores the named split and writes the JSON report. overall_mean and
 * complete are optional outputs. */
FRNET_API frnet_status frnet_evaluate(const frnet_model* model, const char* manifest_path, const char* split,
                                      const char* report_path, double* overall_mean, int* complete);

#ifdef __cplusplus
}
#endif

#endif /* FRNET_FRNET_H_ */
