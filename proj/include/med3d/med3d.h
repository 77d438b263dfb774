/*
 * Copyright (c) 2026 med3d contributors
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef MED3D_MED3D_H
#define MED3D_MED3D_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MED3D_API __declspec(dllexport)
#else
#define MED3D_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values 1..27 follow the library's error kinds one to one. */
typedef enum med3d_status {
  MED3D_OK = 0,
  MED3D_ERR_BAD_MAGIC = 1,
  MED3D_ERR_UNSUPPORTED_DTYPE = 2,
  MED3D_ERR_TRUNCATED_FILE = 3,
  MED3D_ERR_NON_FINITE_VOXEL = 4,
  MED3D_ERR_NON_POSITIVE_SPACING = 5,
  MED3D_ERR_INVALID_DIMENSIONS = 6,
  MED3D_ERR_IO_FAILURE = 7,
  MED3D_ERR_PARSE_ERROR = 8,
  MED3D_ERR_DUPLICATE_DOMAIN_ID = 9,
  MED3D_ERR_EMPTY_DOMAIN = 10,
  MED3D_ERR_EMPTY_LIST = 11,
  MED3D_ERR_NON_POSITIVE_TARGET = 12,
  MED3D_ERR_NO_FOREGROUND = 13,
  MED3D_ERR_RATING_OUT_OF_RANGE = 14,
  MED3D_ERR_SHAPE_MISMATCH = 15,
  MED3D_ERR_TARGET_OUT_OF_RANGE = 16,
  MED3D_ERR_NOT_SCALAR = 17,
  MED3D_ERR_INVALID_DEPTH = 18,
  MED3D_ERR_DUPLICATE_BRANCH = 19,
  MED3D_ERR_UNKNOWN_DOMAIN = 20,
  MED3D_ERR_ARCH_MISMATCH = 21,
  MED3D_ERR_EMPTY_AFTER_FRACTION = 22,
  MED3D_ERR_EMPTY_MASK = 23,
  MED3D_ERR_EMPTY_INPUT = 24,
  MED3D_ERR_INVALID_ARGUMENT = 25,
  MED3D_ERR_INVALID_LABELS = 26,
  MED3D_ERR_NON_FINITE_VALUE = 27,
  /* a command finished but skipped some of its items */
  MED3D_PARTIAL = 90,
  MED3D_ERR_NULL_ARGUMENT = 98,
  MED3D_ERR_INTERNAL = 99
} med3d_status;

MED3D_API const char* med3d_version(void);
MED3D_API const char* med3d_status_name(med3d_status status);

/* Message of the last failure on the calling thread; "" when none. The
 * pointer stays valid until the next call on that thread. */
MED3D_API const char* med3d_last_error(void);

/* Diagnostics sink (level 0 warning, 1 progress, 2 detail). NULL disables. */
typedef void (*med3d_log_fn)(int level, const char* message, void* user);
MED3D_API void med3d_set_log_callback(med3d_log_fn fn, void* user);

/* ---- run configuration --------------------------------------------- */

typedef struct med3d_config med3d_config;

MED3D_API med3d_status med3d_config_create(med3d_config** out);
MED3D_API void med3d_config_destroy(med3d_config* cfg);
/* `key = value` lines; unknown keys fail with MED3D_ERR_PARSE_ERROR. */
MED3D_API med3d_status med3d_config_load_file(med3d_config* cfg, const char* path);
/* Highest precedence layer (command-line flags). */
MED3D_API med3d_status med3d_config_set(med3d_config* cfg, const char* key, const char* value);
/* Layer between the config file and the defaults. */
MED3D_API med3d_status med3d_config_set_env(med3d_config* cfg, const char* key, const char* value);
/* Copies the resolved value (NUL terminated) into buf when it fits; *needed
 * receives the size including the terminator. Unset keys yield "". */
MED3D_API med3d_status med3d_config_get(const med3d_config* cfg, const char* key, char* buf, size_t cap,
                                        size_t* needed);

MED3D_API size_t med3d_config_field_count(void);
MED3D_API const char* med3d_config_field_key(size_t index);
MED3D_API const char* med3d_config_field_default(size_t index);
MED3D_API const char* med3d_config_field_help(size_t index);

/* Runs a command: "gen-synthetic", "normalize", "pretrain", "transfer-seg",
 * "transfer-cls", "eval" or "experiment". */
MED3D_API med3d_status med3d_run(const char* command, med3d_config* cfg);

/* ---- volumes --------------------------------------------------------- */

typedef struct med3d_volume med3d_volume;

MED3D_API med3d_status med3d_volume_create(const int extent[3], const double spacing[3], const float* voxels,
                                           med3d_volume** out);
MED3D_API med3d_status med3d_volume_read(const char* path, med3d_volume** out);
MED3D_API med3d_status med3d_volume_write(const med3d_volume* vol, const char* path);
MED3D_API med3d_status med3d_volume_info(const med3d_volume* vol, int extent[3], double spacing[3]);
/* x fastest, then y, then z. */
MED3D_API const float* med3d_volume_data(const med3d_volume* vol);
MED3D_API void med3d_volume_destroy(med3d_volume* vol);

/* ---- checkpoints ----------------------------------------------------- */

typedef struct med3d_checkpoint med3d_checkpoint;

MED3D_API med3d_status med3d_checkpoint_load(const char* path, med3d_checkpoint** out);
MED3D_API size_t med3d_checkpoint_tensor_count(const med3d_checkpoint* ckpt);
MED3D_API const char* med3d_checkpoint_tensor_name(const med3d_checkpoint* ckpt, size_t index);
MED3D_API size_t med3d_checkpoint_tensor_size(const med3d_checkpoint* ckpt, size_t index);
MED3D_API med3d_status med3d_checkpoint_metadata(const med3d_checkpoint* ckpt, const char* key, char* buf,
                                                 size_t cap, size_t* needed);
MED3D_API void med3d_checkpoint_destroy(med3d_checkpoint* ckpt);

/* ---- metrics ---------------------------------------------------------- */

MED3D_API med3d_status med3d_dice(const uint8_t* pred, const uint8_t* truth, const int extent[3], int label,
                                  double* out);
/* Average symmetric surface distance in mm between the label > 0 masks. */
MED3D_API med3d_status med3d_assd(const uint8_t* pred, const uint8_t* truth, const int extent[3],
                                  const double spacing[3], double* out);

#ifdef __cplusplus
}
#endif

#endif /* MED3D_MED3D_H */
