// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/med3d.h"

#include <algorithm>
#include <cstring>
#include <mutex>
#include <new>
#include <string>

#include "med3d/app.hpp"
#include "med3d/error.hpp"
#include "med3d/metrics.hpp"
#include "med3d/model.hpp"
#include "med3d/nifti.hpp"
#include "med3d/runconfig.hpp"

struct med3d_config {
  med3d::RunConfig cfg;
};

struct med3d_volume {
  med3d::Volume vol;
};

struct med3d_checkpoint {
  med3d::model::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
med3d_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

med3d_status set_error(med3d_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

// Every entry point funnels exceptions through here: nothing escapes the C
// boundary.
template <typename F>
med3d_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const med3d::Error& e) {
    return set_error(static_cast<med3d_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(MED3D_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(MED3D_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(MED3D_ERR_INTERNAL, "unknown failure");
  }
}

med3d_status copy_out(const std::string& value, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = value.size() + 1;
  if (buf && cap > 0) {
    if (cap < value.size() + 1) {
      buf[0] = '\0';
      return set_error(MED3D_ERR_INVALID_ARGUMENT, "buffer too small");
    }
    std::memcpy(buf, value.c_str(), value.size() + 1);
  }
  return MED3D_OK;
}

void emit(int level, const std::string& msg) {
  std::lock_guard lock(g_log_mutex);
  if (g_log_fn) g_log_fn(level, msg.c_str(), g_log_user);
}

med3d::Extent3 extent_of(const int e[3]) {
  med3d::require(e[0] > 0 && e[1] > 0 && e[2] > 0, med3d::ErrorCode::kInvalidDimensions, "extents must be positive");
  return {e[0], e[1], e[2]};
}

med3d::LabelGrid mask_grid(const uint8_t* v, const med3d::Extent3& e, bool binary) {
  std::vector<std::uint8_t> l(v, v + e.count());
  int mx = 1;
  for (auto& x : l) {
    if (binary) x = x ? 1 : 0;
    mx = std::max<int>(mx, x);
  }
  return med3d::LabelGrid(e, std::move(l), mx + 1);
}

}  // namespace

extern "C" {

const char* med3d_version(void) { return "0.1.0"; }

const char* med3d_status_name(med3d_status s) {
  switch (s) {
    case MED3D_OK: return "OK";
    case MED3D_PARTIAL: return "Partial";
    case MED3D_ERR_NULL_ARGUMENT: return "NullArgument";
    case MED3D_ERR_INTERNAL: return "Internal";
    default: break;
  }
  const int v = static_cast<int>(s);
  if (v >= 1 && v <= 27) return med3d::error_code_name(static_cast<med3d::ErrorCode>(v)).data();
  return "Unknown";
}

const char* med3d_last_error(void) { return g_last_error.c_str(); }

void med3d_set_log_callback(med3d_log_fn fn, void* user) {
  std::lock_guard lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

med3d_status med3d_config_create(med3d_config** out) {
  if (!out) return set_error(MED3D_ERR_NULL_ARGUMENT, "out is null");
  return guarded([&] {
    *out = new med3d_config();
    return MED3D_OK;
  });
}

void med3d_config_destroy(med3d_config* cfg) { delete cfg; }

med3d_status med3d_config_load_file(med3d_config* cfg, const char* path) {
  if (!cfg || !path) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    cfg->cfg.load_file(path);
    return MED3D_OK;
  });
}

med3d_status med3d_config_set(med3d_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    cfg->cfg.set_flag(key, value);
    return MED3D_OK;
  });
}

med3d_status med3d_config_set_env(med3d_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    cfg->cfg.set_env(key, value);
    return MED3D_OK;
  });
}

med3d_status med3d_config_get(const med3d_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  if (!cfg || !key) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] { return copy_out(cfg->cfg.get(key).value_or(""), buf, cap, needed); });
}

size_t med3d_config_field_count(void) { return med3d::config_fields().size(); }

const char* med3d_config_field_key(size_t i) {
  const auto& f = med3d::config_fields();
  return i < f.size() ? f[i].key.data() : nullptr;
}

const char* med3d_config_field_default(size_t i) {
  const auto& f = med3d::config_fields();
  return i < f.size() ? f[i].default_value.data() : nullptr;
}

const char* med3d_config_field_help(size_t i) {
  const auto& f = med3d::config_fields();
  return i < f.size() ? f[i].help.data() : nullptr;
}

med3d_status med3d_run(const char* command, med3d_config* cfg) {
  if (!command || !cfg) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    const int verbosity = static_cast<int>(cfg->cfg.integer("verbosity"));
    const auto log = [verbosity](int level, const std::string& msg) {
      if (level <= verbosity) emit(level, msg);
    };
    const auto outcome = med3d::app::run(command, cfg->cfg, log);
    return outcome == med3d::app::Outcome::kPartial ? set_error(MED3D_PARTIAL, "some items were skipped") : MED3D_OK;
  });
}

med3d_status med3d_volume_create(const int extent[3], const double spacing[3], const float* voxels,
                                 med3d_volume** out) {
  if (!extent || !spacing || !voxels || !out) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    const auto e = extent_of(extent);
    *out = new med3d_volume{med3d::Volume(e, {spacing[0], spacing[1], spacing[2]},
                                          std::vector<float>(voxels, voxels + e.count()))};
    return MED3D_OK;
  });
}

med3d_status med3d_volume_read(const char* path, med3d_volume** out) {
  if (!path || !out) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new med3d_volume{med3d::nifti::read(path).volume};
    return MED3D_OK;
  });
}

med3d_status med3d_volume_write(const med3d_volume* vol, const char* path) {
  if (!vol || !path) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    med3d::nifti::write(vol->vol, path);
    return MED3D_OK;
  });
}

med3d_status med3d_volume_info(const med3d_volume* vol, int extent[3], double spacing[3]) {
  if (!vol) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  const auto& e = vol->vol.extent();
  const auto& s = vol->vol.spacing();
  if (extent) {
    extent[0] = e.nx;
    extent[1] = e.ny;
    extent[2] = e.nz;
  }
  if (spacing) std::copy(s.begin(), s.end(), spacing);
  return MED3D_OK;
}

const float* med3d_volume_data(const med3d_volume* vol) { return vol ? vol->vol.voxels().data() : nullptr; }

void med3d_volume_destroy(med3d_volume* vol) { delete vol; }

med3d_status med3d_checkpoint_load(const char* path, med3d_checkpoint** out) {
  if (!path || !out) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new med3d_checkpoint{med3d::model::load_checkpoint(path)};
    return MED3D_OK;
  });
}

size_t med3d_checkpoint_tensor_count(const med3d_checkpoint* c) { return c ? c->ckpt.arrays.size() : 0; }

const char* med3d_checkpoint_tensor_name(const med3d_checkpoint* c, size_t i) {
  return c && i < c->ckpt.arrays.size() ? c->ckpt.arrays[i].name.c_str() : nullptr;
}

size_t med3d_checkpoint_tensor_size(const med3d_checkpoint* c, size_t i) {
  return c && i < c->ckpt.arrays.size() ? c->ckpt.arrays[i].values.size() : 0;
}

med3d_status med3d_checkpoint_metadata(const med3d_checkpoint* c, const char* key, char* buf, size_t cap,
                                       size_t* needed) {
  if (!c || !key) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    const auto it = c->ckpt.metadata.find(key);
    if (it == c->ckpt.metadata.end()) return set_error(MED3D_ERR_INVALID_ARGUMENT, std::string("no metadata key ") + key);
    return copy_out(it->second, buf, cap, needed);
  });
}

void med3d_checkpoint_destroy(med3d_checkpoint* c) { delete c; }

med3d_status med3d_dice(const uint8_t* pred, const uint8_t* truth, const int extent[3], int label, double* out) {
  if (!pred || !truth || !extent || !out) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    const auto e = extent_of(extent);
    auto p = mask_grid(pred, e, false), t = mask_grid(truth, e, false);
    const int classes = std::max({p.class_count(), t.class_count(), label + 1});
    *out = med3d::metrics::dice(med3d::LabelGrid(e, {p.labels().begin(), p.labels().end()}, classes),
                                med3d::LabelGrid(e, {t.labels().begin(), t.labels().end()}, classes), label);
    return MED3D_OK;
  });
}

med3d_status med3d_assd(const uint8_t* pred, const uint8_t* truth, const int extent[3], const double spacing[3],
                        double* out) {
  if (!pred || !truth || !extent || !spacing || !out) return set_error(MED3D_ERR_NULL_ARGUMENT, "null argument");
  return guarded([&] {
    const auto e = extent_of(extent);
    *out = med3d::metrics::assd(mask_grid(pred, e, true), mask_grid(truth, e, true),
                                {spacing[0], spacing[1], spacing[2]});
    return MED3D_OK;
  });
}

}  // extern "C"
