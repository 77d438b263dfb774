// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "med3d/error.hpp"

namespace med3d {

std::string_view modality_name(Modality m) noexcept {
  switch (m) {
    case Modality::kCT: return "CT";
    case Modality::kMR: return "MR";
    case Modality::kUnknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::optional<Modality> parse_modality(std::string_view text) noexcept {
  if (text == "CT") return Modality::kCT;
  if (text == "MR" || text == "MRI") return Modality::kMR;
  if (text == "UNKNOWN") return Modality::kUnknown;
  return std::nullopt;
}

namespace {

void check_extent(const Extent3& e) {
  require(e.nx >= 1 && e.ny >= 1 && e.nz >= 1, ErrorCode::kInvalidDimensions,
          "grid extents must be >= 1 on every axis");
}

}  // namespace

Volume::Volume(Extent3 extent, Spacing3 spacing, std::vector<float> voxels, Modality modality,
               std::array<double, 3> origin_offset)
    : extent_(extent),
      spacing_(spacing),
      voxels_(std::move(voxels)),
      modality_(modality),
      origin_(origin_offset) {
  check_extent(extent_);
  for (double s : spacing_) {
    require(std::isfinite(s) && s > 0.0, ErrorCode::kNonPositiveSpacing,
            "spacing must be finite and strictly positive");
  }
  require(voxels_.size() == extent_.count(), ErrorCode::kInvalidDimensions,
          "voxel count does not match extents");
  for (float v : voxels_) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteVoxel, "volume contains NaN or Inf");
  }
}

Volume Volume::with_voxels(std::vector<float> voxels) const {
  return Volume(extent_, spacing_, std::move(voxels), modality_, origin_);
}

Volume Volume::with_modality(Modality m) const {
  return Volume(extent_, spacing_, voxels_, m, origin_);
}

LabelGrid::LabelGrid(Extent3 extent, std::vector<std::uint8_t> labels, int class_count)
    : extent_(extent), labels_(std::move(labels)), class_count_(class_count) {
  check_extent(extent_);
  require(class_count_ >= 1 && class_count_ <= 256, ErrorCode::kInvalidLabels,
          "class_count must be in [1, 256]");
  require(labels_.size() == extent_.count(), ErrorCode::kInvalidDimensions,
          "label count does not match extents");
  for (std::uint8_t l : labels_) {
    if (l >= class_count_) {
      fail(ErrorCode::kInvalidLabels,
           "label " + std::to_string(l) + " >= class_count " + std::to_string(class_count_));
    }
  }
}

std::size_t LabelGrid::foreground_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(labels_.begin(), labels_.end(), [](std::uint8_t l) { return l != 0; }));
}

std::optional<BoundingBox> foreground_bbox(const LabelGrid& labels) {
  const Extent3& e = labels.extent();
  BoundingBox box{{e.nx, e.ny, e.nz}, {-1, -1, -1}};
  bool any = false;
  for (int z = 0; z < e.nz; ++z)
    for (int y = 0; y < e.ny; ++y)
      for (int x = 0; x < e.nx; ++x) {
        if (labels.at(x, y, z) == 0) continue;
        any = true;
        const int p[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          box.lo[a] = std::min(box.lo[a], p[a]);
          box.hi[a] = std::max(box.hi[a], p[a]);
        }
      }
  if (!any) return std::nullopt;
  return box;
}

LabelGrid to_label_grid(const Volume& vol, int class_count) {
  std::vector<std::uint8_t> out(vol.voxels().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float v = vol.voxels()[i];
    if (v < 0.0f || v != std::floor(v) || v >= static_cast<float>(class_count)) {
      fail(ErrorCode::kInvalidLabels, "voxel value " + std::to_string(v) +
                                          " is not an integer label below " +
                                          std::to_string(class_count));
    }
    out[i] = static_cast<std::uint8_t>(v);
  }
  return LabelGrid(vol.extent(), std::move(out), class_count);
}

Volume label_volume(const LabelGrid& labels, const Spacing3& spacing) {
  std::vector<float> v(labels.labels().begin(), labels.labels().end());
  return Volume(labels.extent(), spacing, std::move(v));
}

}  // namespace med3d
