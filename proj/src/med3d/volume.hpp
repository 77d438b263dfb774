// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace med3d {

/// Grid extents along x, y, z. Index order is x-fastest.
struct Extent3 {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  int operator[](int axis) const noexcept { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  std::size_t index(int x, int y, int z) const noexcept {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(ny) +
            static_cast<std::size_t>(y)) * static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(x);
  }
  bool operator==(const Extent3&) const = default;
};

/// Millimetres per voxel along x, y, z.
using Spacing3 = std::array<double, 3>;

enum class Modality { kCT, kMR, kUnknown };

std::string_view modality_name(Modality m) noexcept;
std::optional<Modality> parse_modality(std::string_view text) noexcept;

/// Scalar 3D grid with physical spacing. Immutable once built; every
/// transformation produces a new Volume.
class Volume {
 public:
  /// Throws InvalidDimensions, NonPositiveSpacing or NonFiniteVoxel when the
  /// inputs break the Volume invariants.
  Volume(Extent3 extent, Spacing3 spacing, std::vector<float> voxels,
         Modality modality = Modality::kUnknown,
         std::array<double, 3> origin_offset = {0.0, 0.0, 0.0});

  const Extent3& extent() const noexcept { return extent_; }
  const Spacing3& spacing() const noexcept { return spacing_; }
  Modality modality() const noexcept { return modality_; }
  const std::array<double, 3>& origin_offset() const noexcept { return origin_; }
  std::span<const float> voxels() const noexcept { return voxels_; }
  float at(int x, int y, int z) const noexcept { return voxels_[extent_.index(x, y, z)]; }

  /// Same metadata, new intensities.
  Volume with_voxels(std::vector<float> voxels) const;
  Volume with_modality(Modality m) const;

  bool operator==(const Volume&) const = default;

 private:
  Extent3 extent_;
  Spacing3 spacing_;
  std::vector<float> voxels_;
  Modality modality_;
  std::array<double, 3> origin_;
};

/// Integer class map aligned voxel-for-voxel with a Volume.
class LabelGrid {
 public:
  /// Throws InvalidLabels when a label reaches class_count.
  LabelGrid(Extent3 extent, std::vector<std::uint8_t> labels, int class_count);

  const Extent3& extent() const noexcept { return extent_; }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  int class_count() const noexcept { return class_count_; }
  std::uint8_t at(int x, int y, int z) const noexcept { return labels_[extent_.index(x, y, z)]; }

  std::size_t foreground_count() const noexcept;
  bool operator==(const LabelGrid&) const = default;

 private:
  Extent3 extent_;
  std::vector<std::uint8_t> labels_;
  int class_count_;
};

/// Inclusive per-axis bounds of the label>0 region.
struct BoundingBox {
  std::array<int, 3> lo{};
  std::array<int, 3> hi{};
  int extent(int axis) const noexcept { return hi[axis] - lo[axis] + 1; }
};

std::optional<BoundingBox> foreground_bbox(const LabelGrid& labels);

/// Interprets an intensity volume as labels. Every voxel must be a
/// non-negative integer below class_count; otherwise InvalidLabels.
LabelGrid to_label_grid(const Volume& vol, int class_count);

/// Label grid as float intensities, keeping the given spacing.
Volume label_volume(const LabelGrid& labels, const Spacing3& spacing);

}  // namespace med3d
