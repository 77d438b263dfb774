// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "med3d/volume.hpp"

namespace med3d::nifti {

inline constexpr int kHeaderSize = 348;
inline constexpr int kDataOffset = 352;

// On-disk datatype codes accepted by the reader.
enum class Dtype : short {
  kUInt8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
};

struct ReadResult {
  Volume volume;
  /// Present when every voxel is a non-negative integer below 256; the
  /// class count is max label + 1. Callers with a known class count should
  /// use to_label_grid() instead.
  std::optional<LabelGrid> labels;
};

/// Decodes an in-memory single-file NIfTI-1 image (already decompressed).
ReadResult parse(std::span<const std::byte> bytes);

/// Reads a .nii or .nii.gz file. gzip is detected from the stream, not
/// the file name.
ReadResult read(const std::filesystem::path& path);

/// Encodes as little-endian float32 with a 4-byte empty extension block.
std::vector<std::byte> encode(const Volume& vol);

/// Writes encode(vol); gzip-compressed when the path ends in ".gz".
void write(const Volume& vol, const std::filesystem::path& path);

}  // namespace med3d::nifti
