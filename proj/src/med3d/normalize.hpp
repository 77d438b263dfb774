// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "med3d/manifest.hpp"
#include "med3d/volume.hpp"

namespace med3d::normalize {

/// Even counts average the two central order statistics.
double median(std::vector<double> values);

/// Per-axis median; EmptyList on no input, NonPositiveSpacing on bad entries.
Spacing3 median_spacing(std::span<const Spacing3> spacings);

/// round(n * spacing / target) per axis, at least 1.
Extent3 resampled_extent(const Extent3& extent, const Spacing3& spacing, const Spacing3& target);

enum class Interp { kTrilinear, kNearest };

/// Resamples onto the grid given by resampled_extent(). Output voxel o along
/// an axis samples source coordinate (o + 0.5) * n_in / n_out - 0.5, clamped
/// to the volume. Output spacing is `target`.
Volume resample_to_spacing(const Volume& vol, const Spacing3& target, Interp mode = Interp::kTrilinear);

/// Nearest-neighbour resampling of a label grid living at `spacing`.
LabelGrid resample_labels(const LabelGrid& labels, const Spacing3& spacing, const Spacing3& target);

struct IntensityStats {
  double mean = 0.0;
  double stddev = 0.0;
  double clip_low = 0.0;
  double clip_high = 0.0;
};

/// Value of rank ceil(pct * N / 100) (1-based, clamped to [1, N]) in sorted order.
double nearest_rank_percentile(std::span<const float> values, double pct);

struct ClipResult {
  Volume volume;
  double low;
  double high;
};

ClipResult clip_percentiles(const Volume& vol, double lo_pct = 0.5, double hi_pct = 99.5);

inline constexpr double kStdFloor = 1e-8;

/// (v - mean) / max(stddev, 1e-8) with the population standard deviation.
std::pair<Volume, IntensityStats> zscore(const Volume& vol);

/// Percentile clip followed by z-score; stats carry the clip bounds too.
std::pair<Volume, IntensityStats> normalize_intensity(const Volume& vol, double lo_pct = 0.5,
                                                      double hi_pct = 99.5);

struct Crop {
  Volume volume;
  LabelGrid labels;
  std::array<int, 3> offset;  // voxel position of the crop corner in the source
};

/// Crop extent per axis uniform in [min(2 * bbox, full), full]; position
/// uniform among those containing the foreground bounding box.
Crop sample_training_crop(const Volume& vol, const LabelGrid& labels, std::uint64_t seed);

struct AugmentParams {
  double max_translate_frac = 0.10;
  double rotate_lo_deg = -5.0;
  double rotate_hi_deg = 5.0;
  double scale_lo = 0.8;
  double scale_hi = 1.2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Random translation (relative to the foreground bounding box), rotation
/// about the z axis and isotropic scaling about the volume centre, computed
/// in physical millimetres. Intensities are trilinear, labels nearest.
std::pair<Volume, LabelGrid> augment(const Volume& vol, const LabelGrid& labels, const AugmentParams& p);

Volume hounsfield_window(const Volume& vol, double lo = -200.0, double hi = 250.0);

enum class Malignancy { kBenign, kMalignant, kExcluded };

/// Median of the 1..5 ratings: <= 3 benign, >= 4 malignant, 3.5 excluded.
Malignancy merge_malignancy(std::span<const int> ratings);

struct CaseStats {
  std::string case_id;
  IntensityStats stats;
};

struct DomainStats {
  int domain_id = 0;
  Spacing3 median_spacing{};
  std::vector<CaseStats> cases;
};

void write_stats(const std::vector<DomainStats>& stats, const std::filesystem::path& path);
std::vector<DomainStats> read_stats(const std::filesystem::path& path);

/// Full preprocessing of a dataset: per-domain median spacing, resampling
/// (labels nearest), per-volume clip + z-score. Writes volumes under outdir,
/// a new manifest `manifest.txt` and `stats.txt`; returns the new domains
/// with median_spacing filled in.
std::vector<DomainSpec> preprocess_dataset(const std::vector<DomainSpec>& domains,
                                           const std::filesystem::path& outdir, double lo_pct = 0.5,
                                           double hi_pct = 99.5);

}  // namespace med3d::normalize
