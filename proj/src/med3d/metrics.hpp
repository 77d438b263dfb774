// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "med3d/volume.hpp"

namespace med3d::metrics {

/// 2|P n T| / (|P| + |T|) over voxels equal to `label`. Both empty gives
/// 1, exactly one empty gives 0. ShapeMismatch on differing extents.
double dice(const LabelGrid& pred, const LabelGrid& truth, int label = 1);

/// Dice for every foreground class 1..C-1 (C = max of both class counts).
std::vector<double> dice_per_class(const LabelGrid& pred, const LabelGrid& truth);

/// Voxels equal to `label` with at least one of their six face neighbours
/// different or outside the grid, as (x, y, z).
std::vector<std::array<int, 3>> surface_voxels(const LabelGrid& mask, int label = 1);

/// Average symmetric surface distance in mm with voxel-centre distances.
/// Uses an exact separable squared Euclidean distance transform.
/// EmptyMask when either mask has no voxel of `label`.
double assd(const LabelGrid& pred, const LabelGrid& truth, const Spacing3& spacing, int label = 1);

/// Fraction of equal entries. EmptyInput on empty, ShapeMismatch on
/// differing lengths.
double accuracy(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth);

struct MetricPoint {
  long step = 0;
  double value = 0.0;
};

/// First step whose value reaches threshold; nullopt when never reached.
std::optional<long> steps_to_threshold(std::span<const MetricPoint> log, double threshold);

/// baseline_steps / run_steps; nullopt unless both reached the threshold.
std::optional<double> speedup(std::optional<long> run_steps, std::optional<long> baseline_steps);

struct EvalRow {
  std::string case_id;
  int cls = 1;
  double dice = 0.0;
  std::optional<double> assd_mm;  // absent when a mask is empty
  double accuracy = 0.0;
};

/// `case_id,class,dice,assd_mm,accuracy` followed by one `mean` row per
/// class holding the arithmetic means of that class's rows.
void write_eval_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path);

/// Per-class rows for one aligned prediction/truth pair. Accuracy is the
/// voxel-wise label agreement and repeats on every row of the case.
std::vector<EvalRow> evaluate_case(const std::string& case_id, const LabelGrid& pred, const LabelGrid& truth,
                                   const Spacing3& spacing);

}  // namespace med3d::metrics
