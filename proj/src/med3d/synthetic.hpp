// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "med3d/manifest.hpp"
#include "med3d/normalize.hpp"
#include "med3d/volume.hpp"

namespace med3d::synthetic {

enum class ShapeKind { kSphere, kCuboid, kEllipsoid, kShell };

std::string_view shape_name(ShapeKind k) noexcept;

struct IntensityProfile {
  double fg_mean = 1.0;
  double fg_std = 0.1;
  double bg_mean = 0.0;
  double bg_std = 0.1;
  double core_mean = 1.5;        // shell core / second substructure
  double ramp = 0.0;             // additive bias growing linearly along x
  double outlier_fraction = 0.0; // voxels replaced by far-out values
  double outlier_magnitude = 0.0;

  /// InvalidArgument unless |fg - bg| >= (fg_std + bg_std) / 2 and the
  /// remaining fields are finite and non-negative where required.
  void validate(int class_count) const;
};

struct SyntheticDomainSpec {
  int domain_id = 0;
  std::string name;
  ShapeKind shape = ShapeKind::kSphere;
  Modality modality = Modality::kMR;
  IntensityProfile intensity;
  /// Nominal spacing and extent; together they fix the field of view.
  Spacing3 spacing{1.0, 1.0, 1.0};
  Extent3 extent{30, 30, 30};
  /// Each case scales every axis's spacing by a factor drawn from
  /// [1 - jitter, 1 + jitter] and adapts its extent to keep the field of view.
  double spacing_jitter = 0.1;
  int case_count = 8;
  int class_count = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Shape placement in field-of-view fractions: a voxel centre i along an
/// axis of n voxels sits at (i + 0.5) / n.
struct ShapeInstance {
  ShapeKind kind = ShapeKind::kSphere;
  std::array<double, 3> centre{0.5, 0.5, 0.5};
  std::array<double, 3> radii{0.3, 0.3, 0.3};  // half extents for cuboids
  double core_ratio = 0.0;                     // shell: inner radius / outer radius
};

/// Label 1 inside the shape. With class_count 3, label 2 marks the shell's
/// core, or for the other kinds the part of the organ beyond the plane
/// through its centre normal to x. A two-class shell keeps its core in
/// label 1 (the core still renders at core_mean).
LabelGrid rasterize(const ShapeInstance& s, const Extent3& extent, int class_count);

/// Draws a random instance of `kind` that stays clear of the borders.
ShapeInstance random_shape(ShapeKind kind, std::uint64_t seed);

struct SyntheticCase {
  std::string case_id;
  Volume volume;
  LabelGrid labels;
  ShapeInstance shape;
};

std::vector<SyntheticCase> generate_cases(const SyntheticDomainSpec& spec);

/// Writes `<dir>/<case_id>.nii.gz` and `<dir>/<case_id>_labels.nii.gz` for
/// every case and returns the matching DomainSpec.
DomainSpec write_cases(const SyntheticDomainSpec& spec, const std::vector<SyntheticCase>& cases,
                       const std::filesystem::path& dir);

DomainSpec generate_domain(const SyntheticDomainSpec& spec, const std::filesystem::path& dir);

/// The eight-domain suite: sphere, ellipsoid and shell kinds, CT-like (wide range, sparse
/// outliers) and MR-like (unit scale, intensity ramp) regimes, five spacing
/// profiles including (1, 1, 3), class counts 2 and 3. The first `count`
/// specs are returned.
std::vector<SyntheticDomainSpec> suite_specs(std::uint64_t seed, int count = 8);

/// Writes every domain under `<outdir>/domain<id>/` plus `<outdir>/manifest.txt`.
std::vector<DomainSpec> generate_suite(std::uint64_t seed, const std::filesystem::path& outdir, int count = 8);

/// Target task for segmentation transfer: a single large organ-like
/// ellipsoid in a CT-like regime not present in the suite.
SyntheticDomainSpec seg_task_spec(std::uint64_t seed, int case_count = 12);

struct NoduleCase {
  std::string case_id;
  Volume volume;
  std::array<int, 4> ratings{};  // four readers, 1..5
  normalize::Malignancy merged = normalize::Malignancy::kExcluded;
};

/// Small blobs in a CT-like regime: smooth spheres for benign, irregular
/// multi-lobed blobs for malignant. Readers' ratings scatter around the
/// truth; some cases land on an ambiguous median and are excluded.
std::vector<NoduleCase> generate_nodules(std::uint64_t seed, int count, Extent3 extent = {24, 24, 24});

struct ClsCase {
  std::string case_id;
  std::filesystem::path volume;
  int label = 0;  // 0 benign, 1 malignant
};

/// Writes volumes and `<dir>/nodules.csv` (`case_id,volume,r1,r2,r3,r4`).
void write_nodules(const std::vector<NoduleCase>& cases, const std::filesystem::path& dir);

/// Reads nodules.csv, merges ratings and drops excluded cases.
std::vector<ClsCase> load_nodules(const std::filesystem::path& csv);

}  // namespace med3d::synthetic
