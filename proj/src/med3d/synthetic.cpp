// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "med3d/error.hpp"
#include "med3d/nifti.hpp"
#include "med3d/seed.hpp"

namespace med3d::synthetic {
namespace {

std::string case_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "case%03d", i);
  return buf;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// 0 background, 1 organ, 2 shell core or, for the other kinds when split,
// the organ's part beyond the plane through its centre normal to x.
std::vector<std::uint8_t> tissue_map(const ShapeInstance& s, const Extent3& e, bool split) {
  std::vector<std::uint8_t> l(e.count(), 0);
  for (int z = 0; z < e.nz; ++z)
    for (int y = 0; y < e.ny; ++y)
      for (int x = 0; x < e.nx; ++x) {
        const double u[3] = {(x + 0.5) / e.nx, (y + 0.5) / e.ny, (z + 0.5) / e.nz};
        double q[3];
        for (int a = 0; a < 3; ++a) q[a] = (u[a] - s.centre[a]) / s.radii[a];
        std::uint8_t lab = 0;
        if (s.kind == ShapeKind::kCuboid) {
          lab = std::abs(q[0]) <= 1.0 && std::abs(q[1]) <= 1.0 && std::abs(q[2]) <= 1.0;
        } else {
          const double r2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
          lab = r2 <= 1.0;
          if (lab && s.kind == ShapeKind::kShell && r2 <= s.core_ratio * s.core_ratio) lab = 2;
        }
        if (lab == 1 && split && s.kind != ShapeKind::kShell && q[0] > 0.0) lab = 2;
        l[e.index(x, y, z)] = lab;
      }
  return l;
}

Volume render(const LabelGrid& labels, const Spacing3& spacing, Modality modality, const IntensityProfile& p,
              std::mt19937_64& rng) {
  const Extent3& e = labels.extent();
  std::normal_distribution<double> noise;
  std::uniform_real_distribution<double> u01;
  std::vector<float> v(e.count());
  for (int z = 0; z < e.nz; ++z)
    for (int y = 0; y < e.ny; ++y)
      for (int x = 0; x < e.nx; ++x) {
        const auto i = e.index(x, y, z);
        const int l = labels.labels()[i];
        double val = l == 0   ? p.bg_mean + p.bg_std * noise(rng)
                     : l == 1 ? p.fg_mean + p.fg_std * noise(rng)
                              : p.core_mean + p.fg_std * noise(rng);
        val += p.ramp * ((x + 0.5) / e.nx - 0.5);
        if (p.outlier_fraction > 0.0 && u01(rng) < p.outlier_fraction) {
          const double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
          val = sign * p.outlier_magnitude * (1.0 + u01(rng));
        }
        v[i] = static_cast<float>(val);
      }
  return Volume(e, spacing, std::move(v), modality);
}

}  // namespace

std::string_view shape_name(ShapeKind k) noexcept {
  switch (k) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kCuboid: return "cuboid";
    case ShapeKind::kEllipsoid: return "ellipsoid";
    case ShapeKind::kShell: return "shell";
  }
  return "?";
}

void IntensityProfile::validate(int class_count) const {
  const double vals[] = {fg_mean, fg_std, bg_mean, bg_std, core_mean, ramp, outlier_fraction, outlier_magnitude};
  for (double v : vals) require(std::isfinite(v), ErrorCode::kInvalidArgument, "intensity profile must be finite");
  require(fg_std >= 0.0 && bg_std >= 0.0, ErrorCode::kInvalidArgument, "standard deviations must be >= 0");
  require(outlier_fraction >= 0.0 && outlier_fraction < 0.05, ErrorCode::kInvalidArgument,
          "outlier_fraction must be in [0, 0.05)");
  const double bound = 0.5 * (fg_std + bg_std);
  require(std::abs(fg_mean - bg_mean) >= bound, ErrorCode::kInvalidArgument,
          "foreground and background means are not separable");
  if (class_count == 3) {
    require(std::abs(core_mean - fg_mean) >= fg_std && std::abs(core_mean - bg_mean) >= bound,
            ErrorCode::kInvalidArgument, "core intensity is not separable");
  }
}

void SyntheticDomainSpec::validate() const {
  require(domain_id >= 0 && domain_id < kMaxDomains, ErrorCode::kInvalidArgument, "domain_id must be in [0, 7]");
  require(case_count >= 2, ErrorCode::kInvalidArgument, "a domain needs at least 2 cases");
  require(class_count == 2 || class_count == 3, ErrorCode::kInvalidArgument, "class_count must be 2 or 3");
  require(spacing_jitter >= 0.0 && spacing_jitter < 0.5, ErrorCode::kInvalidArgument,
          "spacing_jitter must be in [0, 0.5)");
  for (int a = 0; a < 3; ++a) {
    require(spacing[a] > 0.0 && std::isfinite(spacing[a]), ErrorCode::kNonPositiveSpacing,
            "nominal spacing must be positive");
    require(extent[a] >= 8, ErrorCode::kInvalidDimensions, "nominal extent must be at least 8");
  }
  intensity.validate(shape == ShapeKind::kShell ? 3 : class_count);
}

LabelGrid rasterize(const ShapeInstance& s, const Extent3& e, int class_count) {
  auto l = tissue_map(s, e, class_count == 3);
  if (class_count == 2)
    for (auto& v : l) v = std::min<std::uint8_t>(v, 1);
  return LabelGrid(e, std::move(l), class_count);
}

ShapeInstance random_shape(ShapeKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ShapeInstance s;
  s.kind = kind;
  switch (kind) {
    case ShapeKind::kSphere: {
      const double r = uniform(rng, 0.35, 0.40);
      s.radii = {r, r, r};
      break;
    }
    case ShapeKind::kCuboid:
      for (double& r : s.radii) r = uniform(rng, 0.32, 0.40);
      break;
    case ShapeKind::kEllipsoid:
      for (double& r : s.radii) r = uniform(rng, 0.33, 0.41);
      break;
    case ShapeKind::kShell: {
      const double r = uniform(rng, 0.37, 0.40);
      s.radii = {r, r, r};
      s.core_ratio = uniform(rng, 0.53, 0.60);
      break;
    }
  }
  // Near-central placement: boundaries far past the outermost coarse
  // feature centres are hard to resolve at output stride 8.
  constexpr double kMargin = 0.03, kShift = 0.04;
  for (int a = 0; a < 3; ++a) {
    const double lo = std::max(s.radii[a] + kMargin, 0.5 - kShift);
    const double hi = std::min(1.0 - s.radii[a] - kMargin, 0.5 + kShift);
    s.centre[a] = lo < hi ? uniform(rng, lo, hi) : 0.5;
  }
  return s;
}

std::vector<SyntheticCase> generate_cases(const SyntheticDomainSpec& spec) {
  spec.validate();
  std::vector<SyntheticCase> out;
  for (int i = 0; i < spec.case_count; ++i) {
    std::mt19937_64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(i)));
    Spacing3 sp;
    int ext[3];
    for (int a = 0; a < 3; ++a) {
      sp[a] = spec.spacing[a] * uniform(rng, 1.0 - spec.spacing_jitter, 1.0 + spec.spacing_jitter);
      // keep the physical field of view: extent * spacing stays nominal
      ext[a] = std::max(8, static_cast<int>(std::lround(spec.extent[a] * spec.spacing[a] / sp[a])));
      // land exactly on float-representable values so files round-trip
      sp[a] = static_cast<double>(static_cast<float>(spec.extent[a] * spec.spacing[a] / ext[a]));
    }
    const Extent3 e{ext[0], ext[1], ext[2]};
    const ShapeInstance shape = random_shape(spec.shape, rng());
    LabelGrid labels = rasterize(shape, e, spec.class_count);
    const LabelGrid tissue(e, tissue_map(shape, e, spec.class_count == 3), 3);
    Volume vol = render(tissue, sp, spec.modality, spec.intensity, rng);
    out.push_back({case_name(i), std::move(vol), std::move(labels), shape});
  }
  return out;
}

DomainSpec write_cases(const SyntheticDomainSpec& spec, const std::vector<SyntheticCase>& cases,
                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
  DomainSpec d;
  d.domain_id = spec.domain_id;
  d.name = spec.name;
  d.class_count = spec.class_count;
  d.modality = spec.modality;
  for (const auto& c : cases) {
    const auto vp = dir / (c.case_id + ".nii.gz");
    const auto lp = dir / (c.case_id + "_labels.nii.gz");
    nifti::write(c.volume, vp);
    nifti::write(label_volume(c.labels, c.volume.spacing()), lp);
    d.cases.push_back({vp, lp});
  }
  return d;
}

DomainSpec generate_domain(const SyntheticDomainSpec& spec, const std::filesystem::path& dir) {
  return write_cases(spec, generate_cases(spec), dir);
}

std::vector<SyntheticDomainSpec> suite_specs(std::uint64_t seed, int count) {
  require(count >= 1 && count <= 8, ErrorCode::kInvalidArgument, "suite size must be in [1, 8]");
  IntensityProfile ct;
  ct.bg_mean = 0.0;
  ct.bg_std = 30.0;
  ct.fg_mean = 100.0;
  ct.fg_std = 30.0;
  ct.core_mean = 200.0;
  ct.outlier_fraction = 0.003;
  ct.outlier_magnitude = 1500.0;
  IntensityProfile mr;
  mr.bg_mean = 0.3;
  mr.bg_std = 0.1;
  mr.fg_mean = 1.0;
  mr.fg_std = 0.12;
  mr.core_mean = 1.6;
  mr.ramp = 0.2;

  struct Row {
    const char* name;
    ShapeKind shape;
    Modality modality;
    Spacing3 spacing;
    int cases;
    int classes;
  };
  const Row rows[8] = {
      {"sphere_ct", ShapeKind::kSphere, Modality::kCT, {0.8, 0.8, 0.8}, 10, 2},
      {"sphere_mr", ShapeKind::kSphere, Modality::kMR, {1.0, 1.0, 1.0}, 8, 2},
      {"ellipsoid_ct_thick", ShapeKind::kEllipsoid, Modality::kCT, {1.0, 1.0, 3.0}, 10, 2},
      {"shell_mr", ShapeKind::kShell, Modality::kMR, {1.5, 1.5, 1.5}, 6, 2},
      {"sphere_mr_thick", ShapeKind::kSphere, Modality::kMR, {0.7, 0.7, 2.0}, 10, 2},
      {"ellipsoid_ct", ShapeKind::kEllipsoid, Modality::kCT, {1.2, 1.2, 1.2}, 8, 2},
      {"lobed_ellipsoid_mr", ShapeKind::kEllipsoid, Modality::kMR, {1.0, 1.0, 1.0}, 10, 3},
      {"shell_ct_thick", ShapeKind::kShell, Modality::kCT, {1.0, 1.0, 3.0}, 6, 2},
  };
  std::vector<SyntheticDomainSpec> out;
  for (int j = 0; j < count; ++j) {
    const Row& r = rows[j];
    SyntheticDomainSpec s;
    s.domain_id = j;
    s.name = r.name;
    s.shape = r.shape;
    s.modality = r.modality;
    s.intensity = r.modality == Modality::kCT ? ct : mr;
    s.spacing = r.spacing;
    s.extent = {31, 31, 31};
    s.spacing_jitter = 0.03;
    s.case_count = r.cases;
    s.class_count = r.classes;
    s.seed = mix_seed(seed, 100 + static_cast<std::uint64_t>(j));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<DomainSpec> generate_suite(std::uint64_t seed, const std::filesystem::path& outdir, int count) {
  std::vector<DomainSpec> domains;
  for (const auto& s : suite_specs(seed, count))
    domains.push_back(generate_domain(s, outdir / ("domain" + std::to_string(s.domain_id))));
  write_manifest(domains, outdir / "manifest.txt");
  return domains;
}

SyntheticDomainSpec seg_task_spec(std::uint64_t seed, int case_count) {
  SyntheticDomainSpec s;
  s.domain_id = 0;
  s.name = "organ_ct";
  s.shape = ShapeKind::kEllipsoid;
  s.modality = Modality::kCT;
  s.intensity.bg_mean = -20.0;
  s.intensity.bg_std = 35.0;
  s.intensity.fg_mean = 70.0;
  s.intensity.fg_std = 35.0;
  s.intensity.outlier_fraction = 0.002;
  s.intensity.outlier_magnitude = 1200.0;
  s.spacing = {0.9, 0.9, 1.6};
  s.extent = {31, 31, 31};
  s.spacing_jitter = 0.03;
  s.case_count = case_count;
  s.class_count = 2;
  s.seed = mix_seed(seed, 900);
  return s;
}

std::vector<NoduleCase> generate_nodules(std::uint64_t seed, int count, Extent3 e) {
  require(count >= 2, ErrorCode::kInvalidArgument, "need at least 2 nodules");
  std::vector<NoduleCase> out;
  IntensityProfile p;
  p.bg_mean = -600.0;  // lung-like surroundings
  p.bg_std = 60.0;
  p.fg_mean = 40.0;
  p.fg_std = 60.0;
  p.outlier_fraction = 0.002;
  p.outlier_magnitude = 1500.0;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(mix_seed(seed, 5000 + static_cast<std::uint64_t>(i)));
    const bool malignant = i % 2 == 1;
    std::vector<std::uint8_t> mask(e.count(), 0);
    auto blob = [&](std::array<double, 3> c, double r) {
      for (int z = 0; z < e.nz; ++z)
        for (int y = 0; y < e.ny; ++y)
          for (int x = 0; x < e.nx; ++x) {
            const double dx = x + 0.5 - c[0], dy = y + 0.5 - c[1], dz = z + 0.5 - c[2];
            if (dx * dx + dy * dy + dz * dz <= r * r) mask[e.index(x, y, z)] = 1;
          }
    };
    std::array<double, 3> c;
    for (int a = 0; a < 3; ++a) c[a] = e[a] * uniform(rng, 0.4, 0.6);
    const double r = uniform(rng, 4.0, 6.0);
    blob(c, r);
    if (malignant) {
      // lobulated outline: satellite blobs straddling the surface
      const int lobes = 3 + static_cast<int>(rng() % 3);
      for (int k = 0; k < lobes; ++k) {
        std::normal_distribution<double> n;
        double d[3] = {n(rng), n(rng), n(rng)};
        const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) + 1e-12;
        std::array<double, 3> lc;
        for (int a = 0; a < 3; ++a) lc[a] = c[a] + d[a] / len * r;
        blob(lc, uniform(rng, 1.8, 2.8));
      }
    }
    const LabelGrid labels(e, mask, 2);
    Volume vol = render(labels, {0.8, 0.8, 0.8}, Modality::kCT, p, rng);
    std::array<int, 4> ratings{};
    std::uniform_real_distribution<double> u01;
    if (u01(rng) < 0.1) {
      ratings = {3, 3, 4, 4};  // readers split evenly
    } else {
      for (int& rt : ratings) {
        const double jitter = u01(rng);
        rt = malignant ? (jitter < 0.6 ? 5 : jitter < 0.9 ? 4 : 3) : (jitter < 0.3 ? 1 : jitter < 0.75 ? 2 : 3);
      }
    }
    out.push_back({"nodule" + case_name(i).substr(4), std::move(vol), ratings, normalize::merge_malignancy(ratings)});
  }
  return out;
}

void write_nodules(const std::vector<NoduleCase>& cases, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
  std::ofstream f(dir / "nodules.csv", std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + (dir / "nodules.csv").string());
  f << "case_id,volume,r1,r2,r3,r4\n";
  for (const auto& c : cases) {
    const std::string file = c.case_id + ".nii.gz";
    nifti::write(c.volume, dir / file);
    f << c.case_id << ',' << file;
    for (int r : c.ratings) f << ',' << r;
    f << '\n';
  }
  if (!f) fail(ErrorCode::kIoFailure, "short write to nodules.csv");
}

std::vector<ClsCase> load_nodules(const std::filesystem::path& csv) {
  std::ifstream f(csv);
  if (!f) fail(ErrorCode::kIoFailure, "cannot open " + csv.string());
  std::string line;
  std::getline(f, line);
  require(line == "case_id,volume,r1,r2,r3,r4", ErrorCode::kParseError, csv.string() + ": unexpected header");
  std::vector<ClsCase> out;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    require(cells.size() == 6, ErrorCode::kParseError, "line " + std::to_string(lineno) + ": expected 6 fields");
    std::vector<int> ratings;
    for (int k = 2; k < 6; ++k) {
      try {
        ratings.push_back(std::stoi(cells[k]));
      } catch (const std::exception&) {
        fail(ErrorCode::kParseError, "line " + std::to_string(lineno) + ": bad rating '" + cells[k] + "'");
      }
    }
    const auto m = normalize::merge_malignancy(ratings);
    if (m == normalize::Malignancy::kExcluded) continue;
    out.push_back({cells[0], csv.parent_path() / cells[1], m == normalize::Malignancy::kMalignant ? 1 : 0});
  }
  return out;
}

}  // namespace med3d::synthetic
