// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "med3d/error.hpp"
#include "med3d/keyvalue.hpp"
#include "med3d/nifti.hpp"

namespace med3d::normalize {
namespace {

// Per-axis linear interpolation table for one output axis.
struct AxisTaps {
  std::vector<int> i0, i1;
  std::vector<double> f;
};

AxisTaps linear_taps(int n_in, int n_out) {
  AxisTaps t;
  t.i0.resize(n_out);
  t.i1.resize(n_out);
  t.f.resize(n_out);
  const double ratio = static_cast<double>(n_in) / n_out;
  for (int o = 0; o < n_out; ++o) {
    double c = (o + 0.5) * ratio - 0.5;
    c = std::clamp(c, 0.0, static_cast<double>(n_in - 1));
    const int i0 = static_cast<int>(std::floor(c));
    t.i0[o] = i0;
    t.i1[o] = std::min(i0 + 1, n_in - 1);
    t.f[o] = c - i0;
  }
  return t;
}

std::vector<int> nearest_taps(int n_in, int n_out) {
  std::vector<int> idx(n_out);
  const double ratio = static_cast<double>(n_in) / n_out;
  for (int o = 0; o < n_out; ++o) {
    const int i = static_cast<int>(std::floor((o + 0.5) * ratio));
    idx[o] = std::clamp(i, 0, n_in - 1);
  }
  return idx;
}

// Edge-clamped trilinear sample at continuous voxel coordinates.
double sample_trilinear(std::span<const float> v, const Extent3& e, double x, double y, double z) {
  x = std::clamp(x, 0.0, static_cast<double>(e.nx - 1));
  y = std::clamp(y, 0.0, static_cast<double>(e.ny - 1));
  z = std::clamp(z, 0.0, static_cast<double>(e.nz - 1));
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y)),
            z0 = static_cast<int>(std::floor(z));
  const int x1 = std::min(x0 + 1, e.nx - 1), y1 = std::min(y0 + 1, e.ny - 1), z1 = std::min(z0 + 1, e.nz - 1);
  const double fx = x - x0, fy = y - y0, fz = z - z0;
  auto at = [&](int a, int b, int c) { return static_cast<double>(v[e.index(a, b, c)]); };
  const double c00 = at(x0, y0, z0) * (1 - fx) + at(x1, y0, z0) * fx;
  const double c10 = at(x0, y1, z0) * (1 - fx) + at(x1, y1, z0) * fx;
  const double c01 = at(x0, y0, z1) * (1 - fx) + at(x1, y0, z1) * fx;
  const double c11 = at(x0, y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

double parse_double(const std::string& text, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kParseError, "line " + std::to_string(line) + ": not a number: '" + text + "'");
}

}  // namespace

double median(std::vector<double> values) {
  require(!values.empty(), ErrorCode::kEmptyList, "median of an empty list");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

Spacing3 median_spacing(std::span<const Spacing3> spacings) {
  require(!spacings.empty(), ErrorCode::kEmptyList, "median_spacing needs at least one case");
  Spacing3 out{};
  for (int ax = 0; ax < 3; ++ax) {
    std::vector<double> col;
    col.reserve(spacings.size());
    for (const auto& s : spacings) {
      require(std::isfinite(s[ax]) && s[ax] > 0.0, ErrorCode::kNonPositiveSpacing,
              "spacing entries must be positive");
      col.push_back(s[ax]);
    }
    out[ax] = median(std::move(col));
  }
  return out;
}

Extent3 resampled_extent(const Extent3& extent, const Spacing3& spacing, const Spacing3& target) {
  int n[3];
  for (int ax = 0; ax < 3; ++ax) {
    require(std::isfinite(target[ax]) && target[ax] > 0.0, ErrorCode::kNonPositiveTarget,
            "target spacing must be positive");
    const double s = std::round(extent[ax] * spacing[ax] / target[ax]);
    n[ax] = static_cast<int>(std::max(1.0, s));
  }
  return Extent3{n[0], n[1], n[2]};
}

Volume resample_to_spacing(const Volume& vol, const Spacing3& target, Interp mode) {
  const Extent3& in = vol.extent();
  const Extent3 out = resampled_extent(in, vol.spacing(), target);
  const auto src = vol.voxels();
  std::vector<float> dst(out.count());

  if (mode == Interp::kNearest) {
    const auto ix = nearest_taps(in.nx, out.nx), iy = nearest_taps(in.ny, out.ny),
               iz = nearest_taps(in.nz, out.nz);
    for (int z = 0; z < out.nz; ++z)
      for (int y = 0; y < out.ny; ++y)
        for (int x = 0; x < out.nx; ++x) dst[out.index(x, y, z)] = src[in.index(ix[x], iy[y], iz[z])];
  } else {
    const AxisTaps tx = linear_taps(in.nx, out.nx), ty = linear_taps(in.ny, out.ny),
                   tz = linear_taps(in.nz, out.nz);
    auto at = [&](int a, int b, int c) { return static_cast<double>(src[in.index(a, b, c)]); };
    for (int z = 0; z < out.nz; ++z) {
      const int z0 = tz.i0[z], z1 = tz.i1[z];
      const double fz = tz.f[z];
      for (int y = 0; y < out.ny; ++y) {
        const int y0 = ty.i0[y], y1 = ty.i1[y];
        const double fy = ty.f[y];
        for (int x = 0; x < out.nx; ++x) {
          const int x0 = tx.i0[x], x1 = tx.i1[x];
          const double fx = tx.f[x];
          const double c00 = at(x0, y0, z0) * (1 - fx) + at(x1, y0, z0) * fx;
          const double c10 = at(x0, y1, z0) * (1 - fx) + at(x1, y1, z0) * fx;
          const double c01 = at(x0, y0, z1) * (1 - fx) + at(x1, y0, z1) * fx;
          const double c11 = at(x0, y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
          const double c0 = c00 * (1 - fy) + c10 * fy;
          const double c1 = c01 * (1 - fy) + c11 * fy;
          dst[out.index(x, y, z)] = static_cast<float>(c0 * (1 - fz) + c1 * fz);
        }
      }
    }
  }
  return Volume(out, target, std::move(dst), vol.modality(), vol.origin_offset());
}

LabelGrid resample_labels(const LabelGrid& labels, const Spacing3& spacing, const Spacing3& target) {
  const Extent3& in = labels.extent();
  const Extent3 out = resampled_extent(in, spacing, target);
  const auto ix = nearest_taps(in.nx, out.nx), iy = nearest_taps(in.ny, out.ny),
             iz = nearest_taps(in.nz, out.nz);
  std::vector<std::uint8_t> dst(out.count());
  for (int z = 0; z < out.nz; ++z)
    for (int y = 0; y < out.ny; ++y)
      for (int x = 0; x < out.nx; ++x) dst[out.index(x, y, z)] = labels.at(ix[x], iy[y], iz[z]);
  return LabelGrid(out, std::move(dst), labels.class_count());
}

double nearest_rank_percentile(std::span<const float> values, double pct) {
  require(!values.empty(), ErrorCode::kEmptyInput, "percentile of an empty volume");
  require(pct >= 0.0 && pct <= 100.0, ErrorCode::kInvalidArgument, "percentile must be in [0, 100]");
  const double n = static_cast<double>(values.size());
  long rank = static_cast<long>(std::ceil(pct * n / 100.0));
  rank = std::clamp(rank, 1L, static_cast<long>(values.size()));
  std::vector<float> tmp(values.begin(), values.end());
  const auto kth = tmp.begin() + (rank - 1);
  std::nth_element(tmp.begin(), kth, tmp.end());
  return *kth;
}

ClipResult clip_percentiles(const Volume& vol, double lo_pct, double hi_pct) {
  require(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 100.0, ErrorCode::kInvalidArgument,
          "clip_percentiles needs 0 <= lo < hi <= 100");
  const double lo = nearest_rank_percentile(vol.voxels(), lo_pct);
  const double hi = nearest_rank_percentile(vol.voxels(), hi_pct);
  std::vector<float> out(vol.voxels().begin(), vol.voxels().end());
  const float flo = static_cast<float>(lo), fhi = static_cast<float>(hi);
  for (float& v : out) v = std::clamp(v, flo, fhi);
  return ClipResult{vol.with_voxels(std::move(out)), lo, hi};
}

std::pair<Volume, IntensityStats> zscore(const Volume& vol) {
  const auto v = vol.voxels();
  double sum = 0.0;
  for (float x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (float x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  const double denom = std::max(sd, kStdFloor);

  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>((v[i] - mean) / denom);
  IntensityStats st;
  st.mean = mean;
  st.stddev = sd;
  return {vol.with_voxels(std::move(out)), st};
}

std::pair<Volume, IntensityStats> normalize_intensity(const Volume& vol, double lo_pct, double hi_pct) {
  ClipResult clipped = clip_percentiles(vol, lo_pct, hi_pct);
  auto [z, st] = zscore(clipped.volume);
  st.clip_low = clipped.low;
  st.clip_high = clipped.high;
  return {std::move(z), st};
}

Crop sample_training_crop(const Volume& vol, const LabelGrid& labels, std::uint64_t seed) {
  require(vol.extent() == labels.extent(), ErrorCode::kShapeMismatch, "volume and labels differ in extent");
  const auto bbox = foreground_bbox(labels);
  require(bbox.has_value(), ErrorCode::kNoForeground, "crop sampling needs at least one foreground voxel");

  std::mt19937_64 rng(seed);
  const Extent3& e = vol.extent();
  int size[3], start[3];
  for (int ax = 0; ax < 3; ++ax) {
    const int full = e[ax];
    const int lo_size = std::min(2 * bbox->extent(ax), full);
    size[ax] = std::uniform_int_distribution<int>(lo_size, full)(rng);
    const int first = std::max(0, bbox->hi[ax] - size[ax] + 1);
    const int last = std::min(bbox->lo[ax], full - size[ax]);
    start[ax] = std::uniform_int_distribution<int>(first, last)(rng);
  }

  const Extent3 ce{size[0], size[1], size[2]};
  std::vector<float> cv(ce.count());
  std::vector<std::uint8_t> cl(ce.count());
  for (int z = 0; z < ce.nz; ++z)
    for (int y = 0; y < ce.ny; ++y)
      for (int x = 0; x < ce.nx; ++x) {
        const std::size_t src = e.index(x + start[0], y + start[1], z + start[2]);
        cv[ce.index(x, y, z)] = vol.voxels()[src];
        cl[ce.index(x, y, z)] = labels.labels()[src];
      }
  auto origin = vol.origin_offset();
  for (int ax = 0; ax < 3; ++ax) origin[ax] += start[ax] * vol.spacing()[ax];
  return Crop{Volume(ce, vol.spacing(), std::move(cv), vol.modality(), origin),
              LabelGrid(ce, std::move(cl), labels.class_count()),
              {start[0], start[1], start[2]}};
}

void AugmentParams::validate() const {
  require(max_translate_frac >= 0.0 && max_translate_frac <= 1.0, ErrorCode::kInvalidArgument,
          "max_translate_frac must be in [0, 1]");
  require(rotate_lo_deg <= rotate_hi_deg, ErrorCode::kInvalidArgument, "rotation interval is reversed");
  require(scale_lo > 0.0 && scale_lo <= scale_hi, ErrorCode::kInvalidArgument,
          "scale interval must be positive and ordered");
}

std::pair<Volume, LabelGrid> augment(const Volume& vol, const LabelGrid& labels, const AugmentParams& p) {
  p.validate();
  require(vol.extent() == labels.extent(), ErrorCode::kShapeMismatch, "volume and labels differ in extent");
  const Extent3& e = vol.extent();
  const Spacing3& sp = vol.spacing();

  std::mt19937_64 rng(p.seed);
  auto uniform = [&](double lo, double hi) {
    return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const auto bbox = foreground_bbox(labels);
  double shift[3];
  for (int ax = 0; ax < 3; ++ax) {
    const int extent = bbox ? bbox->extent(ax) : e[ax];
    const double m = p.max_translate_frac * extent * sp[ax];
    shift[ax] = uniform(-m, m);
  }
  const double theta = uniform(p.rotate_lo_deg, p.rotate_hi_deg) * std::numbers::pi / 180.0;
  const double scale = uniform(p.scale_lo, p.scale_hi);

  if (shift[0] == 0.0 && shift[1] == 0.0 && shift[2] == 0.0 && theta == 0.0 && scale == 1.0) {
    return {vol, labels};
  }

  const double c = std::cos(theta), s = std::sin(theta);
  double centre[3];
  for (int ax = 0; ax < 3; ++ax) centre[ax] = 0.5 * (e[ax] - 1) * sp[ax];

  std::vector<float> ov(e.count());
  std::vector<std::uint8_t> ol(e.count());
  const auto src = vol.voxels();
  for (int z = 0; z < e.nz; ++z)
    for (int y = 0; y < e.ny; ++y)
      for (int x = 0; x < e.nx; ++x) {
        // Inverse map: output position -> source position, in millimetres.
        const double dx = x * sp[0] - centre[0] - shift[0];
        const double dy = y * sp[1] - centre[1] - shift[1];
        const double dz = z * sp[2] - centre[2] - shift[2];
        const double sx = (c * dx + s * dy) / scale + centre[0];
        const double sy = (-s * dx + c * dy) / scale + centre[1];
        const double sz = dz / scale + centre[2];
        const double vx = sx / sp[0], vy = sy / sp[1], vz = sz / sp[2];
        const std::size_t o = e.index(x, y, z);
        ov[o] = static_cast<float>(sample_trilinear(src, e, vx, vy, vz));
        const int nx = std::clamp(static_cast<int>(std::lround(vx)), 0, e.nx - 1);
        const int ny = std::clamp(static_cast<int>(std::lround(vy)), 0, e.ny - 1);
        const int nz = std::clamp(static_cast<int>(std::lround(vz)), 0, e.nz - 1);
        ol[o] = labels.at(nx, ny, nz);
      }
  return {vol.with_voxels(std::move(ov)), LabelGrid(e, std::move(ol), labels.class_count())};
}

Volume hounsfield_window(const Volume& vol, double lo, double hi) {
  require(lo < hi, ErrorCode::kInvalidArgument, "window needs lo < hi");
  std::vector<float> out(vol.voxels().begin(), vol.voxels().end());
  const float flo = static_cast<float>(lo), fhi = static_cast<float>(hi);
  for (float& v : out) v = std::clamp(v, flo, fhi);
  return vol.with_voxels(std::move(out));
}

Malignancy merge_malignancy(std::span<const int> ratings) {
  require(!ratings.empty(), ErrorCode::kEmptyList, "no malignancy ratings");
  std::vector<int> r(ratings.begin(), ratings.end());
  for (int v : r) {
    require(v >= 1 && v <= 5, ErrorCode::kRatingOutOfRange,
            "malignancy rating " + std::to_string(v) + " outside 1..5");
  }
  std::sort(r.begin(), r.end());
  const std::size_t n = r.size();
  // Twice the median stays integral. Only a median strictly between the
  // benign and malignant ranges (3.5) is ambiguous.
  const int twice = n % 2 ? 2 * r[n / 2] : r[n / 2 - 1] + r[n / 2];
  if (twice <= 6) return Malignancy::kBenign;
  if (twice >= 8) return Malignancy::kMalignant;
  return Malignancy::kExcluded;
}

void write_stats(const std::vector<DomainStats>& stats, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# per-domain normalization statistics\n";
  for (const auto& d : stats) {
    out << "\n[domain " << d.domain_id << "]\n";
    out << "median_spacing = " << format_double(d.median_spacing[0]) << " "
        << format_double(d.median_spacing[1]) << " " << format_double(d.median_spacing[2]) << "\n";
    for (const auto& c : d.cases) {
      out << "case = " << c.case_id << " " << format_double(c.stats.mean) << " "
          << format_double(c.stats.stddev) << " " << format_double(c.stats.clip_low) << " "
          << format_double(c.stats.clip_high) << "\n";
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  f << out.str();
  if (!f) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

std::vector<DomainStats> read_stats(const std::filesystem::path& path) {
  const kv::Document doc = kv::parse_file(path);
  std::vector<DomainStats> out;
  for (std::size_t i = 1; i < doc.sections.size(); ++i) {
    const kv::Section& s = doc.sections[i];
    if (s.name != "domain") fail(ErrorCode::kParseError, "line " + std::to_string(s.line) + ": unknown section");
    DomainStats d;
    d.domain_id = static_cast<int>(parse_double(s.argument, s.line));
    for (const auto& e : s.entries) {
      std::istringstream fields(e.value);
      if (e.key == "median_spacing") {
        std::string a, b, c;
        if (!(fields >> a >> b >> c)) fail(ErrorCode::kParseError, "line " + std::to_string(e.line) + ": bad spacing");
        d.median_spacing = {parse_double(a, e.line), parse_double(b, e.line), parse_double(c, e.line)};
      } else if (e.key == "case") {
        std::string id, m, sd, lo, hi;
        if (!(fields >> id >> m >> sd >> lo >> hi)) {
          fail(ErrorCode::kParseError, "line " + std::to_string(e.line) + ": bad case stats");
        }
        d.cases.push_back(CaseStats{id, IntensityStats{parse_double(m, e.line), parse_double(sd, e.line),
                                                       parse_double(lo, e.line), parse_double(hi, e.line)}});
      } else {
        fail(ErrorCode::kParseError, "line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<DomainSpec> preprocess_dataset(const std::vector<DomainSpec>& domains,
                                           const std::filesystem::path& outdir, double lo_pct,
                                           double hi_pct) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) fail(ErrorCode::kIoFailure, "cannot create " + outdir.string() + ": " + ec.message());

  std::vector<DomainSpec> result;
  std::vector<DomainStats> all_stats;
  for (const DomainSpec& d : domains) {
    std::vector<Volume> vols;
    std::vector<LabelGrid> labs;
    std::vector<Spacing3> spacings;
    for (const CaseRef& c : d.cases) {
      Volume v = nifti::read(c.volume).volume;
      LabelGrid l = to_label_grid(nifti::read(c.labels).volume, d.class_count);
      require(v.extent() == l.extent(), ErrorCode::kShapeMismatch,
              "labels of " + c.volume.string() + " do not match the volume extent");
      spacings.push_back(v.spacing());
      vols.push_back(std::move(v));
      labs.push_back(std::move(l));
    }
    const Spacing3 target = median_spacing(spacings);

    DomainSpec nd = d;
    nd.median_spacing = target;
    nd.cases.clear();
    DomainStats ds;
    ds.domain_id = d.domain_id;
    ds.median_spacing = target;
    const std::filesystem::path ddir = outdir / ("domain" + std::to_string(d.domain_id));
    std::filesystem::create_directories(ddir, ec);
    if (ec) fail(ErrorCode::kIoFailure, "cannot create " + ddir.string() + ": " + ec.message());

    for (std::size_t i = 0; i < vols.size(); ++i) {
      const Volume rv = resample_to_spacing(vols[i], target, Interp::kTrilinear);
      const LabelGrid rl = resample_labels(labs[i], vols[i].spacing(), target);
      auto [nv, st] = normalize_intensity(rv, lo_pct, hi_pct);
      std::string stem = d.cases[i].volume.filename().string();
      for (const char* ext : {".gz", ".nii"}) {
        if (stem.size() > std::char_traits<char>::length(ext) &&
            stem.ends_with(ext)) {
          stem.resize(stem.size() - std::char_traits<char>::length(ext));
        }
      }
      const auto vpath = ddir / (stem + ".nii");
      const auto lpath = ddir / (stem + "_labels.nii");
      nifti::write(nv, vpath);
      nifti::write(label_volume(rl, target), lpath);
      nd.cases.push_back(CaseRef{vpath, lpath});
      ds.cases.push_back(CaseStats{stem, st});
    }
    std::sort(nd.cases.begin(), nd.cases.end(),
              [](const CaseRef& a, const CaseRef& b) { return a.volume < b.volume; });
    result.push_back(std::move(nd));
    all_stats.push_back(std::move(ds));
  }
  write_manifest(result, outdir / "manifest.txt");
  write_stats(all_stats, outdir / "stats.txt");
  return result;
}

}  // namespace med3d::normalize
