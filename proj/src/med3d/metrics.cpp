// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "med3d/error.hpp"

namespace med3d::metrics {
namespace {

void same_extent(const LabelGrid& a, const LabelGrid& b) {
  require(a.extent() == b.extent(), ErrorCode::kShapeMismatch, "prediction and truth extents differ");
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared distance transform along one line (lower envelope of parabolas),
// with sample positions i * step.
void edt_line(std::vector<double>& f, std::size_t n, double step, std::vector<double>& d, std::vector<int>& v,
              std::vector<double>& z) {
  int k = 0;
  int first = -1;
  for (std::size_t i = 0; i < n; ++i)
    if (f[i] < kInf) {
      first = static_cast<int>(i);
      break;
    }
  if (first < 0) return;
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  const double s2 = step * step;
  for (int q = first + 1; q < static_cast<int>(n); ++q) {
    if (f[q] == kInf) continue;
    auto meet = [&](int p) { return ((f[q] + s2 * q * q) - (f[p] + s2 * p * p)) / (2.0 * s2 * (q - p)); };
    double s = meet(v[k]);
    while (s <= z[k]) {
      --k;
      s = meet(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < static_cast<int>(n); ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = (q - v[k]) * step;
    d[q] = dq * dq + f[v[k]];
  }
  for (std::size_t i = 0; i < n; ++i) f[i] = d[i];
}

// Squared mm distance from every voxel to the nearest seed voxel.
std::vector<double> squared_edt(const Extent3& e, const std::vector<std::array<int, 3>>& seeds,
                                const Spacing3& sp) {
  std::vector<double> g(e.count(), kInf);
  for (const auto& s : seeds) g[e.index(s[0], s[1], s[2])] = 0.0;
  const int n = std::max({e.nx, e.ny, e.nz});
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  const int ext[3] = {e.nx, e.ny, e.nz};
  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int j = 0; j < ext[a2]; ++j)
      for (int i = 0; i < ext[a1]; ++i) {
        int p[3];
        p[a1] = i;
        p[a2] = j;
        for (int t = 0; t < ext[axis]; ++t) {
          p[axis] = t;
          f[t] = g[e.index(p[0], p[1], p[2])];
        }
        edt_line(f, ext[axis], sp[axis], d, v, z);
        for (int t = 0; t < ext[axis]; ++t) {
          p[axis] = t;
          g[e.index(p[0], p[1], p[2])] = f[t];
        }
      }
  }
  return g;
}

}  // namespace

double dice(const LabelGrid& pred, const LabelGrid& truth, int label) {
  same_extent(pred, truth);
  std::size_t np = 0, nt = 0, both = 0;
  const auto p = pred.labels(), t = truth.labels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] == label, b = t[i] == label;
    np += a;
    nt += b;
    both += a && b;
  }
  if (np + nt == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(np + nt);
}

std::vector<double> dice_per_class(const LabelGrid& pred, const LabelGrid& truth) {
  same_extent(pred, truth);
  const int classes = std::max(pred.class_count(), truth.class_count());
  std::vector<double> out;
  for (int c = 1; c < classes; ++c) out.push_back(dice(pred, truth, c));
  return out;
}

std::vector<std::array<int, 3>> surface_voxels(const LabelGrid& mask, int label) {
  const Extent3& e = mask.extent();
  auto in = [&](int x, int y, int z) {
    return x >= 0 && y >= 0 && z >= 0 && x < e.nx && y < e.ny && z < e.nz && mask.at(x, y, z) == label;
  };
  std::vector<std::array<int, 3>> out;
  for (int z = 0; z < e.nz; ++z)
    for (int y = 0; y < e.ny; ++y)
      for (int x = 0; x < e.nx; ++x) {
        if (mask.at(x, y, z) != label) continue;
        if (!in(x - 1, y, z) || !in(x + 1, y, z) || !in(x, y - 1, z) || !in(x, y + 1, z) || !in(x, y, z - 1) ||
            !in(x, y, z + 1))
          out.push_back({x, y, z});
      }
  return out;
}

double assd(const LabelGrid& pred, const LabelGrid& truth, const Spacing3& spacing, int label) {
  same_extent(pred, truth);
  for (double s : spacing)
    require(std::isfinite(s) && s > 0.0, ErrorCode::kNonPositiveSpacing, "spacing must be positive");
  const auto sp = surface_voxels(pred, label), st = surface_voxels(truth, label);
  require(!sp.empty() && !st.empty(), ErrorCode::kEmptyMask, "ASSD needs two non-empty masks");
  const Extent3& e = pred.extent();
  const auto to_t = squared_edt(e, st, spacing), to_p = squared_edt(e, sp, spacing);
  double total = 0.0;
  for (const auto& v : sp) total += std::sqrt(to_t[e.index(v[0], v[1], v[2])]);
  for (const auto& v : st) total += std::sqrt(to_p[e.index(v[0], v[1], v[2])]);
  return total / static_cast<double>(sp.size() + st.size());
}

double accuracy(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth) {
  require(!pred.empty() && !truth.empty(), ErrorCode::kEmptyInput, "accuracy of an empty set");
  require(pred.size() == truth.size(), ErrorCode::kShapeMismatch, "prediction and truth lengths differ");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::optional<long> steps_to_threshold(std::span<const MetricPoint> log, double threshold) {
  for (const auto& p : log)
    if (p.value >= threshold) return p.step;
  return std::nullopt;
}

std::optional<double> speedup(std::optional<long> run_steps, std::optional<long> baseline_steps) {
  if (!run_steps || !baseline_steps || *run_steps <= 0) return std::nullopt;
  return static_cast<double>(*baseline_steps) / static_cast<double>(*run_steps);
}

std::vector<EvalRow> evaluate_case(const std::string& case_id, const LabelGrid& pred, const LabelGrid& truth,
                                   const Spacing3& spacing) {
  same_extent(pred, truth);
  std::vector<std::int32_t> a(pred.labels().begin(), pred.labels().end());
  std::vector<std::int32_t> b(truth.labels().begin(), truth.labels().end());
  const double acc = accuracy(a, b);
  std::vector<EvalRow> rows;
  const int classes = std::max(pred.class_count(), truth.class_count());
  for (int c = 1; c < classes; ++c) {
    EvalRow r{case_id, c, dice(pred, truth, c), std::nullopt, acc};
    if (!surface_voxels(pred, c).empty() && !surface_voxels(truth, c).empty())
      r.assd_mm = assd(pred, truth, spacing, c);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_eval_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  f.precision(10);
  f << "case_id,class,dice,assd_mm,accuracy\n";
  struct Acc {
    double dice = 0, assd = 0, accuracy = 0;
    std::size_t n = 0, n_assd = 0;
  };
  std::map<int, Acc> mean;
  for (const auto& r : rows) {
    f << r.case_id << ',' << r.cls << ',' << r.dice << ',';
    if (r.assd_mm) f << *r.assd_mm;
    f << ',' << r.accuracy << '\n';
    Acc& a = mean[r.cls];
    a.dice += r.dice;
    a.accuracy += r.accuracy;
    ++a.n;
    if (r.assd_mm) {
      a.assd += *r.assd_mm;
      ++a.n_assd;
    }
  }
  for (const auto& [cls, a] : mean) {
    f << "mean," << cls << ',' << a.dice / a.n << ',';
    if (a.n_assd) f << a.assd / a.n_assd;
    f << ',' << a.accuracy / a.n << '\n';
  }
  if (!f) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

}  // namespace med3d::metrics
