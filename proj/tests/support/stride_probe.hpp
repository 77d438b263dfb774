// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "med3d/model.hpp"

namespace med3d::oracle {

// Linearizes an encoder: batch norm becomes the identity (up to eps) and
// every weight is made positive, so all activations stay non-negative and
// ReLU never clips. The network is then a composition of shift-equivariant
// maps, and shifting a delta input by the output stride moves the response
// by exactly one feature cell.
inline void linearize_encoder(model::Model& m) {
  for (const auto& p : m.parameters()) {
    if (!p.name.starts_with("encoder.")) continue;
    model::FTensor t = p.tensor;
    auto v = t.values();
    if (p.name.ends_with("running_mean") || p.name.ends_with(".bn.bias")) {
      std::fill(v.begin(), v.end(), 0.0f);
    } else if (p.name.ends_with("running_var") || p.name.ends_with(".bn.weight")) {
      std::fill(v.begin(), v.end(), 1.0f);
    } else {
      for (float& x : v) x = std::abs(x) + 1e-3f;
    }
  }
}

struct ProbeResult {
  int feature_extent = 0;
  double max_rel_mismatch = 0.0;  // over compared cells
  bool responds = false;
};

// Feeds two delta impulses along `axis` (0 = x, 1 = y, 2 = z) separated by
// `shift` voxels into an elongated volume and compares the second response
// with the first response shifted by `cell_shift` feature cells.
inline ProbeResult delta_shift_probe(model::Model& m, int axis, int long_extent, int short_extent, int shift,
                                     int cell_shift) {
  int ext[3] = {short_extent, short_extent, short_extent};
  ext[axis] = long_extent;
  const int nx = ext[0], ny = ext[1], nz = ext[2];
  auto run = [&](int pos) {
    model::FTensor in({1, 1, nz, ny, nx});
    int c[3] = {nx / 2, ny / 2, nz / 2};
    c[axis] = pos;
    in.values()[(static_cast<std::size_t>(c[2]) * ny + c[1]) * nx + c[0]] = 1.0f;
    model::FTape tape(false);
    return m.encode(tape, in, ops::NormMode::kEval);
  };
  const int centre = long_extent / 2;
  const model::FTensor a = run(centre - shift / 2);
  const model::FTensor b = run(centre - shift / 2 + shift);

  ProbeResult r;
  const int fz = a.dim(2), fy = a.dim(3), fx = a.dim(4);
  const int fe[3] = {fx, fy, fz};
  r.feature_extent = fe[axis];
  const int channels = a.dim(1);
  double scale = 0.0;
  for (float v : a.values()) scale = std::max(scale, static_cast<double>(std::abs(v)));
  r.responds = scale > 0.0;
  if (!r.responds) return r;
  // Compare the central third of the long axis, away from padding effects.
  const int lo = fe[axis] / 3, hi = fe[axis] - fe[axis] / 3 - cell_shift;
  for (int ch = 0; ch < channels; ++ch)
    for (int z = 0; z < fz; ++z)
      for (int y = 0; y < fy; ++y)
        for (int x = 0; x < fx; ++x) {
          const int p[3] = {x, y, z};
          if (p[axis] < lo || p[axis] >= hi) continue;
          int q[3] = {x, y, z};
          q[axis] += cell_shift;
          const auto ia = ((static_cast<std::size_t>(ch) * fz + z) * fy + y) * fx + x;
          const auto ib = ((static_cast<std::size_t>(ch) * fz + q[2]) * fy + q[1]) * fx + q[0];
          const double d = std::abs(static_cast<double>(a.values()[ia]) - b.values()[ib]) / scale;
          r.max_rel_mismatch = std::max(r.max_rel_mismatch, d);
        }
  return r;
}

}  // namespace med3d::oracle
