// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "med3d/error.hpp"
#include "med3d/nifti.hpp"
#include "med3d/normalize.hpp"
#include "support/oracles.hpp"

using namespace med3d;
using namespace med3d::normalize;

namespace {

Volume random_volume(std::mt19937_64& rng, Extent3 e, Spacing3 sp) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(e.count());
  for (auto& x : v) x = u(rng);
  return Volume(e, sp, std::move(v));
}

LabelGrid sphere_labels(Extent3 e, double cx, double cy, double cz, double r) {
  std::vector<std::uint8_t> l(e.count());
  for (int z = 0; z < e.nz; ++z)
    for (int y = 0; y < e.ny; ++y)
      for (int x = 0; x < e.nx; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz);
        l[e.index(x, y, z)] = d2 <= r * r ? 1 : 0;
      }
  return LabelGrid(e, std::move(l), 2);
}

// Trilinear oracle on an x-fastest grid; the oracle helper takes z/y/x order.
double oracle_at(const Volume& v, double x, double y, double z) {
  const auto& e = v.extent();
  std::vector<double> g(v.voxels().begin(), v.voxels().end());
  return oracle::trilinear_sample(g, e.nz, e.ny, e.nx, z, y, x);
}

}  // namespace

TEST_CASE("median and median spacing") {
  CHECK(median({1.0, 2.0, 3.0}) == 2.0);
  CHECK(median({1.0, 3.0}) == 2.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.3, 4.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<Spacing3> s(1 + t);
    for (auto& a : s) a = {u(rng), u(rng), u(rng)};
    const Spacing3 m = median_spacing(s);
    for (int ax = 0; ax < 3; ++ax) {
      std::vector<double> col;
      for (auto& a : s) col.push_back(a[ax]);
      CHECK(m[ax] == oracle::median(col));
    }
  }
  CHECK_THROWS_AS(median_spacing(std::vector<Spacing3>{}), Error);
}

TEST_CASE("resampled extents follow the spacing ratio") {
  CHECK(resampled_extent({50, 50, 50}, {2.0, 2.0, 2.0}, {1.0, 1.0, 1.0}) == Extent3{100, 100, 100});
  CHECK(resampled_extent({3, 3, 3}, {1, 1, 1}, {10, 10, 10}) == Extent3{1, 1, 1});
  CHECK(resampled_extent({10, 10, 10}, {1, 1, 3}, {1, 1, 1.5}) == Extent3{10, 10, 20});
  CHECK_THROWS_AS(resampled_extent({1, 1, 1}, {1, 1, 1}, {1, 0, 1}), Error);
}

TEST_CASE("trilinear resampling matches the per-voxel oracle") {
  std::mt19937_64 rng(9);
  const Volume v = random_volume(rng, {9, 8, 7}, {1.0, 1.2, 2.0});
  const Spacing3 target{1.3, 1.56, 2.6};
  const Volume r = resample_to_spacing(v, target);
  CHECK(r.spacing() == target);
  const auto& in = v.extent();
  const auto& out = r.extent();
  for (int z = 0; z < out.nz; ++z)
    for (int y = 0; y < out.ny; ++y)
      for (int x = 0; x < out.nx; ++x) {
        const double ref = oracle_at(v, oracle::source_coord(x, double(in.nx) / out.nx),
                                     oracle::source_coord(y, double(in.ny) / out.ny),
                                     oracle::source_coord(z, double(in.nz) / out.nz));
        CHECK(std::abs(r.at(x, y, z) - ref) < 1e-6);
      }
}

TEST_CASE("resampling identities") {
  std::mt19937_64 rng(1);
  const Volume v = random_volume(rng, {5, 6, 7}, {0.8, 0.9, 3.0});
  CHECK(resample_to_spacing(v, v.spacing()) == v);
  const Volume c({4, 5, 6}, {1, 1, 1}, std::vector<float>(120, 2.5f));
  const Volume rc = resample_to_spacing(c, {0.7, 1.9, 0.45});
  for (float x : rc.voxels()) CHECK(x == 2.5f);
}

TEST_CASE("label resampling never invents classes") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> lab(0, 2);
  const Extent3 e{6, 7, 5};
  std::vector<std::uint8_t> l(e.count());
  for (auto& x : l) x = static_cast<std::uint8_t>(lab(rng) == 2 ? 2 : 0);
  const LabelGrid g(e, l, 3);
  const LabelGrid r = resample_labels(g, {1, 1, 1}, {0.6, 1.7, 0.9});
  for (auto x : r.labels()) CHECK((x == 0 || x == 2));
}

TEST_CASE("percentile clipping") {
  std::vector<float> ramp(1000);
  for (int i = 0; i < 1000; ++i) ramp[i] = static_cast<float>(i);
  const Volume v({10, 10, 10}, {1, 1, 1}, ramp);
  const auto c = clip_percentiles(v);
  CHECK(c.low == 4.0);   // rank 5
  CHECK(c.high == 994.0);  // rank 995
  std::vector<double> d(ramp.begin(), ramp.end());
  CHECK(c.low == oracle::nearest_rank(d, 0.5));
  CHECK(c.high == oracle::nearest_rank(d, 99.5));

  std::vector<float> outlier(1000);
  for (int i = 0; i < 1000; ++i) outlier[i] = static_cast<float>(i % 100);
  outlier[500] = 1e6f;
  const auto co = clip_percentiles(Volume({10, 10, 10}, {1, 1, 1}, outlier));
  CHECK(co.volume.voxels()[500] == static_cast<float>(co.high));
  CHECK(co.high == 99.0);

  const Volume k({2, 2, 2}, {1, 1, 1}, std::vector<float>(8, 3.0f));
  const auto ck = clip_percentiles(k);
  CHECK(ck.low == 3.0);
  CHECK(ck.high == 3.0);
  CHECK(ck.volume == k);
}

TEST_CASE("z-score normalization") {
  const auto [z, st] = zscore(Volume({3, 1, 1}, {1, 1, 1}, {1, 2, 3}));
  CHECK(z.voxels()[0] == doctest::Approx(-1.224745).epsilon(1e-5));
  CHECK(z.voxels()[1] == doctest::Approx(0.0));
  CHECK(z.voxels()[2] == doctest::Approx(1.224745).epsilon(1e-5));
  CHECK(st.mean == 2.0);

  const auto [zc, stc] = zscore(Volume({2, 2, 2}, {1, 1, 1}, std::vector<float>(8, -4.0f)));
  for (float x : zc.voxels()) CHECK(x == 0.0f);
  CHECK(stc.stddev == 0.0);

  std::mt19937_64 rng(4);
  const Volume r = random_volume(rng, {7, 5, 6}, {1, 1, 1});
  const auto [z1, s1] = zscore(r);
  const auto [z2, s2] = zscore(z1);
  for (std::size_t i = 0; i < z1.voxels().size(); ++i) CHECK(std::abs(z1.voxels()[i] - z2.voxels()[i]) < 1e-5);
}

TEST_CASE("training crops always contain the foreground box") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> ext(8, 24);
  for (int t = 0; t < 50; ++t) {
    const Extent3 e{ext(rng), ext(rng), ext(rng)};
    const LabelGrid l = sphere_labels(e, e.nx / 2.0, e.ny / 3.0, e.nz / 2.0, 2.5);
    const Volume v(e, {1, 1, 1}, std::vector<float>(e.count(), 0.0f));
    const auto bb = *foreground_bbox(l);
    for (int s = 0; s < 20; ++s) {
      const auto c = sample_training_crop(v, l, rng());
      CHECK(c.labels.foreground_count() == l.foreground_count());
      for (int ax = 0; ax < 3; ++ax) {
        CHECK(c.offset[ax] <= bb.lo[ax]);
        CHECK(c.offset[ax] + c.volume.extent()[ax] - 1 >= bb.hi[ax]);
        CHECK(c.volume.extent()[ax] >= std::min(2 * bb.extent(ax), e[ax]));
      }
    }
  }
  const LabelGrid full(Extent3{3, 3, 3}, std::vector<std::uint8_t>(27, 1), 2);
  const Volume v3({3, 3, 3}, {1, 1, 1}, std::vector<float>(27, 1.0f));
  CHECK(sample_training_crop(v3, full, 1).volume.extent() == Extent3{3, 3, 3});
  const LabelGrid none(Extent3{3, 3, 3}, std::vector<std::uint8_t>(27, 0), 2);
  CHECK_THROWS_AS(sample_training_crop(v3, none, 1), Error);
}

TEST_CASE("augmentation contracts") {
  std::mt19937_64 rng(8);
  const Extent3 e{20, 20, 20};
  const Volume v = random_volume(rng, e, {1, 1, 1});
  const LabelGrid sphere = sphere_labels(e, 9.5, 9.5, 9.5, 6.0);

  AugmentParams id{0.0, 0.0, 0.0, 1.0, 1.0, 42};
  const auto [vi, li] = augment(v, sphere, id);
  CHECK(vi == v);
  CHECK(li == sphere);

  AugmentParams rot{0.0, 5.0, 5.0, 1.0, 1.0, 1};
  const auto [vr, lr] = augment(v, sphere, rot);
  const double before = sphere.foreground_count(), after = lr.foreground_count();
  CHECK(std::abs(after - before) / before < 0.05);

  AugmentParams full{};
  full.seed = 99;
  const auto a = augment(v, sphere, full);
  const auto b = augment(v, sphere, full);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  for (auto x : a.second.labels()) CHECK(x <= 1);
}

TEST_CASE("hounsfield window and malignancy merge") {
  const Volume v({3, 1, 1}, {1, 1, 1}, {-500, 0, 1000});
  const Volume w = hounsfield_window(v);
  CHECK(w.voxels()[0] == -200.0f);
  CHECK(w.voxels()[1] == 0.0f);
  CHECK(w.voxels()[2] == 250.0f);

  CHECK(merge_malignancy(std::vector<int>{3, 3, 2, 3}) == Malignancy::kBenign);
  CHECK(merge_malignancy(std::vector<int>{5, 4, 4, 5}) == Malignancy::kMalignant);
  CHECK(merge_malignancy(std::vector<int>{3, 4}) == Malignancy::kExcluded);
  CHECK(merge_malignancy(std::vector<int>{2, 3}) == Malignancy::kBenign);
  CHECK(merge_malignancy(std::vector<int>{3, 3, 4, 4}) == Malignancy::kExcluded);
  CHECK_THROWS_AS(merge_malignancy(std::vector<int>{0, 3}), Error);
}

TEST_CASE("stats file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "med3d_test_stats";
  std::filesystem::create_directories(dir);
  DomainStats d;
  d.domain_id = 2;
  d.median_spacing = {0.1, 1.0 / 3.0, 3.0};
  d.cases.push_back({"c1", {1.5, 0.25, -3.0, 7.125}});
  write_stats({d}, dir / "s.txt");
  const auto back = read_stats(dir / "s.txt");
  REQUIRE(back.size() == 1);
  CHECK(back[0].median_spacing == d.median_spacing);
  CHECK(back[0].cases[0].stats.clip_high == 7.125);
}
