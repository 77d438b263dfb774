// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "med3d/error.hpp"
#include "med3d/normalize.hpp"
#include "med3d/synthetic.hpp"

using namespace med3d;
using namespace med3d::synthetic;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("med3d_syn_" + name);
  fs::remove_all(d);
  return d;
}

// 6-connected components of the foreground (any label > 0)
int components(const LabelGrid& g) {
  const Extent3& e = g.extent();
  std::vector<char> seen(e.count(), 0);
  int n = 0;
  for (std::size_t s = 0; s < e.count(); ++s) {
    if (!g.labels()[s] || seen[s]) continue;
    ++n;
    std::deque<std::size_t> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      const auto i = q.front();
      q.pop_front();
      const int x = static_cast<int>(i % e.nx), y = static_cast<int>((i / e.nx) % e.ny),
                z = static_cast<int>(i / (static_cast<std::size_t>(e.nx) * e.ny));
      const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
      for (const auto& o : d) {
        const int a = x + o[0], b = y + o[1], c = z + o[2];
        if (a < 0 || b < 0 || c < 0 || a >= e.nx || b >= e.ny || c >= e.nz) continue;
        const auto j = e.index(a, b, c);
        if (g.labels()[j] && !seen[j]) {
          seen[j] = 1;
          q.push_back(j);
        }
      }
    }
  }
  return n;
}

struct Moments {
  double mean = 0, sd = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= v.size();
  for (double x : v) m.sd += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(m.sd / v.size());
  return m;
}

}  // namespace

TEST_CASE("sphere rasterization matches the analytic volume") {
  for (int n : {20, 24, 31}) {
    ShapeInstance s;
    s.kind = ShapeKind::kSphere;
    s.radii = {6.0 / n, 6.0 / n, 6.0 / n};
    const auto g = rasterize(s, {n, n, n}, 2);
    const double want = 4.0 / 3.0 * std::numbers::pi * 216.0;
    CHECK(std::abs(static_cast<double>(g.foreground_count()) - want) < 0.1 * want);
  }
}

TEST_CASE("label sets per class count") {
  const Extent3 e{24, 24, 24};
  ShapeInstance shell;
  shell.kind = ShapeKind::kShell;
  shell.radii = {0.4, 0.4, 0.4};
  shell.core_ratio = 0.5;
  auto three = rasterize(shell, e, 3);
  std::set<int> seen(three.labels().begin(), three.labels().end());
  CHECK(seen == std::set<int>{0, 1, 2});
  auto two = rasterize(shell, e, 2);
  seen = {two.labels().begin(), two.labels().end()};
  CHECK(seen == std::set<int>{0, 1});
  CHECK(two.foreground_count() == three.foreground_count());

  ShapeInstance lobed;
  lobed.kind = ShapeKind::kEllipsoid;
  lobed.radii = {0.35, 0.3, 0.25};
  const auto l3 = rasterize(lobed, e, 3);
  seen = {l3.labels().begin(), l3.labels().end()};
  CHECK(seen == std::set<int>{0, 1, 2});
  // the two substructures meet at the plane through the centre
  for (int z = 0; z < e.nz; ++z)
    for (int y = 0; y < e.ny; ++y)
      for (int x = 0; x < e.nx; ++x) {
        const int l = l3.at(x, y, z);
        if (l == 1) CHECK((x + 0.5) / e.nx <= 0.5);
        if (l == 2) CHECK((x + 0.5) / e.nx > 0.5);
      }
}

TEST_CASE("random shapes are single 6-connected components inside the borders") {
  for (ShapeKind k : {ShapeKind::kSphere, ShapeKind::kCuboid, ShapeKind::kEllipsoid, ShapeKind::kShell}) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      const auto s = random_shape(k, seed);
      const Extent3 e{31, 29, 20};
      const auto g = rasterize(s, e, k == ShapeKind::kShell ? 3 : 2);
      REQUIRE(g.foreground_count() > 0);
      CHECK(components(g) == 1);
      const auto box = foreground_bbox(g);
      REQUIRE(box.has_value());
      for (int a = 0; a < 3; ++a) {
        CHECK(box->lo[a] > 0);
        CHECK(box->hi[a] < (a == 0 ? e.nx : a == 1 ? e.ny : e.nz) - 1);
      }
    }
  }
}

TEST_CASE("domain spec validation") {
  SyntheticDomainSpec s;
  CHECK_NOTHROW(s.validate());
  auto bad = s;
  bad.case_count = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = s;
  bad.class_count = 4;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = s;
  bad.intensity.fg_mean = bad.intensity.bg_mean + 0.01;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = s;
  bad.spacing = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("generation is seeded and byte reproducible") {
  auto spec = suite_specs(11, 4)[3];
  spec.case_count = 3;
  const auto a = scratch_dir("a"), b = scratch_dir("b");
  const auto da = generate_domain(spec, a);
  const auto db = generate_domain(spec, b);
  REQUIRE(da.cases.size() == 3);
  for (std::size_t i = 0; i < da.cases.size(); ++i) {
    CHECK(slurp(da.cases[i].volume) == slurp(db.cases[i].volume));
    CHECK(slurp(da.cases[i].labels) == slurp(db.cases[i].labels));
    CHECK(!slurp(da.cases[i].volume).empty());
  }
  spec.seed ^= 1;
  const auto c = scratch_dir("c");
  const auto dc = generate_domain(spec, c);
  CHECK(slurp(da.cases[0].volume) != slurp(dc.cases[0].volume));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("suite contract") {
  const auto specs = suite_specs(2026);
  REQUIRE(specs.size() == 8);
  std::set<ShapeKind> kinds;
  std::set<Spacing3> spacings;
  std::set<Modality> modalities;
  std::set<int> classes;
  for (const auto& s : specs) {
    CHECK_NOTHROW(s.validate());
    kinds.insert(s.shape);
    spacings.insert(s.spacing);
    modalities.insert(s.modality);
    classes.insert(s.class_count);
  }
  CHECK(kinds.size() >= 3);
  CHECK(spacings.size() >= 4);
  CHECK(spacings.count(Spacing3{1.0, 1.0, 3.0}) == 1);
  CHECK(modalities == std::set<Modality>{Modality::kCT, Modality::kMR});
  CHECK(classes == std::set<int>{2, 3});

  for (const auto& s : specs) {
    const auto cases = generate_cases(s);
    REQUIRE(static_cast<int>(cases.size()) == s.case_count);
    std::vector<Spacing3> sp;
    for (const auto& c : cases) sp.push_back(c.volume.spacing());
    const Spacing3 med = normalize::median_spacing(sp);
    for (const auto& c : cases) {
      CHECK(c.labels.extent() == c.volume.extent());
      // desk-scale extents, also after resampling to the median spacing
      const Extent3 r = normalize::resampled_extent(c.volume.extent(), c.volume.spacing(), med);
      CHECK(std::max({r.nx, r.ny, r.nz}) <= 32);
      CHECK(components(c.labels) == 1);
      std::set<int> labs(c.labels.labels().begin(), c.labels.labels().end());
      CHECK(static_cast<int>(labs.size()) == s.class_count);

      const auto vox = c.volume.voxels();
      const double lo = normalize::nearest_rank_percentile(vox, 0.5);
      const double hi = normalize::nearest_rank_percentile(vox, 99.5);
      std::vector<double> fg, bg;
      for (std::size_t i = 0; i < vox.size(); ++i) {
        if (vox[i] < lo || vox[i] > hi) continue;
        (c.labels.labels()[i] ? fg : bg).push_back(vox[i]);
      }
      const auto f = moments(fg), g = moments(bg);
      CHECK(std::abs(f.mean - g.mean) >= 0.5 * (f.sd + g.sd));

      if (s.modality == Modality::kCT) {
        // sparse far-out values that percentile clipping has to remove
        int far = 0;
        for (float v : vox) far += v < lo - 500.0 || v > hi + 500.0;
        CHECK(far > 0);
      } else {
        CHECK(*std::max_element(vox.begin(), vox.end()) < 5.0f);
      }
    }
  }
}

TEST_CASE("suite writes a manifest readable by the loader") {
  const auto d = scratch_dir("suite");
  const auto domains = generate_suite(5, d, 2);
  REQUIRE(domains.size() == 2);
  const auto back = load_manifest(d / "manifest.txt");
  REQUIRE(back.size() == 2);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(back[j].domain_id == domains[j].domain_id);
    CHECK(back[j].cases.size() == domains[j].cases.size());
    for (const auto& c : back[j].cases) {
      CHECK(fs::exists(c.volume));
      CHECK(fs::exists(c.labels));
    }
  }
  fs::remove_all(d);
}

TEST_CASE("nodule ratings merge and drop ambiguous cases") {
  const auto cases = generate_nodules(4, 40);
  REQUIRE(cases.size() == 40);
  int excluded = 0, malignant = 0;
  for (const auto& c : cases) {
    CHECK(c.merged == normalize::merge_malignancy(c.ratings));
    for (int r : c.ratings) CHECK((r >= 1 && r <= 5));
    excluded += c.merged == normalize::Malignancy::kExcluded;
    malignant += c.merged == normalize::Malignancy::kMalignant;
  }
  CHECK(excluded > 0);
  CHECK(malignant > 0);
  CHECK(malignant < 40 - excluded);

  const auto d = scratch_dir("nod");
  write_nodules(cases, d);
  const auto loaded = load_nodules(d / "nodules.csv");
  CHECK(static_cast<int>(loaded.size()) == 40 - excluded);
  int m = 0;
  for (const auto& c : loaded) {
    CHECK(fs::exists(c.volume));
    m += c.label;
  }
  CHECK(m == malignant);
  fs::remove_all(d);
}
