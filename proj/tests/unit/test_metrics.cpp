// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "med3d/error.hpp"
#include "med3d/metrics.hpp"
#include "support/oracles.hpp"

using namespace med3d;
using namespace med3d::metrics;

namespace {

LabelGrid grid(const Extent3& e, const std::vector<std::uint8_t>& v, int classes = 2) { return {e, v, classes}; }

std::vector<std::uint8_t> random_mask(std::mt19937_64& rng, const Extent3& e, double density) {
  std::bernoulli_distribution b(density);
  std::vector<std::uint8_t> m(e.count());
  for (auto& x : m) x = b(rng);
  if (std::find(m.begin(), m.end(), 1) == m.end()) m[rng() % m.size()] = 1;
  return m;
}

}  // namespace

TEST_CASE("dice closed forms") {
  const Extent3 e{4, 4, 1};
  std::vector<std::uint8_t> a(16, 0), b(16, 0);
  for (int i = 0; i < 8; ++i) a[i] = 1;
  for (int i = 4; i < 12; ++i) b[i] = 1;
  CHECK(dice(grid(e, a), grid(e, b)) == 0.5);
  CHECK(dice(grid(e, a), grid(e, a)) == 1.0);
  std::vector<std::uint8_t> c(16, 0);
  for (int i = 8; i < 16; ++i) c[i] = 1;
  CHECK(dice(grid(e, a), grid(e, c)) == 0.0);
  const std::vector<std::uint8_t> none(16, 0);
  CHECK(dice(grid(e, none), grid(e, none)) == 1.0);
  CHECK(dice(grid(e, none), grid(e, a)) == 0.0);
  CHECK_THROWS_AS(dice(grid(e, a), grid(Extent3{2, 8, 1}, a)), Error);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const Extent3 r{5, 6, 7};
    const auto p = grid(r, random_mask(rng, r, 0.3)), q = grid(r, random_mask(rng, r, 0.4));
    CHECK(dice(p, q) == dice(q, p));
  }
}

TEST_CASE("per-class dice excludes background") {
  const Extent3 e{3, 1, 1};
  const auto p = grid(e, {0, 1, 2}, 3), t = grid(e, {0, 1, 1}, 3);
  const auto d = dice_per_class(p, t);
  REQUIRE(d.size() == 2);
  CHECK(d[0] == doctest::Approx(2.0 / 3.0));
  CHECK(d[1] == 0.0);
}

TEST_CASE("assd closed forms") {
  const Extent3 e{8, 3, 3};
  std::vector<std::uint8_t> a(e.count(), 0), b(e.count(), 0);
  a[e.index(1, 1, 1)] = 1;
  b[e.index(4, 1, 1)] = 1;
  CHECK(assd(grid(e, a), grid(e, b), {2.0, 1.0, 1.0}) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(assd(grid(e, a), grid(e, a), {2.0, 1.0, 1.0}) == 0.0);
  const std::vector<std::uint8_t> none(e.count(), 0);
  try {
    assd(grid(e, a), grid(e, none), {1, 1, 1});
    FAIL("empty mask accepted");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kEmptyMask);
  }
}

TEST_CASE("surface voxels of a solid cube are its shell") {
  const Extent3 e{7, 7, 7};
  std::vector<std::uint8_t> m(e.count(), 0);
  for (int z = 1; z <= 5; ++z)
    for (int y = 1; y <= 5; ++y)
      for (int x = 1; x <= 5; ++x) m[e.index(x, y, z)] = 1;
  CHECK(surface_voxels(grid(e, m)).size() == 125 - 27);
  const auto s = oracle::surface(m, 7, 7, 7);
  CHECK(s.size() == 98);
}

TEST_CASE("fast assd matches the all-pairs oracle") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> ext(1, 12);
  std::uniform_real_distribution<double> sp(0.4, 3.0);
  for (int t = 0; t < 100; ++t) {
    const Extent3 e{ext(rng), ext(rng), ext(rng)};
    const Spacing3 s{sp(rng), sp(rng), sp(rng)};
    const auto a = random_mask(rng, e, 0.05 + 0.5 * (t % 5) / 5.0);
    const auto b = random_mask(rng, e, 0.1);
    const double want = oracle::assd_bruteforce(a, b, e.nx, e.ny, e.nz, s);
    CHECK(std::abs(assd(grid(e, a), grid(e, b), s) - want) < 1e-6);
    CHECK(std::abs(assd(grid(e, b), grid(e, a), s) - want) < 1e-6);
  }
}

TEST_CASE("assd scales with spacing and ignores joint translation") {
  std::mt19937_64 rng(8);
  const Extent3 e{9, 8, 7};
  for (int t = 0; t < 20; ++t) {
    const auto a = random_mask(rng, e, 0.2), b = random_mask(rng, e, 0.2);
    const Spacing3 s{0.7, 1.3, 2.1};
    const double base = assd(grid(e, a), grid(e, b), s);
    for (double k : {2.0, 0.5, 4.0}) {
      CHECK(assd(grid(e, a), grid(e, b), {k * s[0], k * s[1], k * s[2]}) == doctest::Approx(k * base).epsilon(1e-12));
    }
    // pad on every side, then shift both masks together by (2, 1, 3)
    const Extent3 big{e.nx + 6, e.ny + 6, e.nz + 6};
    std::vector<std::uint8_t> pa(big.count(), 0), pb(big.count(), 0), qa(big.count(), 0), qb(big.count(), 0);
    for (int z = 0; z < e.nz; ++z)
      for (int y = 0; y < e.ny; ++y)
        for (int x = 0; x < e.nx; ++x) {
          pa[big.index(x + 1, y + 1, z + 1)] = a[e.index(x, y, z)];
          pb[big.index(x + 1, y + 1, z + 1)] = b[e.index(x, y, z)];
          qa[big.index(x + 3, y + 2, z + 4)] = a[e.index(x, y, z)];
          qb[big.index(x + 3, y + 2, z + 4)] = b[e.index(x, y, z)];
        }
    CHECK(assd(grid(big, pa), grid(big, pb), s) == doctest::Approx(assd(grid(big, qa), grid(big, qb), s)));
  }
}

TEST_CASE("accuracy") {
  const std::vector<std::int32_t> a{0, 1, 1, 0};
  const std::vector<std::int32_t> comp{1, 0, 0, 1};
  CHECK(accuracy(a, a) == 1.0);
  CHECK(accuracy(a, comp) == 0.0);
  std::vector<std::int32_t> p(99, 1), t(99, 1);
  for (int i = 0; i < 9; ++i) t[i] = 0;
  CHECK(accuracy(p, t) == 90.0 / 99.0);
  try {
    accuracy({}, {});
    FAIL("empty accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyInput);
  }
}

TEST_CASE("convergence summary") {
  const std::vector<MetricPoint> run{{0, 0.1}, {20, 0.5}, {40, 0.81}, {60, 0.9}};
  const std::vector<MetricPoint> scratch{{0, 0.1}, {50, 0.5}, {100, 0.8}};
  CHECK(steps_to_threshold(run, 0.8) == 40);
  CHECK(steps_to_threshold(scratch, 0.8) == 100);
  CHECK(*speedup(steps_to_threshold(run, 0.8), steps_to_threshold(scratch, 0.8)) == 2.5);
  CHECK(!steps_to_threshold(run, 0.95).has_value());
  CHECK(!speedup(std::nullopt, 100).has_value());
  const std::vector<MetricPoint> flat{{5, 0.8}, {10, 0.8}};
  CHECK(steps_to_threshold(flat, 0.8) == 5);
}

TEST_CASE("evaluation csv with aggregate rows") {
  const Extent3 e{4, 4, 4};
  std::vector<std::uint8_t> t(e.count(), 0), p(e.count(), 0);
  for (int i = 0; i < 8; ++i) t[i] = 1;
  for (int i = 4; i < 12; ++i) p[i] = 1;
  auto rows = evaluate_case("a", grid(e, p), grid(e, t), {1, 1, 1});
  const auto same = evaluate_case("b", grid(e, t), grid(e, t), {1, 1, 1});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].dice == 0.5);
  CHECK(rows[0].accuracy == 56.0 / 64.0);
  CHECK(same[0].dice == 1.0);
  CHECK(*same[0].assd_mm == 0.0);
  rows.insert(rows.end(), same.begin(), same.end());
  const auto path = std::filesystem::temp_directory_path() / "med3d_eval.csv";
  write_eval_csv(rows, path);
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  CHECK(text.starts_with("case_id,class,dice,assd_mm,accuracy\na,1,0.5,"));
  CHECK(text.find("\nmean,1,0.75,") != std::string::npos);
  std::filesystem::remove(path);
}
