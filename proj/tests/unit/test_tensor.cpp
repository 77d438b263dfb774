// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "med3d/error.hpp"
#include "med3d/ops.hpp"
#include "med3d/optim.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace med3d;
using namespace med3d::ops;
using oracle::DTape;
using oracle::DTensor;
using oracle::Dims5;

namespace {

using FTensor = Tensor<float>;
using FTape = Tape<float>;

std::vector<double> vals(const DTensor& t) { return {t.values().begin(), t.values().end()}; }

double max_abs_diff(const std::vector<double>& a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("tape basics") {
  DTape tape;
  DTensor x({3}, {1, 2, 3}, true);
  tape.backward(sum(tape, x));
  for (double g : std::as_const(x).grad()) CHECK(g == 1.0);

  DTape t2;
  DTensor y({1}, {3.0}, true);
  t2.backward(sum(t2, mul(t2, y, y)));
  CHECK(std::as_const(y).grad()[0] == 6.0);

  DTape t3;
  DTensor a({2}, {1, 2}, true);
  CHECK_THROWS_AS(t3.backward(mul(t3, a, a)), Error);

  DTape t4;
  DTensor used({1}, {1.0}, true), unused({1}, {1.0}, true);
  std::vector<DTensor> params{used, unused};
  const auto rep = t4.backward(sum(t4, used), params);
  CHECK(rep.disconnected == std::vector<std::size_t>{1});
  CHECK(!unused.has_grad());
}

TEST_CASE("conv3d closed-form cases") {
  FTape tape(false);
  FTensor x({1, 1, 4, 4, 4}, std::vector<float>(64, 1.0f));
  FTensor w({1, 1, 2, 2, 2}, std::vector<float>(8, 1.0f));
  for (auto algo : {ConvAlgo::kDirect, ConvAlgo::kGemm}) {
    const auto y = conv3d(tape, x, w, {}, algo);
    CHECK(y.shape() == Shape{1, 1, 3, 3, 3});
    for (float v : y.values()) CHECK(v == 8.0f);
  }
  std::mt19937_64 rng(1);
  const auto xv = oracle::random_vector(rng, 2 * 3 * 27);
  std::vector<float> xf(xv.begin(), xv.end());
  FTensor x3({2, 3, 3, 3, 3}, xf);
  FTensor id({3, 3, 1, 1, 1}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto y = conv3d(tape, x3, id, {});
  CHECK(std::equal(y.values().begin(), y.values().end(), xf.begin()));
  CHECK_THROWS_AS(conv3d(tape, x3, FTensor({1, 2, 1, 1, 1}), {}), Error);
}

TEST_CASE("convolutions match naive oracles, both algorithms") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> ext(3, 7), ch(1, 3), kk(1, 3), ss(1, 2), pp(0, 2), rr(1, 2);
  int tried = 0;
  while (tried < 30) {
    const int k = kk(rng), s = ss(rng), p = pp(rng), r = rr(rng), cin = ch(rng), cout = ch(rng);
    const Dims5 xd{1 + tried % 2, cin, ext(rng), ext(rng), ext(rng)};
    const int span = r * (k - 1) + 1;
    if (xd.d + 2 * p < span || xd.h + 2 * p < span || xd.w + 2 * p < span) continue;
    ++tried;
    const auto xv = oracle::random_vector(rng, xd.size());
    const auto wv = oracle::random_vector(rng, std::size_t(cout) * cin * k * k * k);
    Dims5 yd{};
    const auto ref = oracle::conv3d(xv, xd, wv, cout, k, s, p, r, yd);
    DTape tape(false);
    DTensor x({xd.n, xd.c, xd.d, xd.h, xd.w}, xv), w({cout, cin, k, k, k}, wv);
    for (auto algo : {ConvAlgo::kDirect, ConvAlgo::kGemm}) {
      const auto y = conv3d(tape, x, w, {s, p, r}, algo);
      REQUIRE(y.shape() == Shape{yd.n, yd.c, yd.d, yd.h, yd.w});
      CHECK(max_abs_diff(ref, y.values()) < 1e-9);
    }

    // Transposed convolution with the same geometry.
    const int op = std::max(s, r) > 1 ? static_cast<int>(rng() % std::max(s, r)) : 0;
    const auto wt = oracle::random_vector(rng, std::size_t(cin) * cout * k * k * k);
    const ConvTransposeParams tparams{s, p, op, r};
    if (conv_transpose_output_extent(std::min({xd.d, xd.h, xd.w}), k, tparams) < 1) continue;
    Dims5 td{};
    const auto tref = oracle::conv_transpose3d(xv, xd, wt, cout, k, s, p, op, r, td);
    DTensor wtt({cin, cout, k, k, k}, wt);
    for (auto algo : {ConvAlgo::kDirect, ConvAlgo::kGemm}) {
      const auto y = conv_transpose3d(tape, x, wtt, tparams, algo);
      REQUIRE(y.shape() == Shape{td.n, td.c, td.d, td.h, td.w});
      CHECK(max_abs_diff(tref, y.values()) < 1e-9);
    }
  }
}

TEST_CASE("transposed conv doubling geometry") {
  CHECK(conv_transpose_output_extent(4, 3, {2, 1, 1, 1}) == 8);
  CHECK(conv_output_extent(32, 7, {2, 3, 1}) == 16);
  FTape tape(false);
  FTensor x({1, 2, 2, 3, 4});
  std::fill(x.values().begin(), x.values().end(), 1.0f);
  FTensor id({2, 2, 1, 1, 1}, {1, 0, 0, 1});
  const auto y = conv_transpose3d(tape, x, id, {});
  CHECK(y.shape() == x.shape());
}

TEST_CASE("float GEMM path agrees with the direct path") {
  std::mt19937_64 rng(4);
  const auto xv = oracle::random_vector(rng, 2 * 4 * 9 * 8 * 7);
  const auto wv = oracle::random_vector(rng, 5 * 4 * 27);
  FTensor x({2, 4, 9, 8, 7}, std::vector<float>(xv.begin(), xv.end()));
  FTensor w({5, 4, 3, 3, 3}, std::vector<float>(wv.begin(), wv.end()));
  FTape tape(false);
  const auto a = conv3d(tape, x, w, {2, 2, 2}, ConvAlgo::kDirect);
  const auto b = conv3d(tape, x, w, {2, 2, 2}, ConvAlgo::kGemm);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-5);
}

TEST_CASE("batchnorm contracts") {
  std::mt19937_64 rng(3);
  const auto xv = oracle::random_vector(rng, 2 * 3 * 4 * 4 * 4, -5.0, 9.0);
  DTensor x({2, 3, 4, 4, 4}, xv);
  DTensor g({3}, {1, 1, 1}), b({3}, {0, 0, 0});
  RunningStats<double> rs{DTensor({3}, {0, 0, 0}), DTensor({3}, {1, 1, 1})};
  DTape tape(false);
  const auto y = batchnorm3d(tape, x, g, b, rs, NormMode::kTrain);
  const std::size_t per = 64;
  for (int c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (int n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < per; ++i) m += y.values()[(n * 3 + c) * per + i];
    m /= 2 * per;
    for (int n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < per; ++i) {
        const double d = y.values()[(n * 3 + c) * per + i] - m;
        v += d * d;
      }
    v /= 2 * per;
    CHECK(std::abs(m) < 1e-5);
    CHECK(std::abs(v - 1.0) < 1e-4);
  }
  CHECK(rs.mean.values()[0] != 0.0);

  DTensor g2({3}, {2, 2, 2}), b2({3}, {3, 3, 3});
  const auto y2 = batchnorm3d(tape, y, g2, b2, rs, NormMode::kTrain);
  double m = 0.0;
  for (double v : y2.values()) m += v;
  CHECK(m / y2.numel() == doctest::Approx(3.0).epsilon(1e-6));

  RunningStats<double> unit{DTensor({3}, {0, 0, 0}), DTensor({3}, {1, 1, 1})};
  const auto ye = batchnorm3d(tape, x, g, b, unit, NormMode::kEval);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(ye.values()[i] - xv[i]) < 1e-4 * (1 + std::abs(xv[i])));
}

TEST_CASE("pooling, relu, linear, upsample closed forms") {
  DTape tape(false);
  const auto r = relu(tape, DTensor({3}, {-1, 0, 2}));
  CHECK(vals(r) == std::vector<double>{0, 0, 2});

  const auto mp = maxpool3d(tape, DTensor({1, 1, 5, 5, 5}, std::vector<double>(125, 4.0)));
  for (double v : mp.values()) CHECK(v == 4.0);
  CHECK(mp.shape() == Shape{1, 1, 3, 3, 3});

  std::vector<double> ramp(8);
  std::iota(ramp.begin(), ramp.end(), 1.0);
  CHECK(global_avgpool(tape, DTensor({1, 1, 2, 2, 2}, ramp)).item() == 4.5);

  const auto lin = linear(tape, DTensor({1, 3}, {1, 2, 3}), DTensor({3, 1}, {1, 1, 1}), DTensor({1}, {0}));
  CHECK(lin.item() == 6.0);

  std::mt19937_64 rng(6);
  const auto a = oracle::random_vector(rng, 4 * 5), b = oracle::random_vector(rng, 5 * 3),
             bias = oracle::random_vector(rng, 3);
  const auto lr = linear(tape, DTensor({4, 5}, a), DTensor({5, 3}, b), DTensor({3}, bias));
  auto ref = oracle::matmul(a, b, 4, 5, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) ref[i * 3 + j] += bias[j];
  CHECK(max_abs_diff(ref, lr.values()) < 1e-12);

  const auto src = oracle::random_vector(rng, 3 * 4 * 5);
  const auto up = trilinear_upsample(tape, DTensor({1, 1, 3, 4, 5}, src), {6, 8, 10});
  for (int z = 0; z < 6; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 10; ++x) {
        const double ref_v = oracle::trilinear_sample(src, 3, 4, 5, oracle::source_coord(z, 0.5),
                                                      oracle::source_coord(y, 0.5), oracle::source_coord(x, 0.5));
        CHECK(std::abs(up.values()[(z * 8 + y) * 10 + x] - ref_v) < 1e-12);
      }
  const auto same = trilinear_upsample(tape, DTensor({1, 1, 3, 4, 5}, src), {3, 4, 5});
  CHECK(vals(same) == src);
}

TEST_CASE("cross entropy closed forms") {
  DTape tape(false);
  std::vector<std::int32_t> t{0, 1};
  CHECK(softmax_cross_entropy(tape, DTensor({2, 2}, {0, 0, 0, 0}), t).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(softmax_cross_entropy(tape, DTensor({1, 2}, {20, 0}), std::vector<std::int32_t>{0}).item() < 1e-8);
  CHECK_THROWS_AS(softmax_cross_entropy(tape, DTensor({1, 2}, {0, 0}), std::vector<std::int32_t>{2}), Error);
  CHECK(softmax_cross_entropy(tape, DTensor({1, 2}, {3, 0}), std::vector<std::int32_t>{-1}, -1).item() == 0.0);

  std::mt19937_64 rng(2);
  const auto lv = oracle::random_vector(rng, 2 * 3 * 2 * 2 * 2, -4, 4);
  std::vector<std::int32_t> tgt(16);
  for (auto& v : tgt) v = static_cast<std::int32_t>(rng() % 3);
  double ref = 0.0;
  for (int n = 0; n < 2; ++n)
    for (int p = 0; p < 8; ++p) {
      double z = 0.0;
      for (int c = 0; c < 3; ++c) z += std::exp(lv[(n * 3 + c) * 8 + p]);
      ref += -std::log(std::exp(lv[(n * 3 + tgt[n * 8 + p]) * 8 + p]) / z);
    }
  CHECK(softmax_cross_entropy(tape, DTensor({2, 3, 2, 2, 2}, lv), tgt).item() ==
        doctest::Approx(ref / 16).epsilon(1e-9));
  const auto sm = softmax_channels(DTensor({2, 3, 2, 2, 2}, lv));
  for (int n = 0; n < 2; ++n)
    for (int p = 0; p < 8; ++p) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += sm.values()[(n * 3 + c) * 8 + p];
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("gradient checks, a few instances per op") {
  std::mt19937_64 rng(77);
  auto rnd = [&](Shape s) {
    const auto v = oracle::random_vector(rng, tensor::numel(s));
    return DTensor(s, v);
  };
  const ConvParams cp{2, 1, 2};
  CHECK(oracle::gradcheck([&](DTape& t, const auto& in) { return conv3d(t, in[0], in[1], cp, ConvAlgo::kGemm); },
                          {rnd({1, 2, 5, 4, 6}), rnd({3, 2, 2, 2, 2})}, rng) < 1e-4);
  CHECK(oracle::gradcheck([&](DTape& t, const auto& in) { return conv3d(t, in[0], in[1], cp, ConvAlgo::kDirect); },
                          {rnd({1, 2, 5, 4, 6}), rnd({3, 2, 2, 2, 2})}, rng) < 1e-4);
  const ConvTransposeParams tp{2, 1, 1, 1};
  CHECK(oracle::gradcheck(
            [&](DTape& t, const auto& in) { return conv_transpose3d(t, in[0], in[1], tp); },
            {rnd({1, 2, 3, 2, 3}), rnd({2, 2, 3, 3, 3})}, rng) < 1e-4);
  CHECK(oracle::gradcheck(
            [&](DTape& t, const auto& in) {
              RunningStats<double> rs{DTensor({2}), DTensor({2}, {1, 1})};
              return batchnorm3d(t, in[0], in[1], in[2], rs, NormMode::kTrain);
            },
            {rnd({2, 2, 2, 3, 2}), rnd({2}), rnd({2})}, rng) < 1e-4);
  CHECK(oracle::gradcheck([&](DTape& t, const auto& in) { return maxpool3d(t, in[0]); }, {rnd({1, 2, 5, 4, 3})},
                          rng) < 1e-4);
  CHECK(oracle::gradcheck([&](DTape& t, const auto& in) { return trilinear_upsample(t, in[0], {5, 7, 3}); },
                          {rnd({1, 2, 3, 4, 2})}, rng) < 1e-4);
  CHECK(oracle::gradcheck(
            [&](DTape& t, const auto& in) {
              const std::vector<std::int32_t> tg{0, 2, 1, 1, 0, 2};
              return softmax_cross_entropy(t, in[0], tg);
            },
            {rnd({1, 3, 1, 2, 3})}, rng) < 1e-4);
}

TEST_CASE("sgd recurrence") {
  std::vector<float> p{1.0f}, g{1.0f}, buf{0.0f};
  optim::SgdOptions o{0.1, 0.9, 0.0};
  optim::sgd_update<float>(p, g, buf, o);
  CHECK(p[0] == doctest::Approx(0.9));
  optim::sgd_update<float>(p, g, buf, o);
  CHECK(p[0] == doctest::Approx(0.71));

  std::vector<double> q{2.0}, qg{5.0}, qb{0.0};
  optim::sgd_update<double>(q, qg, qb, {0.0, 0.9, 0.001});
  CHECK(q[0] == 2.0);

  std::mt19937_64 rng(5);
  std::vector<double> x = oracle::random_vector(rng, 6), b(6, 0.0), xr = x, br(6, 0.0);
  const optim::SgdOptions so{0.05, 0.9, 0.001};
  for (int s = 0; s < 10; ++s) {
    const auto gr = oracle::random_vector(rng, 6);
    optim::sgd_update<double>(x, gr, b, so);
    for (int i = 0; i < 6; ++i) {
      const double gi = gr[i] + 0.001 * xr[i];
      br[i] = 0.9 * br[i] + gi;
      xr[i] -= 0.05 * br[i];
    }
  }
  CHECK(max_abs_diff(xr, x) < 1e-12);
}

TEST_CASE("adam recurrence") {
  std::vector<double> p{1.0}, g{0.0}, m{0.0}, v{0.0};
  optim::adam_update<double>(p, g, m, v, 1, {});
  CHECK(p[0] == 1.0);
  g[0] = 1.0;
  optim::adam_update<double>(p, g, m, v, 1, {});
  CHECK(std::abs((1.0 - p[0]) - 0.001) < 1e-6);

  std::mt19937_64 rng(8);
  std::vector<double> x = oracle::random_vector(rng, 5), mm(5, 0), vv(5, 0), xr = x, mr(5, 0), vr(5, 0);
  for (int s = 1; s <= 10; ++s) {
    const auto gr = oracle::random_vector(rng, 5);
    optim::adam_update<double>(x, gr, mm, vv, s, {0.01});
    for (int i = 0; i < 5; ++i) {
      mr[i] = 0.9 * mr[i] + 0.1 * gr[i];
      vr[i] = 0.999 * vr[i] + 0.001 * gr[i] * gr[i];
      const double mh = mr[i] / (1 - std::pow(0.9, s)), vh = vr[i] / (1 - std::pow(0.999, s));
      xr[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  CHECK(max_abs_diff(xr, x) < 1e-7);
}

TEST_CASE("optimizers skip parameters without gradients") {
  FTensor a({2}, {1, 2}, true), b({2}, {3, 4}, true);
  optim::Sgd<float> sgd({a, b}, {});
  a.ensure_grad()[0] = 1.0f;
  sgd.step();
  CHECK(a.values()[0] != 1.0f);
  CHECK(b.values()[0] == 3.0f);
  CHECK(b.values()[1] == 4.0f);
  optim::Adam<float> adam({a, b}, {});
  adam.step();
  CHECK(adam.step_count(0) == 1);
  CHECK(adam.step_count(1) == 0);
}
