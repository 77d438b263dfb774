// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "med3d/error.hpp"
#include "med3d/model.hpp"
#include "med3d/optim.hpp"
#include "support/stride_probe.hpp"

using namespace med3d;
using namespace med3d::model;

namespace {

ModelConfig small(int depth, int width = 4) {
  ModelConfig c;
  c.depth = depth;
  c.base_width = width;
  c.seed = 11;
  return c;
}

FTensor random_input(std::array<int, 3> dhw, std::uint64_t seed) {
  FTensor t({1, 1, dhw[0], dhw[1], dhw[2]});
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  for (float& v : t.values()) v = n(rng);
  return t;
}

std::vector<float> snapshot(const Model& m, std::string_view prefix) {
  std::vector<float> out;
  for (const auto& p : m.parameters())
    if (p.name.starts_with(prefix)) out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

bool bytes_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

// conv weights + BN scale/shift (running stats excluded)
std::size_t conv_bn(std::size_t cin, std::size_t cout, std::size_t k) { return cin * cout * k * k * k + 2 * cout; }

}  // namespace

TEST_CASE("stage tables and validation") {
  CHECK(stage_blocks(10) == std::array<int, 4>{1, 1, 1, 1});
  CHECK(stage_blocks(34) == std::array<int, 4>{3, 4, 6, 3});
  CHECK(stage_blocks(152) == std::array<int, 4>{3, 8, 36, 3});
  CHECK_THROWS_AS(stage_blocks(11), Error);
  ModelConfig c;
  c.depth = 12;
  CHECK_THROWS_AS(Model{c}, Error);
  c.depth = 10;
  c.branches = {{1, 2}, {1, 3}};
  try {
    Model m(c);
    FAIL("duplicate branch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDuplicateBranch);
  }
  CHECK(ModelConfig{.depth = 18}.block() == BlockKind::kBasic);
  CHECK(ModelConfig{.depth = 50}.block() == BlockKind::kBottleneck);
}

TEST_CASE("canonical stem and hand-enumerated parameter count") {
  Model m(ModelConfig{});
  const NamedParam* stem = m.find("encoder.stem.conv.weight");
  REQUIRE(stem != nullptr);
  CHECK(stem->tensor.shape() == tensor::Shape{64, 1, 7, 7, 7});

  // depth 10: one basic block per stage, widths 64/128/256/512.
  std::size_t expected = conv_bn(1, 64, 7);
  expected += 2 * conv_bn(64, 64, 3);
  expected += conv_bn(64, 128, 3) + conv_bn(128, 128, 3) + conv_bn(64, 128, 1);
  expected += conv_bn(128, 256, 3) + conv_bn(256, 256, 3) + conv_bn(128, 256, 1);
  expected += conv_bn(256, 512, 3) + conv_bn(512, 512, 3) + conv_bn(256, 512, 1);
  CHECK(m.parameter_count() == expected);
  CHECK(m.parameter_count("encoder.") == expected);
  CHECK(encoder_channels(m.config()) == 512);
  CHECK(encoder_channels(ModelConfig{.depth = 50}) == 2048);
}

TEST_CASE("branch parameters: one group per domain") {
  ModelConfig c = small(10);
  for (int j = 0; j < 8; ++j) c.branches.push_back({j, 2 + j % 2});
  Model m(c);
  const std::size_t enc = encoder_channels(c);
  for (int j = 0; j < 8; ++j) {
    const std::size_t cls = 2 + j % 2;
    CHECK(m.parameter_count("decoder.branch" + std::to_string(j) + ".") == enc * cls + cls);
  }
}

TEST_CASE("encoder extents: stride 8 for 32^3 at every tested depth") {
  for (int depth : {10, 18, 34, 50}) {
    Model m(small(depth, 2));
    FTape tape(false);
    const FTensor f = m.encode(tape, random_input({32, 32, 32}, 1), NormMode::kEval);
    CHECK(f.dim(2) == 4);
    CHECK(f.dim(3) == 4);
    CHECK(f.dim(4) == 4);
    CHECK(f.dim(1) == encoder_channels(m.config()));
  }
  ModelConfig coarse = small(10, 2);
  coarse.variant = EncoderVariant::kCoarse;
  Model m(coarse);
  FTape tape(false);
  const FTensor f = m.encode(tape, random_input({64, 64, 64}, 2), NormMode::kEval);
  CHECK(f.dim(2) == 2);
  CHECK(encoder_stride(coarse) == 32);
}

TEST_CASE("delta-shift probe: responses move one cell per 8 voxels") {
  Model m(small(10, 2));
  oracle::linearize_encoder(m);
  for (int axis = 0; axis < 3; ++axis) {
    const auto r = oracle::delta_shift_probe(m, axis, 512, 16, 8, 1);
    CHECK(r.responds);
    CHECK(r.feature_extent == 64);
    CHECK(r.max_rel_mismatch < 1e-5);
  }
  // a half-stride shift cannot be matched by any whole-cell shift
  const auto half0 = oracle::delta_shift_probe(m, 0, 512, 16, 4, 0);
  const auto half1 = oracle::delta_shift_probe(m, 0, 512, 16, 4, 1);
  CHECK(half0.max_rel_mismatch > 1e-3);
  CHECK(half1.max_rel_mismatch > 1e-3);
}

TEST_CASE("forward_pretrain shape contract and routing") {
  ModelConfig c = small(10);
  c.branches = {{0, 2}, {3, 3}};
  Model m(c);
  FTape tape;
  const FTensor logits = m.forward_pretrain(tape, random_input({16, 16, 16}, 3), 3, NormMode::kTrain);
  CHECK(logits.shape() == tensor::Shape{1, 3, 16, 16, 16});
  try {
    FTape t2;
    m.forward_pretrain(t2, random_input({16, 16, 16}, 3), 7, NormMode::kTrain);
    FAIL("unknown domain accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownDomain);
  }

  std::vector<std::int32_t> targets(16 * 16 * 16, 1);
  tape.backward(ops::softmax_cross_entropy(tape, logits, targets));
  for (const auto& p : m.parameters()) {
    if (p.buffer) continue;
    if (p.name.starts_with("decoder.branch0.")) {
      CHECK_MESSAGE(!p.tensor.has_grad(), p.name);
    } else {
      CHECK_MESSAGE(p.tensor.has_grad(), p.name);
    }
  }

  // second batch on the other domain: encoder grads accumulate, branch grads never cross
  const auto enc_before = std::vector<float>(m.find("encoder.stem.conv.weight")->tensor.grad().begin(),
                                             m.find("encoder.stem.conv.weight")->tensor.grad().end());
  FTape t3;
  const FTensor l0 = m.forward_pretrain(t3, random_input({16, 16, 16}, 4), 0, NormMode::kTrain);
  std::vector<std::int32_t> t0(16 * 16 * 16, 0);
  t3.backward(ops::softmax_cross_entropy(t3, l0, t0));
  CHECK(m.find("decoder.branch0.weight")->tensor.has_grad());
  const auto enc_after = m.find("encoder.stem.conv.weight")->tensor.grad();
  bool changed = false;
  for (std::size_t i = 0; i < enc_after.size(); ++i) changed |= enc_after[i] != enc_before[i];
  CHECK(changed);
}

TEST_CASE("one SGD step on domain j leaves other branches byte-identical") {
  ModelConfig c = small(10);
  for (int j = 0; j < 4; ++j) c.branches.push_back({j, 2});
  Model m(c);
  std::vector<std::vector<float>> before;
  for (int j = 0; j < 4; ++j) before.push_back(snapshot(m, "decoder.branch" + std::to_string(j) + "."));
  optim::Sgd<float> opt(m.trainable(), {});
  FTape tape;
  const FTensor logits = m.forward_pretrain(tape, random_input({16, 16, 16}, 5), 2, NormMode::kTrain);
  std::vector<std::int32_t> targets(16 * 16 * 16, 1);
  tape.backward(ops::softmax_cross_entropy(tape, logits, targets));
  opt.step();
  for (int j = 0; j < 4; ++j) {
    const bool same = bytes_equal(before[j], snapshot(m, "decoder.branch" + std::to_string(j) + "."));
    CHECK(same == (j != 2));
  }
}

TEST_CASE("segmentation head restores extents") {
  ModelConfig c = small(10);
  c.head = HeadKind::kSeg;
  Model m(c);
  FTape tape(false);
  CHECK(m.forward_seg(tape, random_input({32, 32, 32}, 6), NormMode::kEval).shape() ==
        tensor::Shape{1, 2, 32, 32, 32});
  CHECK(m.forward_seg(tape, random_input({20, 28, 12}, 6), NormMode::kEval).shape() ==
        tensor::Shape{1, 2, 20, 28, 12});

  ModelConfig canon;
  canon.head = HeadKind::kSeg;
  Model big(canon);
  const auto* up = big.find("head.seg.group1.up.weight");
  REQUIRE(up != nullptr);
  CHECK(up->tensor.dim(0) == 512);
  CHECK(up->tensor.dim(1) == 256);
  CHECK(big.find("head.seg.group1.refine.conv.weight")->tensor.dim(0) == 128);
  CHECK(big.find("head.seg.group3.refine.conv.weight")->tensor.dim(0) == 32);
  CHECK(big.find("head.seg.out.weight")->tensor.dim(0) == 2);
}

TEST_CASE("classification head") {
  ModelConfig c = small(10);
  c.head = HeadKind::kCls;
  Model m(c);
  FTape tape(false);
  CHECK(m.forward_cls(tape, random_input({16, 24, 32}, 7), NormMode::kEval).shape() == tensor::Shape{1, 2});
  CHECK(m.forward_cls(tape, random_input({8, 8, 8}, 7), NormMode::kEval).shape() == tensor::Shape{1, 2});
  CHECK_THROWS_AS(m.forward_seg(tape, random_input({8, 8, 8}, 7), NormMode::kEval), Error);
}

TEST_CASE("equal seeds give identical parameters") {
  ModelConfig c = small(18);
  c.branches = {{0, 2}};
  const Model a(c), b(c);
  CHECK(bytes_equal(snapshot(a, ""), snapshot(b, "")));
  c.seed = 12;
  const Model d(c);
  CHECK(!bytes_equal(snapshot(a, ""), snapshot(d, "")));
  // heads do not perturb the encoder draw
  ModelConfig h = small(18);
  h.head = HeadKind::kSeg;
  CHECK(bytes_equal(snapshot(a, "encoder."), snapshot(Model(h), "encoder.")));
}

TEST_CASE("checkpoint byte round-trip") {
  ModelConfig c = small(10);
  c.branches = {{0, 2}, {5, 3}};
  Model m(c);
  FTape tape;
  m.forward_pretrain(tape, random_input({16, 16, 16}, 8), 5, NormMode::kTrain);  // moves running stats
  const auto bytes = encode_checkpoint(to_checkpoint(m));
  CHECK(std::memcmp(bytes.data(), "M3DC", 4) == 0);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(encode_checkpoint(back) == bytes);
  for (std::size_t i = 1; i < back.arrays.size(); ++i) CHECK(back.arrays[i - 1].name < back.arrays[i].name);

  const Model m2 = model_from_checkpoint(back);
  CHECK(bytes_equal(snapshot(m, ""), snapshot(m2, "")));
  CHECK(encode_checkpoint(to_checkpoint(m2)) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "med3d_test_ckpt.m3dc";
  save_checkpoint(back, path);
  CHECK(encode_checkpoint(load_checkpoint(path)) == bytes);
  std::filesystem::remove(path);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(truncated), Error);
  auto bad = bytes;
  bad[0] = std::byte{'X'};
  CHECK_THROWS_AS(decode_checkpoint(bad), Error);
}

TEST_CASE("transfer copies the encoder and leaves heads fresh") {
  ModelConfig src = small(10);
  src.branches = {{0, 2}};
  src.seed = 3;
  Model pre(src);
  const Checkpoint ck = to_checkpoint(pre);

  ModelConfig dst = small(10);
  dst.head = HeadKind::kSeg;
  dst.seed = 99;
  Model target(dst);
  const auto head_before = snapshot(target, "head.");
  const TransferReport rep = transfer_weights(ck, target);
  CHECK(bytes_equal(snapshot(target, "encoder."), snapshot(pre, "encoder.")));
  CHECK(bytes_equal(snapshot(target, "head."), head_before));
  CHECK(rep.copied.size() == static_cast<std::size_t>(std::count_if(
                                 target.parameters().begin(), target.parameters().end(),
                                 [](const NamedParam& p) { return p.name.starts_with("encoder."); })));
  CHECK(std::all_of(rep.initialized.begin(), rep.initialized.end(),
                    [](const std::string& n) { return n.starts_with("head."); }));
  CHECK(rep.skipped == std::vector<std::string>{"decoder.branch0.bias", "decoder.branch0.weight"});

  // one training step changes the head; the report is a record of the copy only
  optim::Adam<float> opt(target.trainable(), {});
  FTape tape;
  const FTensor logits = target.forward_seg(tape, random_input({16, 16, 16}, 9), NormMode::kTrain);
  std::vector<std::int32_t> t(16 * 16 * 16, 1);
  tape.backward(ops::softmax_cross_entropy(tape, logits, t));
  opt.step();
  CHECK(!bytes_equal(snapshot(target, "head."), head_before));

  ModelConfig deeper = small(18);
  deeper.head = HeadKind::kSeg;
  Model d18(deeper);
  try {
    transfer_weights(ck, d18);
    FAIL("depth mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kArchMismatch);
  }
}

TEST_CASE("frozen encoder keeps its bytes") {
  ModelConfig c = small(10);
  c.head = HeadKind::kCls;
  Model m(c);
  const auto enc = snapshot(m, "encoder.");
  m.set_trainable("encoder.", false);
  optim::Adam<float> opt(m.trainable(), {});
  for (int s = 0; s < 3; ++s) {
    FTape tape;
    const FTensor logits = m.forward_cls(tape, random_input({16, 16, 16}, 10 + s), NormMode::kTrain, true);
    std::vector<std::int32_t> t{1};
    tape.backward(ops::softmax_cross_entropy(tape, logits, t));
    opt.step();
    opt.zero_grad();
  }
  CHECK(bytes_equal(snapshot(m, "encoder."), enc));
}

TEST_CASE("coarse ROI extraction") {
  const Extent3 e{20, 18, 16};
  std::vector<float> v(e.count());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  const Volume vol(e, {1.0, 1.0, 2.0}, v);
  std::vector<std::uint8_t> truth(e.count(), 0), pred(e.count(), 0);
  for (int z = 4; z <= 11; ++z)
    for (int y = 5; y <= 12; ++y)
      for (int x = 6; x <= 14; ++x) truth[e.index(x, y, z)] = 1;
  for (int z = 5; z <= 10; ++z)
    for (int y = 6; y <= 11; ++y)
      for (int x = 7; x <= 12; ++x) pred[e.index(x, y, z)] = 1;
  const LabelGrid labels(e, truth, 2), predicted(e, pred, 2);

  const RoiCrop exact = coarse_roi_extract(predicted, vol, labels, 0.0, 0.0, 1);
  CHECK(exact.box.lo == std::array<int, 3>{7, 6, 5});
  CHECK(exact.box.hi == std::array<int, 3>{12, 11, 10});
  CHECK(exact.volume.extent() == Extent3{6, 6, 6});
  CHECK(exact.volume.at(0, 0, 0) == vol.at(7, 6, 5));
  CHECK(exact.volume.origin_offset()[2] == doctest::Approx(10.0));

  const LabelGrid empty(e, std::vector<std::uint8_t>(e.count(), 0), 2);
  const RoiCrop full = coarse_roi_extract(empty, vol, labels, 0.0, 0.3, 1);
  CHECK(full.volume == vol);
  CHECK(full.labels == labels);

  auto recall = [&](const RoiCrop& r) { return static_cast<double>(r.labels.foreground_count()); };
  const double base = recall(exact);
  for (std::uint64_t s = 0; s < 500; ++s) {
    const RoiCrop r = coarse_roi_extract(predicted, vol, labels, 0.0, 0.3, s);
    CHECK(recall(r) >= base);
    for (int ax = 0; ax < 3; ++ax) {
      CHECK(r.box.lo[ax] <= exact.box.lo[ax]);
      CHECK(r.box.hi[ax] >= exact.box.hi[ax]);
      CHECK(r.box.hi[ax] < e[ax]);
    }
  }
}

TEST_CASE("tensor/volume adapters") {
  const Extent3 e{3, 2, 2};
  const Volume vol(e, {1, 1, 1}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  const FTensor t = volume_tensor(vol);
  CHECK(t.shape() == tensor::Shape{1, 1, 2, 2, 3});
  CHECK(t.values()[e.index(2, 1, 1)] == 11.0f);

  FTensor logits({1, 2, 2, 2, 3});
  for (std::size_t i = 0; i < 12; ++i) logits.values()[12 + i] = i % 2 == 0 ? 1.0f : -1.0f;
  const LabelGrid l = predict_labels(logits, e, 2);
  for (std::size_t i = 0; i < 12; ++i) CHECK(l.labels()[i] == (i % 2 == 0 ? 1 : 0));
  CHECK_THROWS_AS(predict_labels(logits, Extent3{3, 2, 3}, 2), Error);
}
