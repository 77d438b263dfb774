// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "med3d/ops.hpp"
#include "med3d/volume.hpp"

namespace med3d::model {

using ops::NormMode;
using FTensor = tensor::Tensor<float>;
using FTape = tensor::Tape<float>;

enum class BlockKind { kBasic, kBottleneck };

enum class EncoderVariant {
  kDilated,  // stages 3 and 4 keep stride 1 and dilate their 3x3x3 convs: output stride 8
  kCoarse,   // canonical stride schedule, no dilation: output stride 32
};

struct BranchSpec {
  int domain_id = 0;
  int class_count = 2;
};

enum class HeadKind { kNone, kSeg, kCls };

struct ModelConfig {
  int depth = 10;
  int in_channels = 1;
  /// Channels of the first stage; the canonical network uses 64. Smaller
  /// widths keep desk-scale runs tractable.
  int base_width = 64;
  int dilation_rate = 2;
  EncoderVariant variant = EncoderVariant::kDilated;
  std::vector<BranchSpec> branches;
  HeadKind head = HeadKind::kNone;
  int head_classes = 2;
  std::uint64_t seed = 0;

  BlockKind block() const;
  /// Throws InvalidDepth, DuplicateBranch or InvalidArgument.
  void validate() const;
};

/// Residual blocks per stage for a supported depth; InvalidDepth otherwise.
std::array<int, 4> stage_blocks(int depth);

/// Channel count of the encoder output.
int encoder_channels(const ModelConfig& cfg);

/// Output stride of the encoder variant (8 or 32).
int encoder_stride(const ModelConfig& cfg);

struct NamedParam {
  std::string name;
  FTensor tensor;
  bool buffer = false;  // running statistics: stored, never optimized
};

class Model {
 public:
  explicit Model(ModelConfig cfg);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelConfig& config() const noexcept { return cfg_; }

  /// Encoder features, N x C x D/s x H/s x W/s.
  FTensor encode(FTape& tape, const FTensor& input, NormMode mode);

  /// Encoder plus only the branch for domain_id; logits match the input's
  /// spatial extents. UnknownDomain when no such branch exists.
  FTensor forward_pretrain(FTape& tape, const FTensor& input, int domain_id, NormMode mode);

  /// Encoder plus the segmentation head. With freeze_encoder the encoder
  /// runs in eval mode so its running statistics stay fixed as well.
  FTensor forward_seg(FTape& tape, const FTensor& input, NormMode mode, bool freeze_encoder = false);

  /// Encoder plus classification head; N x head_classes.
  FTensor forward_cls(FTape& tape, const FTensor& input, NormMode mode, bool freeze_encoder = false);

  /// Every stored tensor in registration order.
  const std::vector<NamedParam>& parameters() const noexcept { return params_; }
  /// Non-buffer tensors whose name starts with prefix.
  std::vector<FTensor> trainable(std::string_view prefix = {}) const;
  std::size_t parameter_count(std::string_view prefix = {}, bool include_buffers = false) const;
  const NamedParam* find(std::string_view name) const;

  /// Marks every non-buffer tensor under prefix as (not) requiring gradients.
  void set_trainable(std::string_view prefix, bool on);

 private:
  struct Impl;
  ModelConfig cfg_;
  std::vector<NamedParam> params_;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Checkpoints

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
};

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;
  std::uint32_t format_version = kFormatVersion;
  /// depth, block, in_channels, base_width, variant, dilation_rate,
  /// branches, head, seed
  std::map<std::string, std::string> metadata;
  /// Sorted by name on save, which makes the byte stream canonical.
  std::vector<NamedArray> arrays;

  const NamedArray* find(std::string_view name) const;
};

Checkpoint to_checkpoint(const Model& m);
std::vector<std::byte> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model described by the checkpoint metadata and loads every
/// stored tensor.
Model model_from_checkpoint(const Checkpoint& c);

/// Parses the architecture fields of checkpoint metadata.
ModelConfig config_from_metadata(const std::map<std::string, std::string>& meta);

struct TransferReport {
  std::vector<std::string> copied;
  std::vector<std::string> initialized;  // target tensors left at fresh init
  std::vector<std::string> skipped;      // checkpoint tensors not used
};

/// Copies every encoder tensor by name. strict_encoder requires matching
/// depth, block, width, variant and input channels (ArchMismatch) and
/// throws ShapeMismatch on any disagreeing encoder tensor; without it,
/// mismatched tensors are skipped.
TransferReport transfer_weights(const Checkpoint& ckpt, Model& target, bool strict_encoder = true);

// ---------------------------------------------------------------------------
// Two-stage pipeline helper

struct RoiCrop {
  Volume volume;
  LabelGrid labels;
  BoundingBox box;
};

/// Expands the bounding box of the predicted foreground by a uniform
/// fraction of its extent drawn per axis from [expand_lo, expand_hi] on
/// each side, clamps it to the grid and crops volume and labels. An empty
/// prediction yields the full volume.
RoiCrop coarse_roi_extract(const LabelGrid& predicted, const Volume& vol, const LabelGrid& labels,
                           double expand_lo, double expand_hi, std::uint64_t seed);

/// Builds an N=1, C=1 input tensor from a volume (z, y, x memory order
/// matches the x-fastest voxel layout).
FTensor volume_tensor(const Volume& vol);

/// Per-voxel targets for softmax_cross_entropy.
std::vector<std::int32_t> label_targets(const LabelGrid& labels);

/// Argmax prediction of 1 x C x D x H x W logits as a label grid.
LabelGrid predict_labels(const FTensor& logits, const Extent3& extent, int class_count);

}  // namespace med3d::model
