// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "med3d/tensor.hpp"

// Differentiable operators over N x C x D x H x W feature maps. Every op
// takes the tape first; ops record themselves only when the tape is enabled
// and an input requires a gradient. Outputs are checked for NaN/Inf.
namespace med3d::ops {

using tensor::Shape;
using tensor::Tape;
using tensor::Tensor;

enum class ConvAlgo {
  kDirect,  // blocked nested loops; the reference path
  kGemm,    // im2col + BLAS matrix multiply
};

struct ConvParams {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

struct ConvTransposeParams {
  int stride = 1;
  int padding = 0;
  int output_padding = 0;
  int dilation = 1;
};

/// floor((n + 2p - r(k-1) - 1) / s) + 1
int conv_output_extent(int n, int kernel, const ConvParams& p);
/// (n - 1)s - 2p + r(k-1) + output_padding + 1
int conv_transpose_output_extent(int n, int kernel, const ConvTransposeParams& p);

/// Cross-correlation, zero padding, no bias. weight: Cout x Cin x k x k x k.
template <typename T>
Tensor<T> conv3d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight,
                 const ConvParams& p, ConvAlgo algo = ConvAlgo::kGemm);

/// Adjoint of conv3d. weight: Cin x Cout x k x k x k.
template <typename T>
Tensor<T> conv_transpose3d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight,
                           const ConvTransposeParams& p, ConvAlgo algo = ConvAlgo::kGemm);

enum class NormMode { kTrain, kEval };

/// Running statistics owned by the calling layer; updated in train mode.
template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;
};

template <typename T>
Tensor<T> batchnorm3d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& gamma,
                      const Tensor<T>& beta, RunningStats<T>& running, NormMode mode,
                      double momentum = 0.1, double eps = 1e-5);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool3d(Tape<T>& tape, const Tensor<T>& input, int kernel = 3, int stride = 2,
                    int padding = 1);

/// Mean over D, H, W; output N x C x 1 x 1 x 1.
template <typename T>
Tensor<T> global_avgpool(Tape<T>& tape, const Tensor<T>& input);

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& input, Shape shape);

/// input N x F, weight F x K, bias K -> N x K.
template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias);

/// Adds bias[c] to every voxel of channel c.
template <typename T>
Tensor<T> add_channel_bias(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& bias);

/// Trilinear resize with align_corners = false and edge clamping.
template <typename T>
Tensor<T> trilinear_upsample(Tape<T>& tape, const Tensor<T>& input, std::array<int, 3> target_dhw);

/// Mean of -log softmax(logits)[target] over positions whose target is not
/// ignore_label. logits: N x C x D x H x W or N x C; targets hold one entry
/// per position in N, D, H, W order.
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                                std::span<const std::int32_t> targets,
                                std::optional<std::int32_t> ignore_label = std::nullopt);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Sum of all elements as a 1-element tensor.
template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& input);

/// Non-differentiable helpers.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits);

/// Per-position argmax over channels of an N x C x ... tensor.
template <typename T>
std::vector<std::int32_t> argmax_channels(const Tensor<T>& logits);

}  // namespace med3d::ops
