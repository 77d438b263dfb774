// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>

namespace med3d {

/// Derives an independent 64-bit stream seed from a base seed and a tag
/// (splitmix64 finalizer). Used wherever one run seed fans out into
/// per-case, per-item or per-epoch generators.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag) noexcept {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept {
  for (std::uint64_t t : tags) base = mix_seed(base, t);
  return base;
}

}  // namespace med3d
