// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace med3d::kv {

// Line-oriented text shared by manifests, run configs and stats files:
//
//   # comment
//   key = value
//   [section argument]
//   key = value
//
// Keys may repeat; order is preserved. Entries before the first header
// belong to a section with an empty name.

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Section {
  std::string name;
  std::string argument;
  int line = 0;
  std::vector<Entry> entries;

  /// Last value bound to key, if any.
  std::optional<std::string> get(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;
};

struct Document {
  std::vector<Section> sections;

  const Section* find(std::string_view name, std::string_view argument = {}) const;
};

/// Throws ParseError naming the offending line.
Document parse(std::string_view text);
Document parse_file(const std::filesystem::path& path);

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace med3d::kv
