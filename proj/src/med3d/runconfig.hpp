// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace med3d {

struct ConfigField {
  std::string_view key;
  std::string_view default_value;  // empty: unset unless a command supplies one
  std::string_view help;
};

/// Every key a run accepts, in documentation order.
const std::vector<ConfigField>& config_fields();

/// Layered key/value settings. Lookup order: command-line flag, config
/// file, environment, command default, field default.
class RunConfig {
 public:
  enum class Source { kFlag, kFile, kEnv, kCommand, kDefault, kUnset };

  /// Top-level `key = value` lines only; unknown keys are a ParseError.
  void load_file(const std::filesystem::path& path);
  void load_text(std::string_view text);
  void set_flag(std::string_view key, std::string value);
  void set_env(std::string_view key, std::string value);
  /// Default that depends on the command (e.g. the optimizer's learning rate).
  void set_command_default(std::string_view key, std::string value);

  std::optional<std::string> get(std::string_view key) const;
  Source source(std::string_view key) const;

  std::string str(std::string_view key) const;  // InvalidArgument when unset
  long long integer(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;
  double real(std::string_view key) const;
  bool boolean(std::string_view key) const;
  std::vector<int> int_list(std::string_view key) const;     // empty value -> {}
  std::vector<double> real_list(std::string_view key) const;

  /// `key = value` preceded by a `# source` line for every set key, in field
  /// order. Loads back as a config file.
  std::string resolved_text() const;
  void write_resolved(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string, std::less<>> flag_, file_, env_, command_;
};

std::string_view source_name(RunConfig::Source s) noexcept;

}  // namespace med3d
