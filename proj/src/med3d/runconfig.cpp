// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/runconfig.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "med3d/error.hpp"
#include "med3d/keyvalue.hpp"

namespace med3d {
namespace {

const ConfigField* find_field(std::string_view key) {
  for (const auto& f : config_fields())
    if (f.key == key) return &f;
  return nullptr;
}

void check_key(std::string_view key) {
  require(find_field(key) != nullptr, ErrorCode::kInvalidArgument, "unknown configuration key '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string_view t = kv::trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    fail(ErrorCode::kInvalidArgument, std::string(key) + ": '" + std::string(text) + "' is not a valid number");
  if constexpr (std::is_floating_point_v<T>)
    require(std::isfinite(v), ErrorCode::kInvalidArgument, std::string(key) + " must be finite");
  return v;
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      {"seed", "1", "base seed of every random stream"},
      {"outdir", "", "output directory"},
      {"verbosity", "1", "0 quiet, 1 progress, 2 detail (stderr only)"},
      {"manifest", "", "dataset manifest"},
      {"suite_size", "8", "gen-synthetic: number of suite domains"},
      {"gen_kind", "suite", "gen-synthetic: suite | seg-task | nodules"},
      {"cases", "", "gen-synthetic: case count of a task dataset"},
      {"clip_lo", "0.5", "normalize: lower clipping percentile"},
      {"clip_hi", "99.5", "normalize: upper clipping percentile"},
      {"depth", "10", "encoder depth (10, 18, 34, 50, 101, 152, 200)"},
      {"base_width", "8", "first-stage channels (64 = canonical network)"},
      {"dilation_rate", "2", "dilation of stages 3 and 4"},
      {"epochs", "60", "training epochs"},
      {"batch_size", "1", "items averaged per optimizer step"},
      {"lr", "", "learning rate (default depends on the mode)"},
      {"momentum", "0.9", "SGD momentum"},
      {"weight_decay", "", "weight decay (default depends on the mode)"},
      {"fraction", "1", "fraction of each domain's training cases"},
      {"domains", "", "comma-separated domain ids to train on (empty: all)"},
      {"holdout_fraction", "0.2", "held-out share of each domain / task"},
      {"eval_every", "10", "transfer: optimizer steps between evaluations"},
      {"crop", "true", "train on sampled crops"},
      {"workers", "0", "item preparation threads (0: on the training thread)"},
      {"freeze_encoder", "false", "transfer: keep encoder weights fixed"},
      {"aug_translate", "0.1", "augmentation: max translation, fraction of the foreground box"},
      {"aug_rotate_lo", "-5", "augmentation: rotation range low (degrees)"},
      {"aug_rotate_hi", "5", "augmentation: rotation range high (degrees)"},
      {"aug_scale_lo", "0.8", "augmentation: scale range low"},
      {"aug_scale_hi", "1.2", "augmentation: scale range high"},
      {"init", "scratch", "transfer: med3d:<checkpoint> or scratch"},
      {"task", "", "transfer: task manifest (seg) or nodules.csv (cls)"},
      {"pred", "", "eval: directory of predicted label volumes"},
      {"truth", "", "eval: directory of reference label volumes"},
      {"kind", "fraction", "experiment: fraction | variety"},
      {"fractions", "0.1,0.2,0.4,0.8,1", "experiment: data fractions"},
      {"sizes", "1,2,4,8", "experiment: domain subset sizes"},
  };
  return fields;
}

std::string_view source_name(RunConfig::Source s) noexcept {
  switch (s) {
    case RunConfig::Source::kFlag: return "flag";
    case RunConfig::Source::kFile: return "config";
    case RunConfig::Source::kEnv: return "env";
    case RunConfig::Source::kCommand: return "command default";
    case RunConfig::Source::kDefault: return "default";
    case RunConfig::Source::kUnset: return "unset";
  }
  return "?";
}

void RunConfig::load_text(std::string_view text) {
  const kv::Document doc = kv::parse(text);
  for (const auto& s : doc.sections) {
    if (!s.name.empty())
      fail(ErrorCode::kParseError, "line " + std::to_string(s.line) + ": run configs have no sections");
    for (const auto& e : s.entries) {
      if (!find_field(e.key))
        fail(ErrorCode::kParseError, "line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
      file_[e.key] = e.value;
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoFailure, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  load_text(ss.str());
}

void RunConfig::set_flag(std::string_view key, std::string value) {
  check_key(key);
  flag_[std::string(key)] = std::move(value);
}

void RunConfig::set_env(std::string_view key, std::string value) {
  check_key(key);
  env_[std::string(key)] = std::move(value);
}

void RunConfig::set_command_default(std::string_view key, std::string value) {
  check_key(key);
  command_[std::string(key)] = std::move(value);
}

RunConfig::Source RunConfig::source(std::string_view key) const {
  if (flag_.contains(key)) return Source::kFlag;
  if (file_.contains(key)) return Source::kFile;
  if (env_.contains(key)) return Source::kEnv;
  if (command_.contains(key)) return Source::kCommand;
  const ConfigField* f = find_field(key);
  if (f && !f->default_value.empty()) return Source::kDefault;
  return Source::kUnset;
}

std::optional<std::string> RunConfig::get(std::string_view key) const {
  check_key(key);
  for (const auto* layer : {&flag_, &file_, &env_, &command_}) {
    const auto it = layer->find(key);
    if (it != layer->end()) return it->second;
  }
  const ConfigField* f = find_field(key);
  if (!f->default_value.empty()) return std::string(f->default_value);
  return std::nullopt;
}

std::string RunConfig::str(std::string_view key) const {
  auto v = get(key);
  require(v.has_value() && !v->empty(), ErrorCode::kInvalidArgument, "missing required setting '" + std::string(key) + "'");
  return *v;
}

long long RunConfig::integer(std::string_view key) const { return parse_number<long long>(key, str(key)); }

std::uint64_t RunConfig::u64(std::string_view key) const { return parse_number<std::uint64_t>(key, str(key)); }

double RunConfig::real(std::string_view key) const { return parse_number<double>(key, str(key)); }

bool RunConfig::boolean(std::string_view key) const {
  const std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorCode::kInvalidArgument, std::string(key) + ": '" + v + "' is not a boolean");
}

std::vector<int> RunConfig::int_list(std::string_view key) const {
  std::vector<int> out;
  const auto v = get(key);
  if (!v || kv::trim(*v).empty()) return out;
  for (const auto& part : kv::split(*v, ',')) out.push_back(parse_number<int>(key, part));
  return out;
}

std::vector<double> RunConfig::real_list(std::string_view key) const {
  std::vector<double> out;
  const auto v = get(key);
  if (!v || kv::trim(*v).empty()) return out;
  for (const auto& part : kv::split(*v, ',')) out.push_back(parse_number<double>(key, part));
  return out;
}

std::string RunConfig::resolved_text() const {
  std::string out = "# resolved run configuration: flag > config file > environment > default\n";
  for (const auto& f : config_fields()) {
    const auto v = get(f.key);
    if (!v) continue;
    // comments only stand on their own line, so the file loads back as a config
    out += "# " + std::string(source_name(source(f.key))) + "\n" + std::string(f.key) + " = " + *v + "\n";
  }
  return out;
}

void RunConfig::write_resolved(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  const std::string text = resolved_text();
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

}  // namespace med3d
