// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "med3d/volume.hpp"

namespace med3d {

struct CaseRef {
  std::filesystem::path volume;
  std::filesystem::path labels;
  bool operator==(const CaseRef&) const = default;
};

/// One member dataset of a multi-domain collection.
struct DomainSpec {
  int domain_id = 0;
  std::string name;
  int class_count = 2;
  Modality modality = Modality::kUnknown;
  std::optional<Spacing3> median_spacing;
  std::vector<CaseRef> cases;
};

inline constexpr int kMaxDomains = 8;

/// Parses a manifest (grammar in docs/formats.md). Case paths are resolved
/// against the manifest's directory and sorted lexicographically within
/// each domain; domains come back ordered by id.
///
/// Errors: ParseError (with line number), DuplicateDomainId, EmptyDomain.
std::vector<DomainSpec> load_manifest(const std::filesystem::path& path);
std::vector<DomainSpec> parse_manifest(std::string_view text,
                                       const std::filesystem::path& base_dir);

/// Writes paths relative to the manifest directory when possible.
void write_manifest(const std::vector<DomainSpec>& domains, const std::filesystem::path& path);

}  // namespace med3d
