// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "med3d/error.hpp"
#include "med3d/keyvalue.hpp"

namespace med3d {
namespace {

int parse_int(const std::string& text, int line, const char* what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::kParseError,
         "line " + std::to_string(line) + ": " + what + " is not an integer: '" + text + "'");
  }
  return v;
}

int entry_line(const kv::Section& s, std::string_view key) {
  int line = s.line;
  for (const auto& e : s.entries)
    if (e.key == key) line = e.line;
  return line;
}

}  // namespace

std::vector<DomainSpec> parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  const kv::Document doc = kv::parse(text);
  if (!doc.sections.front().entries.empty()) {
    fail(ErrorCode::kParseError, "line " + std::to_string(doc.sections.front().entries.front().line) +
                                     ": entry outside of a [domain N] section");
  }

  std::vector<DomainSpec> out;
  std::set<int> seen;
  for (std::size_t i = 1; i < doc.sections.size(); ++i) {
    const kv::Section& s = doc.sections[i];
    const std::string where = "line " + std::to_string(s.line);
    if (s.name != "domain") fail(ErrorCode::kParseError, where + ": unknown section '" + s.name + "'");

    DomainSpec d;
    d.domain_id = parse_int(s.argument, s.line, "domain id");
    if (d.domain_id < 0 || d.domain_id >= kMaxDomains) {
      fail(ErrorCode::kParseError, where + ": domain id must be in [0, 7]");
    }
    if (!seen.insert(d.domain_id).second) {
      fail(ErrorCode::kDuplicateDomainId, where + ": domain id " + s.argument + " appears twice");
    }

    for (const auto& e : s.entries) {
      if (e.key != "name" && e.key != "class_count" && e.key != "modality" && e.key != "case") {
        fail(ErrorCode::kParseError, "line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
      }
    }
    d.name = s.get("name").value_or("domain" + s.argument);
    const auto cc = s.get("class_count");
    if (!cc) fail(ErrorCode::kParseError, where + ": missing class_count");
    d.class_count = parse_int(*cc, entry_line(s, "class_count"), "class_count");
    if (d.class_count < 2 || d.class_count > 255) {
      fail(ErrorCode::kParseError,
           "line " + std::to_string(entry_line(s, "class_count")) + ": class_count must be in [2, 255]");
    }
    if (const auto m = s.get("modality")) {
      const auto mod = parse_modality(*m);
      if (!mod) {
        fail(ErrorCode::kParseError,
             "line " + std::to_string(entry_line(s, "modality")) + ": unknown modality '" + *m + "'");
      }
      d.modality = *mod;
    }

    for (const auto& e : s.entries) {
      if (e.key != "case") continue;
      std::istringstream fields(e.value);
      std::string vol, lab, extra;
      if (!(fields >> vol >> lab) || (fields >> extra)) {
        fail(ErrorCode::kParseError,
             "line " + std::to_string(e.line) + ": case needs exactly '<volume> <labels>'");
      }
      d.cases.push_back(CaseRef{base_dir / vol, base_dir / lab});
    }
    if (d.cases.empty()) fail(ErrorCode::kEmptyDomain, where + ": domain " + s.argument + " has no cases");
    std::sort(d.cases.begin(), d.cases.end(),
              [](const CaseRef& a, const CaseRef& b) { return a.volume < b.volume; });
    out.push_back(std::move(d));
  }
  std::sort(out.begin(), out.end(),
            [](const DomainSpec& a, const DomainSpec& b) { return a.domain_id < b.domain_id; });
  return out;
}

std::vector<DomainSpec> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoFailure, "cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

void write_manifest(const std::vector<DomainSpec>& domains, const std::filesystem::path& path) {
  const std::filesystem::path base = path.parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    const auto r = base.empty() ? p : p.lexically_relative(base);
    return (r.empty() ? p : r).generic_string();
  };
  std::ostringstream out;
  out << "# med3d manifest\n";
  for (const DomainSpec& d : domains) {
    out << "\n[domain " << d.domain_id << "]\n";
    out << "name = " << d.name << "\n";
    out << "class_count = " << d.class_count << "\n";
    out << "modality = " << modality_name(d.modality) << "\n";
    for (const CaseRef& c : d.cases) out << "case = " << rel(c.volume) << " " << rel(c.labels) << "\n";
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIoFailure, "cannot create " + path.string());
  f << out.str();
  if (!f) fail(ErrorCode::kIoFailure, "short write to " + path.string());
}

}  // namespace med3d
