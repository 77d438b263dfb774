// Copyright (c) 2026 med3d contributors
// SPDX-License-Identifier: Apache-2.0

#include "med3d/keyvalue.hpp"

#include <fstream>
#include <sstream>

#include "med3d/error.hpp"

namespace med3d::kv {

std::string_view trim(std::string_view s) noexcept {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<std::string> Section::get(std::string_view key) const {
  std::optional<std::string> found;
  for (const auto& e : entries)
    if (e.key == key) found = e.value;
  return found;
}

std::vector<std::string> Section::get_all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.key == key) out.push_back(e.value);
  return out;
}

const Section* Document::find(std::string_view name, std::string_view argument) const {
  for (const auto& s : sections)
    if (s.name == name && s.argument == argument) return &s;
  return nullptr;
}

Document parse(std::string_view text) {
  Document doc;
  doc.sections.push_back(Section{"", "", 0, {}});
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const std::string where = "line " + std::to_string(line_no);

    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorCode::kParseError, where + ": unterminated section header");
      const std::string_view inner = trim(line.substr(1, line.size() - 2));
      if (inner.empty()) fail(ErrorCode::kParseError, where + ": empty section header");
      const auto sp = inner.find_first_of(" \t");
      Section s;
      s.name = std::string(inner.substr(0, sp));
      s.argument = sp == std::string_view::npos ? "" : std::string(trim(inner.substr(sp)));
      s.line = line_no;
      doc.sections.push_back(std::move(s));
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::kParseError, where + ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorCode::kParseError, where + ": empty key");
    doc.sections.back().entries.push_back(
        Entry{std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
  }
  return doc;
}

Document parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace med3d::kv
