// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "xmodal/errors.hpp"

namespace xmodal {

namespace {

using nlohmann::json;

json to_json(const SampleRecord& r) {
  json j = {{"sample_id", r.sample_id}, {"subject_id", r.subject_id}, {"class_id", r.class_id},
            {"class_name", r.class_name}, {"au", r.au},                 {"rgb_path", r.rgb_path}};
  if (!r.flow_path.empty()) j["flow_path"] = r.flow_path;
  j["frames"] = r.frames;
  return j;
}

SampleRecord from_json(const json& j) {
  SampleRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.subject_id = j.at("subject_id").get<int>();
  r.class_id = j.at("class_id").get<int>();
  r.class_name = j.at("class_name").get<std::string>();
  r.au = j.at("au").get<std::string>();
  r.rgb_path = j.at("rgb_path").get<std::string>();
  if (j.contains("flow_path")) r.flow_path = j.at("flow_path").get<std::string>();
  r.frames = j.at("frames").get<int>();
  if (r.class_id < 0) throw ContractError("class_id must be non-negative");
  return r;
}

}  // namespace

std::string Manifest::to_jsonl() const {
  std::string out;
  for (const auto& r : rows) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

Manifest Manifest::from_jsonl(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.rows.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what(), line_no);
    } catch (const ContractError& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return m;
}

Manifest Manifest::load(const std::filesystem::path& dir) {
  const auto path = dir / kFileName;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_jsonl(buf.str());
}

void Manifest::save(const std::filesystem::path& dir) const {
  const auto path = dir / kFileName;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_jsonl();
  if (!out) throw IoError("failed writing manifest " + path.string());
}

int Manifest::class_count() const {
  int n = 0;
  for (const auto& r : rows) n = std::max(n, r.class_id + 1);
  return n;
}

std::vector<int> Manifest::subjects() const {
  std::set<int> s;
  for (const auto& r : rows) s.insert(r.subject_id);
  return {s.begin(), s.end()};
}

}  // namespace xmodal
