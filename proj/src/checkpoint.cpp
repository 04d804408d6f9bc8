// Copyright (C) 2026 The xmodal Authors
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "xmodal/errors.hpp"
#include "xmodal/mxt.hpp"

namespace xmodal::ckpt {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path tensor_path(const fs::path& stem) { return fs::path(stem.string() + ".mxt"); }
fs::path index_path(const fs::path& stem) { return fs::path(stem.string() + ".json"); }

void save(const fs::path& stem, const std::vector<models::NamedTensor<float>>& tensors, const json& meta) {
  std::set<std::string> seen;
  std::vector<Tensor> values;
  values.reserve(tensors.size());
  for (const auto& t : tensors) {
    if (!seen.insert(t.name).second) throw ContractError("checkpoint: duplicate tensor name " + t.name);
    values.push_back(t.tensor);
  }
  const auto offsets = mxt::save_all(tensor_path(stem), values);

  json entries = json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    entries.push_back({{"name", tensors[i].name}, {"offset", offsets[i]}, {"shape", tensors[i].tensor.shape()}});
  }
  const json doc = {{"format", "MXT1"}, {"tensors", entries}, {"meta", meta}};
  std::ofstream os(index_path(stem), std::ios::trunc);
  if (!os) throw IoError("cannot open " + index_path(stem).string() + " for writing");
  os << doc.dump(2) << '\n';
  if (!os) throw IoError("write failed for " + index_path(stem).string());
}

Index read_index(const fs::path& stem) {
  std::ifstream is(index_path(stem));
  if (!is) throw IoError("cannot open checkpoint index " + index_path(stem).string());
  Index index;
  try {
    const json doc = json::parse(is);
    if (doc.at("format").get<std::string>() != "MXT1") throw IoError("unsupported checkpoint format");
    for (const auto& e : doc.at("tensors")) {
      index.entries.push_back({e.at("name").get<std::string>(), e.at("offset").get<std::uint64_t>(),
                               e.at("shape").get<Shape>()});
    }
    index.meta = doc.value("meta", json::object());
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint index " + index_path(stem).string() + ": " + e.what());
  }
  return index;
}

void load_into(const fs::path& stem, const std::vector<models::NamedTensor<float>>& targets) {
  const Index index = read_index(stem);
  std::map<std::string, const Entry*> by_name;
  for (const auto& e : index.entries) by_name[e.name] = &e;

  std::ifstream is(tensor_path(stem), std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint tensors " + tensor_path(stem).string());
  for (const auto& target : targets) {
    const auto it = by_name.find(target.name);
    if (it == by_name.end()) throw IoError("checkpoint " + stem.string() + " has no tensor " + target.name);
    const Entry& entry = *it->second;
    if (entry.shape != target.tensor.shape()) {
      throw IoError("checkpoint tensor " + target.name + " has shape " + shape_to_string(entry.shape) +
                    ", expected " + shape_to_string(target.tensor.shape()));
    }
    is.clear();
    is.seekg(static_cast<std::streamoff>(entry.offset));
    const Tensor stored = mxt::read(is);
    if (stored.shape() != entry.shape) throw IoError("checkpoint record for " + target.name + " disagrees with index");
    auto dst = models::NamedTensor<float>(target).tensor.data();
    std::copy(stored.data().begin(), stored.data().end(), dst.begin());
  }
}

}  // namespace xmodal::ckpt
