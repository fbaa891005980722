#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "paint/core/tensor.hpp"

namespace paint {

// Versioned container: "PAINTCKP" magic, u32 format version, JSON metadata
// (config, tags, tensor directory), then raw little-endian float blobs in
// directory order. Saves are atomic; loading a newer version fails clearly.
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  nlohmann::json meta;
  std::map<std::string, Tensor> tensors;

  void put(const std::string& name, const Tensor& t) { tensors[name] = t; }
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace paint
