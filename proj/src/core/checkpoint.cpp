#include "paint/core/checkpoint.hpp"

#include <cstring>

#include "paint/core/error.hpp"
#include "paint/core/io.hpp"

namespace paint {

static const char kMagic[8] = {'P', 'A', 'I', 'N', 'T', 'C', 'K', 'P'};

const Tensor& Checkpoint::get(const std::string& name) const {
  auto it = tensors.find(name);
  PAINT_CHECK_DATA(it != tensors.end(), "checkpoint missing tensor: " + name);
  return it->second;
}

void Checkpoint::save(const std::string& path) const {
  nlohmann::json header = meta;
  auto dir = nlohmann::json::array();
  for (const auto& [name, t] : tensors)
    dir.push_back({{"name", name}, {"shape", t.shape()}});
  header["tensor_dir"] = dir;
  std::string js = header.dump();

  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  uint32_t ver = kVersion;
  uint64_t jlen = js.size();
  out.insert(out.end(), (uint8_t*)&ver, (uint8_t*)&ver + 4);
  out.insert(out.end(), (uint8_t*)&jlen, (uint8_t*)&jlen + 8);
  out.insert(out.end(), js.begin(), js.end());
  for (const auto& [name, t] : tensors) {
    const auto* p = (const uint8_t*)t.data();
    out.insert(out.end(), p, p + sizeof(float) * (size_t)t.numel());
  }
  io::write_file_atomic(path, out.data(), out.size());
}

Checkpoint Checkpoint::load(const std::string& path) {
  auto bytes = io::read_file(path);
  PAINT_CHECK_DATA(bytes.size() >= 20 && !std::memcmp(bytes.data(), kMagic, 8),
                   "not a checkpoint file: " + path);
  uint32_t ver;
  uint64_t jlen;
  std::memcpy(&ver, bytes.data() + 8, 4);
  std::memcpy(&jlen, bytes.data() + 12, 8);
  PAINT_CHECK_DATA(ver <= kVersion,
                   "checkpoint format version " + std::to_string(ver) +
                       " is newer than supported " + std::to_string(kVersion));
  PAINT_CHECK_DATA(bytes.size() >= 20 + jlen, "truncated checkpoint: " + path);

  Checkpoint ck;
  ck.meta = nlohmann::json::parse(bytes.begin() + 20,
                                  bytes.begin() + 20 + (ptrdiff_t)jlen);
  auto dir = ck.meta["tensor_dir"];
  ck.meta.erase("tensor_dir");
  size_t off = 20 + (size_t)jlen;
  for (const auto& entry : dir) {
    std::string name = entry["name"];
    std::vector<int> shape = entry["shape"].get<std::vector<int>>();
    Tensor t(shape);
    size_t nbytes = sizeof(float) * (size_t)t.numel();
    PAINT_CHECK_DATA(off + nbytes <= bytes.size(),
                     "truncated checkpoint tensor: " + name);
    std::memcpy(t.data(), bytes.data() + off, nbytes);
    off += nbytes;
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

}  // namespace paint
