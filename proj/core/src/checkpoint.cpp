#include "bassl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "bassl/errors.hpp"
#include "bassl/io.hpp"

namespace bassl {

namespace {
constexpr char kMagic[4] = {'B', 'S', 'C', 'K'};
}

void write_checkpoint_file(const std::filesystem::path& path, const RawCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for write: " + path.string());
  out.write(kMagic, 4);
  io::write_u8(out, ckpt.version);
  io::write_u32(out, static_cast<uint32_t>(ckpt.config_json.size()));
  out.write(ckpt.config_json.data(), static_cast<std::streamsize>(ckpt.config_json.size()));
  for (const auto& t : ckpt.tensors) {
    io::write_u32(out, static_cast<uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    io::write_u8(out, static_cast<uint8_t>(t.shape.size()));
    for (size_t d : t.shape) io::write_u32(out, static_cast<uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

RawCheckpoint read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("corrupt checkpoint file (bad magic): " + path.string());
  }
  RawCheckpoint ckpt;
  ckpt.version = io::read_u8(in, "checkpoint version");
  const uint32_t cfg_len = io::read_u32(in, "checkpoint config length");
  ckpt.config_json.resize(cfg_len);
  io::read_bytes(in, ckpt.config_json.data(), cfg_len, "checkpoint config");

  while (in.peek() != std::char_traits<char>::eof()) {
    RawTensor t;
    const uint32_t name_len = io::read_u32(in, "checkpoint tensor name length");
    t.name.resize(name_len);
    io::read_bytes(in, t.name.data(), name_len, "checkpoint tensor name");
    const uint8_t rank = io::read_u8(in, "rank of tensor " + t.name);
    size_t count = 1;
    for (uint8_t i = 0; i < rank; ++i) {
      const uint32_t d = io::read_u32(in, "dims of tensor " + t.name);
      t.shape.push_back(d);
      count *= d;
    }
    t.data.resize(count);
    const std::streamsize bytes = static_cast<std::streamsize>(count * sizeof(float));
    in.read(reinterpret_cast<char*>(t.data.data()), bytes);
    if (in.gcount() != bytes) {
      throw DataError("truncated: payload of tensor " + t.name + " in " + path.string());
    }
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace bassl
