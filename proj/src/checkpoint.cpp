#include "checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "errors.hpp"

namespace cirn {

namespace {

constexpr char kMagic[4] = {'C', 'I', 'R', 'N'};

template <typename T>
void write_scalar(std::ostream& os, T v) {
  // in-memory representation is little-endian on all supported targets
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_scalar(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw FormatError("checkpoint truncated");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& ckpt) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw FormatError("cannot write checkpoint: " + tmp);
    os.write(kMagic, 4);
    write_scalar<std::uint32_t>(os, kCheckpointVersion);
    std::string meta = ckpt.meta.dump();
    write_scalar<std::uint64_t>(os, meta.size());
    os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    write_scalar<std::uint64_t>(os, ckpt.tensors.size());
    for (const auto& t : ckpt.tensors) {
      write_scalar<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
      os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
      write_scalar<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
      for (std::size_t e : t.shape) write_scalar<std::uint64_t>(os, e);
      if (shape_numel(t.shape) != t.data.size())
        throw FormatError("checkpoint tensor " + t.name + " shape/data mismatch");
      os.write(reinterpret_cast<const char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!os) throw FormatError("checkpoint write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw FormatError("cannot move checkpoint into place: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("not a checkpoint file: " + path);
  std::uint32_t version = read_scalar<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version mismatch: file has " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion));
  std::uint64_t meta_len = read_scalar<std::uint64_t>(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw FormatError("checkpoint truncated in metadata");
  CheckpointData ckpt;
  ckpt.meta = nlohmann::json::parse(meta, nullptr, false);
  if (ckpt.meta.is_discarded()) throw FormatError("checkpoint metadata is not valid JSON");
  std::uint64_t count = read_scalar<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensorF32 t;
    std::uint32_t name_len = read_scalar<std::uint32_t>(is);
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    std::uint32_t rank = read_scalar<std::uint32_t>(is);
    for (std::uint32_t r = 0; r < rank; ++r)
      t.shape.push_back(static_cast<std::size_t>(read_scalar<std::uint64_t>(is)));
    std::size_t n = shape_numel(t.shape);
    t.data.resize(n);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!is) throw FormatError("checkpoint truncated in tensor " + t.name);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace cirn
