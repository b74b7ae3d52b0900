#include "rblb/checkpoint.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace rblb {

namespace {

constexpr char kMagic[5] = {'R', 'B', 'L', 'B', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

void write_f32_array(std::ostream& out, const std::vector<float>& data) {
  static_assert(sizeof(float) == 4);
  for (float v : data) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
  }
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw CheckpointError(CheckpointErrorCode::CorruptFile, "truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw CheckpointError(CheckpointErrorCode::CorruptFile, "truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

void write_array(std::ostream& out, const std::string& name, const Shape& shape,
                 const std::vector<float>& data) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(out, static_cast<std::uint32_t>(shape.n));
  write_u32(out, static_cast<std::uint32_t>(shape.c));
  write_u32(out, static_cast<std::uint32_t>(shape.h));
  write_u32(out, static_cast<std::uint32_t>(shape.w));
  write_u64(out, static_cast<std::uint64_t>(data.size()) * 4);
  write_f32_array(out, data);
}

NamedArray read_array(std::istream& in) {
  NamedArray arr;
  const std::uint32_t name_len = read_u32(in);
  if (name_len > (1u << 16)) {
    throw CheckpointError(CheckpointErrorCode::CorruptFile, "implausible array name length");
  }
  arr.name.resize(name_len);
  in.read(arr.name.data(), name_len);
  if (!in) throw CheckpointError(CheckpointErrorCode::CorruptFile, "truncated checkpoint");
  arr.shape.n = static_cast<int>(read_u32(in));
  arr.shape.c = static_cast<int>(read_u32(in));
  arr.shape.h = static_cast<int>(read_u32(in));
  arr.shape.w = static_cast<int>(read_u32(in));
  const std::uint64_t byte_len = read_u64(in);
  if (byte_len % 4 != 0 ||
      static_cast<std::int64_t>(byte_len / 4) != arr.shape.numel()) {
    throw CheckpointError(CheckpointErrorCode::CorruptFile,
                          "array byte length does not match shape for " + arr.name);
  }
  arr.data.resize(byte_len / 4);
  for (auto& v : arr.data) {
    const std::uint32_t bits = read_u32(in);
    std::memcpy(&v, &bits, 4);
  }
  return arr;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  for (const auto& [name, store] : ckpt.stores) {
    if (!store.all_finite()) {
      throw std::invalid_argument("save_checkpoint: non-finite values in store " + name);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));

  nlohmann::json meta = ckpt.metadata;
  nlohmann::json store_meta = nlohmann::json::object();
  for (const auto& [name, store] : ckpt.stores) {
    store_meta[name] = {{"creation_seed", store.creation_seed}, {"spec_hash", store.spec_hash}};
  }
  meta["store_info"] = store_meta;
  const std::string meta_str = meta.dump();
  write_u32(out, static_cast<std::uint32_t>(meta_str.size()));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  std::uint32_t count = static_cast<std::uint32_t>(ckpt.arrays.size());
  for (const auto& [name, store] : ckpt.stores) count += static_cast<std::uint32_t>(store.size());
  write_u32(out, count);

  for (const auto& [name, store] : ckpt.stores) {
    for (const auto& [param_path, tensor] : store) {
      const auto vals = tensor.values();
      write_array(out, "params/" + name + "/" + param_path, tensor.shape(),
                  std::vector<float>(vals.begin(), vals.end()));
    }
  }
  for (const auto& [name, entry] : ckpt.arrays) {
    write_array(out, name, entry.first, entry.second);
  }
  out.flush();
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);

  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(kMagic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(CheckpointErrorCode::MagicMismatch,
                          "not a RBLB1 checkpoint: " + path);
  }

  Checkpoint ckpt;
  const std::uint32_t meta_len = read_u32(in);
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), meta_len);
  if (!in) throw CheckpointError(CheckpointErrorCode::CorruptFile, "truncated metadata");
  try {
    ckpt.metadata = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::parse_error&) {
    throw CheckpointError(CheckpointErrorCode::CorruptFile, "unparseable metadata JSON");
  }

  const std::uint32_t count = read_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray arr = read_array(in);
    if (arr.name.starts_with("params/")) {
      const std::string rest = arr.name.substr(7);
      const auto slash = rest.find('/');
      if (slash == std::string::npos) {
        throw CheckpointError(CheckpointErrorCode::CorruptFile,
                              "malformed parameter name " + arr.name);
      }
      const std::string store_name = rest.substr(0, slash);
      const std::string param_path = rest.substr(slash + 1);
      ckpt.stores[store_name].insert(param_path,
                                     Tensor::from_data(arr.shape, std::move(arr.data), false));
    } else {
      ckpt.arrays[arr.name] = {arr.shape, std::move(arr.data)};
    }
  }
  // Trailing garbage means the writer and reader disagree about the layout.
  in.peek();
  if (!in.eof()) {
    throw CheckpointError(CheckpointErrorCode::CorruptFile, "trailing bytes in checkpoint");
  }

  if (ckpt.metadata.contains("store_info")) {
    for (auto& [name, info] : ckpt.metadata["store_info"].items()) {
      if (ckpt.stores.count(name) == 0) {
        throw CheckpointError(CheckpointErrorCode::CorruptFile,
                              "metadata references missing store " + name);
      }
      ckpt.stores[name].creation_seed = info.at("creation_seed").get<std::uint64_t>();
      ckpt.stores[name].spec_hash = info.at("spec_hash").get<std::uint64_t>();
    }
  }
  return ckpt;
}

const ParamStore& checked_store(const Checkpoint& ckpt, const std::string& name,
                                const NetworkSpec& expected) {
  auto it = ckpt.stores.find(name);
  if (it == ckpt.stores.end()) {
    throw CheckpointError(CheckpointErrorCode::CorruptFile, "checkpoint has no store " + name);
  }
  if (it->second.spec_hash != expected.hash()) {
    throw CheckpointError(CheckpointErrorCode::SpecHashMismatch,
                          "store " + name + " was created from a different network spec");
  }
  return it->second;
}

}  // namespace rblb
