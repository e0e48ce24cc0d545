#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vladvsa/error.hpp"
#include "vladvsa/model.hpp"

namespace vladvsa {

// Checkpoint layout (all little-endian):
//   magic "VVSA0001"
//   per tensor: u32 name length, name bytes, u32 rank, u32 dims..., f64 data
// Tensors follow until end of file. A "meta" tensor carries the scalar
// state (aggregator kind, temperature, shared word count) so a file fully
// reconstructs the model.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline void put_f64(std::ostream& os, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) |
      (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

inline bool get_f64(std::istream& is, double& d) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  d = std::bit_cast<double>(v);
  return true;
}

}  // namespace detail

constexpr char kCheckpointMagic[] = "VVSA0001";

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<double> data;
};

inline void write_tensor(std::ostream& os, const std::string& name,
                         const std::vector<std::size_t>& dims,
                         const double* data, std::size_t len) {
  detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) detail::put_u32(os, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < len; ++i) detail::put_f64(os, data[i]);
}

inline void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 8);
  const double meta[3] = {
      params.aggregator == Aggregator::kVlad ? 1.0 : 0.0, params.temperature,
      static_cast<double>(params.vocab.k_shared)};
  write_tensor(os, "meta", {3}, meta, 3);
  for (const auto& ref : tensor_refs(const_cast<ModelParams&>(params))) {
    write_tensor(os, ref.name, ref.dims, ref.data, ref.len);
  }
  if (!os) throw IoError("write failure on checkpoint: " + path);
}

inline std::vector<NamedTensor> read_tensors(const std::string& path,
                                             const char* magic) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char got[8];
  if (!is.read(got, 8) || std::string(got, 8) != std::string(magic, 8)) {
    throw IoError("bad magic in " + path);
  }
  std::vector<NamedTensor> tensors;
  std::uint32_t name_len;
  while (detail::get_u32(is, name_len)) {
    NamedTensor t;
    t.name.resize(name_len);
    if (!is.read(t.name.data(), name_len)) {
      throw IoError("truncated tensor name in " + path);
    }
    std::uint32_t rank;
    if (!detail::get_u32(is, rank)) throw IoError("truncated record in " + path);
    std::size_t len = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      std::uint32_t dim;
      if (!detail::get_u32(is, dim)) throw IoError("truncated dims in " + path);
      t.dims.push_back(dim);
      len *= dim;
    }
    t.data.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      if (!detail::get_f64(is, t.data[i])) {
        throw IoError("truncated tensor data in " + path);
      }
    }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

inline ModelParams load_checkpoint(const std::string& path) {
  const std::vector<NamedTensor> tensors = read_tensors(path, kCheckpointMagic);
  const NamedTensor* meta = nullptr;
  auto find = [&](const std::string& name) -> const NamedTensor* {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    throw IoError("checkpoint " + path + " is missing tensor '" + name + "'");
  };
  meta = find("meta");
  if (meta->data.size() != 3) throw IoError("malformed meta tensor in " + path);

  auto mat = [&](const std::string& name) {
    const NamedTensor* t = find(name);
    if (t->dims.size() != 2) throw IoError("tensor '" + name + "' is not rank 2");
    return Matrix(t->dims[0], t->dims[1], t->data);
  };
  auto vec = [&](const std::string& name) { return find(name)->data; };

  ModelParams p;
  p.aggregator = meta->data[0] != 0.0 ? Aggregator::kVlad : Aggregator::kGap;
  p.temperature = meta->data[1];
  p.encoder.l1.w = mat("encoder.l1.w");
  p.encoder.l1.b = vec("encoder.l1.b");
  p.encoder.l2.w = mat("encoder.l2.w");
  p.encoder.l2.b = vec("encoder.l2.b");
  p.vocab.words = mat("vocab.words");
  p.vocab.k_shared = static_cast<std::size_t>(meta->data[2]);
  p.vocab.k_specific = p.vocab.words.rows() - p.vocab.k_shared;
  p.classifier.w = mat("classifier.w");
  p.classifier.b = vec("classifier.b");
  p.discriminator.l1.w = mat("discriminator.l1.w");
  p.discriminator.l1.b = vec("discriminator.l1.b");
  p.discriminator.l2.w = mat("discriminator.l2.w");
  p.discriminator.l2.b = vec("discriminator.l2.b");
  return p;
}

}  // namespace vladvsa
