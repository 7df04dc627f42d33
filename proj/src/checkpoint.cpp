#include "vexpl/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace vexpl {
namespace {

constexpr char kMagic[8] = {'V', 'E', 'X', 'P', 'L', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <class T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void write_str(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError("checkpoint truncated");
  return value;
}

std::string read_str(std::istream& in) {
  const auto n = read_pod<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace

void Checkpoint::put(const std::string& name, Matrix block) {
  for (auto& [n, b] : blocks) {
    if (n == name) {
      b = std::move(block);
      return;
    }
  }
  blocks.emplace_back(name, std::move(block));
}

bool Checkpoint::has(const std::string& name) const {
  return std::any_of(blocks.begin(), blocks.end(), [&](const auto& b) { return b.first == name; });
}

const Matrix& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, b] : blocks) {
    if (n == name) return b;
  }
  throw CheckpointError("checkpoint has no block named '" + name + "'");
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint has no metadata key '" + key + "'");
  return it->second;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    write_str(out, k);
    write_str(out, v);
  }
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& [name, m] : blocks) {
    write_str(out, name);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) write_pod<double>(out, m(r, c));
    }
  }
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint file");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto n_meta = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_str(in);
    ck.meta[k] = read_str(in);
  }
  const auto n_blocks = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    std::string name = read_str(in);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = read_pod<double>(in);
    }
    ck.blocks.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

}  // namespace vexpl
