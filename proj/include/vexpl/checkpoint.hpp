// Versioned binary weight container: string metadata plus named dense blocks
// stored row-major as raw IEEE doubles, so save/load is bit-exact.
//
// Layout (little-endian):
//   magic "VEXPLCKP", u32 version,
//   u32 meta count, then (str key, str value)*,
//   u32 block count, then (str name, u64 rows, u64 cols, f64[rows*cols])*
// where str is a u32 byte length followed by the bytes.
#pragma once

#include "vexpl/netcore.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vexpl {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Matrix>> blocks;

  void put(const std::string& name, Matrix block);
  const Matrix& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;

  /// Stores every block of a parameter set under `prefix`.
  template <class Params>
  void put_params(const std::string& prefix, const Params& params) {
    params.for_each_block(prefix, [&](const std::string& name, const auto& block) {
      put(name, Matrix(block));
    });
  }

  /// Restores every block of a parameter set; shapes must match what `params` already holds.
  template <class Params>
  void get_params(const std::string& prefix, Params& params) const {
    params.for_each_block(prefix, [&](const std::string& name, auto& block) {
      const Matrix& stored = get(name);
      if (stored.rows() != block.rows() || stored.cols() != block.cols()) {
        throw CheckpointError("checkpoint block '" + name + "' has unexpected shape");
      }
      block = stored;
    });
  }

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  bool operator==(const Checkpoint&) const = default;
};

}  // namespace vexpl
