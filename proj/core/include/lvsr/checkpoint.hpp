#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lvsr/layers.hpp"
#include "lvsr/tensor.hpp"

namespace lvsr {

/// On disk: "LWVSR001", u32 count, then per tensor u16 name length, name bytes,
/// u8 rank, rank x u32 dims, product(dims) x f32. All integers little-endian.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
/// Throws IoError on a missing file, bad magic or truncation.
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

std::vector<char> encode_checkpoint(const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<char>& bytes);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParameterRegistry<T>& registry);

/// Copies values into the registry. The checkpoint must list the same names in
/// the same order with the same shapes; the first mismatch raises ShapeError.
template <typename T>
void load_checkpoint(const std::filesystem::path& path, ParameterRegistry<T>& registry);

}  // namespace lvsr
