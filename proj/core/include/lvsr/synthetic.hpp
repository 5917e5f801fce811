#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lvsr/tensor.hpp"

namespace lvsr {

/// Class k is a soft vertical bar oscillating horizontally with k+1 cycles per
/// clip and a random phase. With a prime frame count every class visits the same
/// set of positions, so time-averaged frames carry no class information.
struct SyntheticDatasetSpec {
  std::size_t num_classes = 10;
  std::size_t samples_per_class = 20;
  std::size_t val_samples_per_class = 10;
  std::size_t frames = 29;
  std::size_t height = 32;
  std::size_t width = 32;
  double noise_std = 0.3;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending `data.*` field.
  void validate() const;
};

enum class Split { kTrain = 0, kVal = 1 };

/// Clips stored contiguously as [N, C, T, H, W] floats.
struct Dataset {
  std::size_t channels = 1;
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 0;
  std::vector<float> data;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t clip_size() const { return channels * frames * height * width; }
  std::span<const float> clip(std::size_t i) const;
  Shape clip_shape() const { return {channels, frames, height, width}; }
  /// Gathers the given samples into [B, C, T, H, W].
  Tensor<float> batch(std::span<const std::size_t> indices) const;
  void push_back(std::span<const float> clip, std::size_t label);
};

/// Sample `index` of a split; a pure function of (spec, split, index).
std::vector<float> synthetic_clip(const SyntheticDatasetSpec& spec, Split split, std::size_t index,
                                  std::size_t* label = nullptr, double* phase = nullptr);
Dataset generate_synthetic(const SyntheticDatasetSpec& spec, Split split);

/// Writes <dir>/<name>.f32 (little-endian clips) and <dir>/<name>.json (shape, labels).
void export_dataset(const Dataset& ds, const std::filesystem::path& dir, const std::string& name);
Dataset import_dataset(const std::filesystem::path& dir, const std::string& name);

}  // namespace lvsr
