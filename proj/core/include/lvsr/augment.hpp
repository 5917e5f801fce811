#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lvsr/random.hpp"
#include "lvsr/tensor.hpp"

namespace lvsr {

struct MixupResult {
  Tensor<float> inputs;
  Tensor<float> targets;  // soft labels, rows sum to 1
  double lambda = 1.0;
  std::vector<std::size_t> permutation;
};

/// lambda ~ Beta(alpha, alpha); x_i <- lambda x_i + (1 - lambda) x_perm(i), labels alike.
/// Throws ConfigError for alpha <= 0 and ShapeError for fewer than 2 samples.
MixupResult mixup(const Tensor<float>& batch, const Tensor<float>& onehot, double alpha, Rng& rng);
/// Deterministic core of mixup with an explicit coefficient and pairing.
MixupResult mixup_with(const Tensor<float>& batch, const Tensor<float>& onehot, double lambda,
                       std::span<const std::size_t> permutation);

Tensor<float> one_hot(std::span<const std::size_t> labels, std::size_t classes);

/// Keeps a contiguous window of length uniform in [ceil(min_keep T), T], moves it to
/// the start and zero-fills the tail. `clip` is [C, T, frame...] with `frame_size`
/// values per frame. Throws ConfigError unless 0 < min_keep <= 1 and T*min_keep >= 1.
std::vector<float> variable_length_augment(std::span<const float> clip, std::size_t channels, std::size_t frames,
                                           std::size_t frame_size, double min_keep, Rng& rng);

/// Shifts every frame by a random (dy, dx) in [-jitter, jitter] with zero fill and
/// mirrors horizontally with probability 1/2 when `flip` is set.
std::vector<float> random_crop_flip(std::span<const float> clip, std::size_t planes, std::size_t height,
                                    std::size_t width, std::size_t jitter, bool flip, Rng& rng);

}  // namespace lvsr
