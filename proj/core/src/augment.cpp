#include "lvsr/augment.hpp"

#include <cmath>
#include <numeric>

#include "lvsr/errors.hpp"

namespace lvsr {

Tensor<float> one_hot(std::span<const std::size_t> labels, std::size_t classes) {
  std::vector<float> v(labels.size() * classes, 0.0f);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw ShapeError("one_hot: label " + std::to_string(labels[i]) + " out of range");
    v[i * classes + labels[i]] = 1.0f;
  }
  return Tensor<float>(Shape{labels.size(), classes}, std::move(v));
}

MixupResult mixup_with(const Tensor<float>& batch, const Tensor<float>& onehot, double lambda,
                       std::span<const std::size_t> permutation) {
  const std::size_t n = batch.dim(0);
  if (onehot.rank() != 2 || onehot.dim(0) != n) throw ShapeError("mixup: label rows do not match the batch");
  if (permutation.size() != n) throw ShapeError("mixup: permutation length does not match the batch");
  const float l = static_cast<float>(lambda), r = static_cast<float>(1.0 - lambda);
  auto mix = [&](const Tensor<float>& t) {
    const std::size_t row = t.numel() / n;
    auto src = t.data();
    std::vector<float> out(t.numel());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < row; ++j) out[i * row + j] = l * src[i * row + j] + r * src[permutation[i] * row + j];
    return Tensor<float>(t.shape(), std::move(out));
  };
  return {mix(batch), mix(onehot), lambda, std::vector<std::size_t>(permutation.begin(), permutation.end())};
}

MixupResult mixup(const Tensor<float>& batch, const Tensor<float>& onehot, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ConfigError("mixup alpha must be positive, got " + std::to_string(alpha));
  const std::size_t n = batch.dim(0);
  if (n < 2) throw ShapeError("mixup needs at least 2 samples");
  const double lambda = rng.beta(alpha, alpha);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  // Fisher-Yates with the shared engine so the draw sequence is fixed.
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i)));
    std::swap(perm[i], perm[j]);
  }
  return mixup_with(batch, onehot, lambda, perm);
}

std::vector<float> variable_length_augment(std::span<const float> clip, std::size_t channels, std::size_t frames,
                                           std::size_t frame_size, double min_keep, Rng& rng) {
  if (!(min_keep > 0.0 && min_keep <= 1.0)) throw ConfigError("var_len_min_keep must lie in (0,1]");
  if (static_cast<double>(frames) * min_keep < 1.0) throw ConfigError("var_len_min_keep keeps less than one frame");
  if (clip.size() != channels * frames * frame_size) throw ShapeError("variable_length_augment: clip size mismatch");
  const auto min_len = static_cast<std::size_t>(std::ceil(min_keep * static_cast<double>(frames) - 1e-9));
  const auto len = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(min_len), static_cast<std::int64_t>(frames)));
  const auto start = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(frames - len)));
  std::vector<float> out(clip.size(), 0.0f);
  for (std::size_t c = 0; c < channels; ++c) {
    const float* src = clip.data() + (c * frames + start) * frame_size;
    std::copy(src, src + len * frame_size, out.begin() + static_cast<std::ptrdiff_t>(c * frames * frame_size));
  }
  return out;
}

std::vector<float> random_crop_flip(std::span<const float> clip, std::size_t planes, std::size_t height,
                                    std::size_t width, std::size_t jitter, bool flip, Rng& rng) {
  if (clip.size() != planes * height * width) throw ShapeError("random_crop_flip: clip size mismatch");
  const auto j = static_cast<std::int64_t>(jitter);
  const auto dy = rng.integer(-j, j);
  const auto dx = rng.integer(-j, j);
  const bool mirror = flip && rng.bernoulli(0.5);
  std::vector<float> out(clip.size(), 0.0f);
  const auto h = static_cast<std::int64_t>(height), w = static_cast<std::int64_t>(width);
  for (std::size_t p = 0; p < planes; ++p) {
    const float* src = clip.data() + p * height * width;
    float* dst = out.data() + p * height * width;
    for (std::int64_t y = 0; y < h; ++y) {
      const std::int64_t sy = y + dy;
      if (sy < 0 || sy >= h) continue;
      for (std::int64_t x = 0; x < w; ++x) {
        std::int64_t sx = x + dx;
        if (sx < 0 || sx >= w) continue;
        if (mirror) sx = w - 1 - sx;
        dst[y * w + x] = src[sy * w + sx];
      }
    }
  }
  return out;
}

}  // namespace lvsr
