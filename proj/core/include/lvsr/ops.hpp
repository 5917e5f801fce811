#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lvsr/random.hpp"
#include "lvsr/tensor.hpp"

namespace lvsr {

enum class Activation { kRelu, kTanh, kSigmoid };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

// Elementwise ---------------------------------------------------------------

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> activate(const Tensor<T>& x, Activation a);

/// Inverted dropout: kept values are scaled by 1/(1-p). Identity when !training or p == 0.
template <typename T> Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng);

// Reductions ----------------------------------------------------------------

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
/// Mean over one axis; the axis is removed from the result.
template <typename T> Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis);
/// Dot product with a constant tensor of the same shape (used for projections in tests).
template <typename T> Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights);

template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

// Classification head -------------------------------------------------------

/// x[N,F] * W[F,K] + b[K]. `bias` may be undefined.
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Mean negative log-likelihood of softmax(logits) under soft targets [N,K] (rows sum to 1).
template <typename T> Tensor<T> cross_entropy(const Tensor<T>& logits, const Tensor<T>& soft_targets);
/// Hard-label variant.
template <typename T> Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels);

// Pooling and resampling over the trailing spatial axes of [N,C,...] --------

template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x, const std::vector<std::size_t>& window,
                   const std::vector<std::size_t>& stride);
template <typename T>
Tensor<T> max_pool(const Tensor<T>& x, const std::vector<std::size_t>& window,
                   const std::vector<std::size_t>& stride, const std::vector<std::size_t>& padding);
/// [N,C,H,W] -> [N,C]
template <typename T> Tensor<T> global_avg_pool_spatial(const Tensor<T>& x);
/// Nearest-neighbour resize to `target` (one entry per spatial axis, each >= input size).
template <typename T> Tensor<T> upsample_nearest(const Tensor<T>& x, const std::vector<std::size_t>& target);

// Channel manipulation (axis 1) ---------------------------------------------

/// First part receives floor(ratio*C) channels. With ratio == 1 the second part is undefined.
template <typename T> std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, double ratio);
template <typename T> std::pair<Tensor<T>, Tensor<T>> split_channels_at(const Tensor<T>& x, std::size_t first);
/// Undefined parts are skipped.
template <typename T> Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
/// out[c] = in[(c mod g) * (C/g) + floor(c/g)]
template <typename T> Tensor<T> channel_shuffle(const Tensor<T>& x, std::size_t groups);

/// Number of channels split_channels gives the first part.
std::size_t split_point(std::size_t channels, double ratio);

// Layout --------------------------------------------------------------------

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// out.shape[i] = x.shape[perm[i]]
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& perm);

bool all_finite(std::span<const float> v);
bool all_finite(std::span<const double> v);

}  // namespace lvsr
