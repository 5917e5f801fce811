#pragma once

#include <cstddef>
#include <string>
#include <variant>

#include "lvsr/layers.hpp"

namespace lvsr {

enum class CoreKind { kTemporal, kShuffle, kFaster };

CoreKind parse_core(const std::string& name);
std::string to_string(CoreKind k);

struct PartialBlockConfig {
  std::size_t channels = 512;
  double ratio = 0.75;
  CoreKind core = CoreKind::kFaster;
  std::size_t kernel = 3;
  std::size_t dilation = 1;
  double dropout = 0.2;
  Activation activation = Activation::kRelu;
  std::size_t mlp_expand = 2;       // Faster core
  std::size_t shuffle_groups = 2;   // Shuffle core
  bool shuffle_final_activation = true;

  /// Width of the compute branch, floor(ratio * channels).
  std::size_t branch_channels() const;
  /// Throws ConfigError.
  void validate() const;
};

/// Two rounds of causal conv -> BN -> act -> dropout.
template <typename T>
struct TemporalCore {
  Conv<T> conv1;
  BatchNorm<T> bn1;
  Conv<T> conv2;
  BatchNorm<T> bn2;
  Activation activation = Activation::kRelu;
  double dropout = 0.0;

  TemporalCore() = default;
  TemporalCore(std::size_t channels, std::size_t kernel, std::size_t dilation, double dropout_rate, Activation act,
               Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// pw -> BN -> act -> causal dw -> BN -> pw -> BN -> act.
template <typename T>
struct ShuffleCore {
  Conv<T> pw1;
  BatchNorm<T> bn1;
  Conv<T> dw;
  BatchNorm<T> bn2;
  Conv<T> pw2;
  BatchNorm<T> bn3;
  Activation activation = Activation::kRelu;
  bool final_activation = true;
  double dropout = 0.0;

  ShuffleCore() = default;
  ShuffleCore(std::size_t channels, std::size_t kernel, std::size_t dilation, double dropout_rate, Activation act,
              bool final_act, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Single causal conv on the compute branch plus the pointwise MLP run after the merge.
template <typename T>
struct FasterCore {
  Conv<T> spatial;  // branch F
  Conv<T> expand;
  BatchNorm<T> bn;
  Conv<T> project;
  Activation activation = Activation::kRelu;
  double dropout = 0.0;

  FasterCore() = default;
  FasterCore(std::size_t channels, std::size_t branch, std::size_t kernel, std::size_t dilation,
             std::size_t mlp_expand, double dropout_rate, Activation act, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x1, const ForwardContext& ctx);
  Tensor<T> mlp(const Tensor<T>& merged, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// out = post_add(post_merge(concat(f(x[:split]), x[split:])) + x). With split == C
/// the passthrough part is empty.
template <typename T, typename F, typename PostMerge, typename PostAdd>
Tensor<T> partial_forward(const Tensor<T>& x, std::size_t split, F&& f, PostMerge&& post_merge, PostAdd&& post_add) {
  auto [x1, x2] = split_channels_at(x, split);
  auto merged = concat_channels(f(x1), x2);
  return post_add(add(post_merge(merged), x));
}

template <typename T>
struct PartialBlock {
  PartialBlockConfig cfg;
  std::variant<TemporalCore<T>, ShuffleCore<T>, FasterCore<T>> core;

  PartialBlock() = default;
  PartialBlock(const PartialBlockConfig& config, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

}  // namespace lvsr
