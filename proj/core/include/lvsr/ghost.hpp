#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lvsr/layers.hpp"

namespace lvsr {

enum class Dims { k1D, k2D };

/// Ghost module: X1 = act(BN(primary(x))), X2 = act(BN(cheap(X1))), out = [X1, X2].
/// The primary conv is pointwise by default; `primary_kernel` widens it.
struct GhostConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 2;
  double ratio = 0.5;
  std::size_t cheap_kernel = 3;
  Dims dims = Dims::k2D;
  std::size_t primary_kernel = 1;
  std::size_t stride = 1;    // 2-D: applied by the primary conv
  std::size_t dilation = 1;  // 1-D: applied by the primary conv
  Activation activation = Activation::kRelu;

  std::size_t primary_channels() const;
  std::size_t cheap_channels() const { return out_channels - primary_channels(); }
  /// gcd(primary, cheap): depthwise when the halves are equal.
  std::size_t cheap_groups() const;
  ConvDescriptor primary_desc() const;
  ConvDescriptor cheap_desc() const;
  /// Throws ConfigError.
  void validate() const;
};

template <typename T>
struct GhostModule {
  GhostConfig cfg;
  Conv<T> primary;
  BatchNorm<T> primary_bn;
  Conv<T> cheap;
  BatchNorm<T> cheap_bn;

  GhostModule() = default;
  GhostModule(const GhostConfig& config, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  /// X1 only; shares state with forward (BN stats update in train mode).
  Tensor<T> primary_branch(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Decoupled fully-connected attention over a 2-D map:
/// avgpool -> BN(entry conv) -> BN(1xk dw) -> BN(kx1 dw) -> sigmoid -> nearest upsample.
struct DFCConfig {
  std::size_t in_channels = 1;
  std::size_t channels = 1;  // attention map channels
  std::size_t entry_kernel = 1;
  std::size_t directional_kernel = 5;
  std::size_t downsample = 2;
  std::size_t stride = 1;

  void validate() const;
  ConvDescriptor entry_desc() const;
  ConvDescriptor horizontal_desc() const;
  ConvDescriptor vertical_desc() const;
};

template <typename T>
struct DFCAttention {
  DFCConfig cfg;
  Conv<T> entry;
  BatchNorm<T> entry_bn;
  Conv<T> horizontal;
  BatchNorm<T> horizontal_bn;
  Conv<T> vertical;
  BatchNorm<T> vertical_bn;

  DFCAttention() = default;
  DFCAttention(const DFCConfig& config, Rng& rng);
  /// Attention resized to `target` (H, W).
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, const std::vector<std::size_t>& target);
  /// Attention at the input resolution.
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Ghost output gated elementwise by DFC attention computed from the same input.
template <typename T>
struct GhostV2Module {
  GhostModule<T> ghost;
  DFCAttention<T> dfc;

  GhostV2Module() = default;
  GhostV2Module(const GhostConfig& gcfg, const DFCConfig& dcfg, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// DFC settings matching a Ghost module: same in/out channels and stride.
DFCConfig dfc_for(const GhostConfig& g, std::size_t entry_kernel);

}  // namespace lvsr
