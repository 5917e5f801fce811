#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lvsr/ghost.hpp"
#include "lvsr/layers.hpp"
#include "lvsr/model_spec.hpp"

namespace lvsr {

/// One 3x3 position of a residual block: conv+BN, a Ghost module or a GhostV2 module.
/// Ghost variants carry their own BN and activation.
template <typename T>
struct FrontendConv {
  FrontendVariant kind = FrontendVariant::kStandard;
  Conv<T> conv;
  BatchNorm<T> bn;
  GhostModule<T> ghost;
  GhostV2Module<T> ghostv2;

  FrontendConv() = default;
  FrontendConv(FrontendVariant variant, const GhostSettings& gs, std::size_t in, std::size_t out, std::size_t stride,
               Rng& rng);
  /// `relu` only affects the standard kind.
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx, bool relu);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// ResNet basic block: relu(c2(c1(x)) + shortcut(x)); projection shortcut when the shape changes.
template <typename T>
struct BasicBlock {
  FrontendConv<T> c1;
  FrontendConv<T> c2;
  bool projection = false;
  Conv<T> down;
  BatchNorm<T> down_bn;

  BasicBlock() = default;
  BasicBlock(FrontendVariant variant, const GhostSettings& gs, std::size_t in, std::size_t out, std::size_t stride,
             Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Stem geometry shared with the cost model.
ConvDescriptor stem_descriptor(std::size_t in_channels, std::size_t width);
inline const std::vector<std::size_t> kStemPoolWindow{1, 3, 3};
inline const std::vector<std::size_t> kStemPoolStride{1, 2, 2};
inline const std::vector<std::size_t> kStemPoolPadding{0, 1, 1};

/// 3-D stem then a per-frame ResNet-18 trunk: [N,C,T,H,W] -> [N, 8w, T].
template <typename T>
struct Frontend {
  Conv<T> stem;
  BatchNorm<T> stem_bn;
  std::vector<BasicBlock<T>> blocks;  // 4 stages x 2
  std::size_t out_width = 0;

  Frontend() = default;
  Frontend(const ModelSpec& spec, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  /// Per-frame trunk on [N*T, w, H', W'] -> [N*T, 8w].
  Tensor<T> trunk(const Tensor<T>& x, const ForwardContext& ctx);
  Tensor<T> stem_forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Stage/block naming used by both the model registry and the cost model.
std::string trunk_block_path(std::size_t stage, std::size_t block);

}  // namespace lvsr
