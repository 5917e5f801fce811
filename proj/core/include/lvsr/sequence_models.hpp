#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "lvsr/ghost.hpp"
#include "lvsr/layers.hpp"
#include "lvsr/model_spec.hpp"
#include "lvsr/partial.hpp"

namespace lvsr {

/// Causal conv -> BN -> act, or the Ghost module that replaces it.
template <typename T>
struct TemporalUnit {
  bool ghost_kind = false;
  Conv<T> conv;
  BatchNorm<T> bn;
  GhostModule<T> ghost;
  Activation activation = Activation::kRelu;

  TemporalUnit() = default;
  TemporalUnit(bool use_ghost, const GhostSettings& gs, std::size_t in, std::size_t out, std::size_t kernel,
               std::size_t dilation, bool bias, Activation act, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Two layers of parallel multi-kernel branches with a residual connection.
template <typename T>
struct MultiScaleBlock {
  std::vector<TemporalUnit<T>> first;
  std::vector<TemporalUnit<T>> second;
  std::vector<std::size_t> kernels;
  bool projection = false;
  Conv<T> down;
  double dropout = 0.0;

  MultiScaleBlock() = default;
  MultiScaleBlock(const ModelSpec& spec, std::size_t in, std::size_t dilation, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

template <typename T>
struct MSTCN {
  std::vector<MultiScaleBlock<T>> blocks;

  MSTCN() = default;
  MSTCN(const ModelSpec& spec, std::size_t in, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Multi-kernel two-layer unit whose output (growth channels) is appended to its input.
template <typename T>
struct DenseLayer {
  std::vector<TemporalUnit<T>> first;
  std::vector<TemporalUnit<T>> second;
  std::vector<std::size_t> kernels;
  Conv<T> residual;
  double dropout = 0.0;

  DenseLayer() = default;
  DenseLayer(const ModelSpec& spec, std::size_t in, std::size_t dilation, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Dense layers followed by BN -> act -> pointwise transition back to the block width.
template <typename T>
struct DenseBlock {
  std::vector<DenseLayer<T>> layers;
  BatchNorm<T> transition_bn;
  Conv<T> transition;
  Activation activation = Activation::kRelu;

  DenseBlock() = default;
  DenseBlock(const ModelSpec& spec, std::size_t in, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

template <typename T>
struct DCTCN {
  std::vector<DenseBlock<T>> blocks;

  DCTCN() = default;
  DCTCN(const ModelSpec& spec, std::size_t in, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

/// Four Partial Temporal Blocks with increasing dilation; a pointwise input
/// projection is added only when the feature width differs from the hidden width.
template <typename T>
struct PartialTCN {
  bool projection = false;
  Conv<T> input_proj;
  std::vector<PartialBlock<T>> blocks;

  PartialTCN() = default;
  PartialTCN(const ModelSpec& spec, std::size_t in, Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

PartialBlockConfig partial_block_config(const ModelSpec& spec, std::size_t dilation);

template <typename T>
struct SequenceModel {
  std::variant<MSTCN<T>, DCTCN<T>, PartialTCN<T>> net;

  SequenceModel() = default;
  SequenceModel(const ModelSpec& spec, std::size_t in, Rng& rng);
  /// [N, in, T] -> [N, hidden, T]
  Tensor<T> forward(const Tensor<T>& x, const ForwardContext& ctx);
  void register_in(ParameterRegistry<T>& reg, const std::string& path);
};

}  // namespace lvsr
