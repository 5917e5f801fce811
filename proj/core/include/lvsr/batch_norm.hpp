#pragma once

#include <cstddef>

#include "lvsr/tensor.hpp"

namespace lvsr {

enum class Mode { kTrain, kEval };

/// Per-channel affine parameters plus running statistics. Running stats are
/// plain tensors without gradients and are only written in train mode.
template <typename T>
struct BatchNormState {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels);
  std::size_t channels() const { return gamma.numel(); }
};

/// Normalizes over every axis except 1. Train mode uses biased batch variance for
/// the output and folds the unbiased variance into the running estimate.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNormState<T>& state, Mode mode);

}  // namespace lvsr
