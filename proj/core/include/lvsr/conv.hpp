#pragma once

#include <cstddef>
#include <vector>

#include "lvsr/tensor.hpp"

namespace lvsr {

enum class Padding {
  kSymmetric,   ///< floor((k-1)*d/2) zeros before, the rest after
  kCausalLeft,  ///< (k-1)*d zeros before the time axis, none after (1-D only)
};

enum class ConvAlgo { kAuto, kDirect, kIm2col };

/// Geometry of an N-D cross-correlation over [N, C, spatial...] inputs.
struct ConvDescriptor {
  std::vector<std::size_t> kernel;  // 1, 2 or 3 entries
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::vector<std::size_t> stride;    // empty = all ones
  std::vector<std::size_t> dilation;  // empty = all ones
  std::size_t groups = 1;
  Padding padding = Padding::kSymmetric;

  std::size_t spatial_rank() const { return kernel.size(); }
  std::size_t kernel_volume() const;
  std::size_t stride_at(std::size_t axis) const { return stride.empty() ? 1 : stride[axis]; }
  std::size_t dilation_at(std::size_t axis) const { return dilation.empty() ? 1 : dilation[axis]; }
  std::size_t pad_before(std::size_t axis) const;
  std::size_t pad_after(std::size_t axis) const;
  /// Output extent along `axis` for an input of length `in`; throws on empty output.
  std::size_t output_extent(std::size_t axis, std::size_t in) const;
  Shape weight_shape() const;
  /// Throws ShapeError when the descriptor is inconsistent.
  void validate() const;
};

ConvDescriptor conv1d(std::size_t in, std::size_t out, std::size_t k, std::size_t dilation = 1,
                      std::size_t groups = 1, Padding padding = Padding::kCausalLeft);
ConvDescriptor conv2d(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw, std::size_t stride = 1,
                      std::size_t groups = 1);

/// Cross-correlation. `bias` may be undefined. The direct and im2col paths
/// accumulate every output in the same order, so they agree exactly.
template <typename T>
Tensor<T> conv(const Tensor<T>& input, const ConvDescriptor& desc, const Tensor<T>& weight, const Tensor<T>& bias,
               ConvAlgo algo = ConvAlgo::kAuto);

namespace detail {
/// C[m,n] += sum_k A[m,k] * B[k,n] with k ascending; A is transposed when trans_a.
template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, bool trans_a,
                     const T* b, std::size_t ldb, T* c, std::size_t ldc);
}  // namespace detail

}  // namespace lvsr
