#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lvsr/layers.hpp"

namespace lvsr {

enum class Precision { kStandard, kHigh };

Precision parse_precision(const std::string& s);
std::string to_string(Precision p);

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 0.0;  // 0: 1e-6 in double, 1e-3 in float
  std::size_t max_coords = 48;  // sampled coordinates per tensor
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  std::string name;
  double max_error = 0.0;  // worst per-tensor error
  std::string worst_tensor;
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Central differences against reverse mode. Per tensor the error is
/// ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2, 1e-3 * max(1, |L|))
/// over the sampled coordinates; the floor keeps analytically-zero gradients
/// (e.g. a bias feeding batch norm) from turning round-off into a failure.
template <typename T>
GradCheckResult check_gradients(const std::string& name, const std::function<Tensor<T>()>& loss_fn,
                                const std::vector<NamedTensor<T>>& wrt, const GradCheckOptions& opts);

struct BlockSuiteOptions {
  Precision precision = Precision::kHigh;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  double ratio = 0.75;  // partial blocks
  std::size_t kernel = 3;
  Activation activation = Activation::kRelu;
  std::size_t max_coords = 48;
  double step = 0.0;  // 0: precision default
};

/// Every block type on small random shapes: Ghost (1-D/2-D), DFC, GhostV2, the
/// three partial blocks, MS-TCN block (standard and ghost), DC-TCN block and
/// ResNet basic blocks (standard, ghost, ghostv2).
std::vector<GradCheckResult> run_block_gradchecks(const BlockSuiteOptions& opts);

}  // namespace lvsr
